#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "l2g/common.hpp"

namespace l2g {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kManifestFormatVersion = 1;

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path workdir = "l2g_work";
  Eigen::Index dim = 128;
  int num_patches = 10;
  int target_degree = 4;
  std::size_t min_overlap = 129;
  std::size_t max_overlap = 256;
  std::uint64_t seed = 0;
  double tol_eigen = 1e-10;
  double tol_lsq = 1e-10;
  bool no_trans = false;
  int jobs = 1;
  std::vector<Eigen::Index> eval_dims;  // empty: evaluate at `dim` with the stored embeddings
  // synth only
  Eigen::Index synth_nodes = 1000;
  double synth_sigma = 0.0;
  int synth_neighbours = 10;

  /// Throws on violated invariants (l ≥ d+1, u ≥ l, p ≥ 1, ...).
  void validate() const;
};

/// Applies "key = value" lines ('#' comments, blank lines allowed). Unknown
/// keys and malformed values are errors naming the line.
void apply_config_text(PipelineConfig& config, std::istream& in, const std::string& source);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

/// Canonical "key = value" rendering; reading it back reproduces the config.
std::string render_config(const PipelineConfig& config);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

// Workdir layout.
namespace artifacts {
inline constexpr const char* kGraph = "graph.edges";
inline constexpr const char* kMapping = "mapping.txt";
inline constexpr const char* kPartition = "partition.txt";
inline constexpr const char* kPatches = "patches";
inline constexpr const char* kEmbeddings = "embeddings";
inline constexpr const char* kGlobal = "global.l2ge";
inline constexpr const char* kTransforms = "transforms.txt";
inline constexpr const char* kEval = "eval.tsv";
inline constexpr const char* kSeries = "eval_series.tsv";
inline constexpr const char* kGroundTruth = "ground_truth.l2ge";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifacts

/// Parameters a stage's outputs depend on (jobs never matters).
std::map<std::string, std::string> stage_params(const PipelineConfig& config, const std::string& stage);
/// Hash of a stage's parameters chained to the hash of the stage it consumes.
std::string stage_hash(const PipelineConfig& config, const std::string& stage, const std::string& upstream_hash);

// Stage commands. Each validates its inputs, writes its artifacts into the
// workdir, records itself in the manifest and logs a summary to `log`.
void cmd_partition(const PipelineConfig& config, std::ostream& log);
void cmd_patches(const PipelineConfig& config, std::ostream& log);
void cmd_embed(const PipelineConfig& config, std::ostream& log);
void cmd_align(const PipelineConfig& config, std::ostream& log);
void cmd_eval(const PipelineConfig& config, std::ostream& log);
void cmd_synth(const PipelineConfig& config, std::ostream& log);

}  // namespace l2g
