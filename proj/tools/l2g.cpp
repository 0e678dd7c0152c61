// Command-line driver for the staged local2global pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "l2g/local_embed.hpp"
#include "l2g/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::string> input, workdir;
  std::optional<Eigen::Index> dim;
  std::optional<int> num_patches, target_degree, jobs, neighbours;
  std::optional<std::size_t> min_overlap, max_overlap;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_eigen, tol_lsq, sigma;
  std::optional<Eigen::Index> nodes;
  std::vector<Eigen::Index> dims;
  bool no_trans = false;

  void apply(l2g::PipelineConfig& c) const {
    if (input) c.input = *input;
    if (workdir) c.workdir = *workdir;
    if (dim) c.dim = *dim;
    if (num_patches) c.num_patches = *num_patches;
    if (target_degree) c.target_degree = *target_degree;
    if (min_overlap) c.min_overlap = *min_overlap;
    if (max_overlap) c.max_overlap = *max_overlap;
    if (seed) c.seed = *seed;
    if (tol_eigen) c.tol_eigen = *tol_eigen;
    if (tol_lsq) c.tol_lsq = *tol_lsq;
    if (jobs) c.jobs = *jobs;
    if (nodes) c.synth_nodes = *nodes;
    if (sigma) c.synth_sigma = *sigma;
    if (neighbours) c.synth_neighbours = *neighbours;
    if (!dims.empty()) c.eval_dims = dims;
    if (no_trans) c.no_trans = true;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local2global: align independently embedded graph patches into one embedding"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version",
                       std::string("l2g ") + l2g::kVersion + " (embedding format " +
                           std::to_string(l2g::kEmbeddingFormatVersion) + ", manifest format " +
                           std::to_string(l2g::kManifestFormatVersion) + ")");

  std::string config_file;
  Overrides o;
  app.add_option("--config", config_file, "Flat 'key = value' config file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--input", o.input, "Edge list of the input graph (partition stage)");
  app.add_option("--workdir", o.workdir, "Directory holding stage artifacts");
  app.add_option("--dim", o.dim, "Embedding dimension d");
  app.add_option("--num-patches", o.num_patches, "Number of patches p");
  app.add_option("--target-degree", o.target_degree, "Target patch degree k");
  app.add_option("--min-overlap", o.min_overlap, "Minimum overlap l (>= d+1)");
  app.add_option("--max-overlap", o.max_overlap, "Maximum overlap u (>= l)");
  app.add_option("--seed", o.seed, "Seed for every random choice");
  app.add_option("--tol-eigen", o.tol_eigen, "Eigensolver residual tolerance");
  app.add_option("--tol-lsq", o.tol_lsq, "Translation solve relative residual tolerance");
  app.add_flag("--no-trans", o.no_trans, "align: emit the unaligned centroid baseline");
  app.add_option("--jobs", o.jobs, "Worker threads; 1 gives the bit-stable sequential mode");
  app.add_option("--dims", o.dims, "eval: re-embed and evaluate at these dimensions")->delimiter(',');
  app.add_option("--nodes", o.nodes, "synth: number of nodes");
  app.add_option("--sigma", o.sigma, "synth: noise level");
  app.add_option("--neighbours", o.neighbours, "synth: neighbours per node in the dot-product graph");

  using Command = void (*)(const l2g::PipelineConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"partition", "Take the largest connected component and split it into p clusters", l2g::cmd_partition},
      {"patches", "Build, sparsify and expand the patch graph", l2g::cmd_patches},
      {"embed", "Spectral embedding of every patch", l2g::cmd_embed},
      {"align", "Synchronise patch embeddings into a global embedding", l2g::cmd_align},
      {"eval", "AUC of the full, l2g and no-trans scenarios", l2g::cmd_eval},
      {"synth", "Write a synthetic instance with planted rigid motions", l2g::cmd_synth},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);
  auto* run = app.add_subcommand("run", "partition, patches, embed, align and eval in sequence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string current = "config";
  try {
    l2g::PipelineConfig config;
    if (!config_file.empty()) l2g::apply_config_file(config, config_file);
    o.apply(config);
    if (run->parsed()) {
      for (std::size_t i = 0; i < 5; ++i) {
        current = std::get<0>(commands[i]);
        std::get<2>(commands[i])(config, std::cout);
      }
      return 0;
    }
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) {
        current = name;
        fn(config, std::cout);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << current << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
