#include "l2g/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "l2g/alignment.hpp"
#include "l2g/evaluation.hpp"
#include "l2g/graph.hpp"
#include "l2g/local_embed.hpp"
#include "l2g/partition.hpp"
#include "l2g/patch_graph.hpp"

namespace l2g {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw Error(where + ": cannot parse '" + text + "'");
  return value;
}

std::vector<Eigen::Index> parse_dims(const std::string& text, const std::string& where) {
  std::vector<Eigen::Index> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) dims.push_back(parse_number<Eigen::Index>(item, where));
  }
  return dims;
}

std::string format_double(double x) {
  std::ostringstream out;
  out << std::setprecision(17) << x;
  return out.str();
}

std::string join_dims(const std::vector<Eigen::Index>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? "," : "") + std::to_string(dims[i]);
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (dim < 1) throw Error("config: dim must be positive");
  if (num_patches < 1) throw Error("config: num_patches must be at least 1");
  if (target_degree < 1) throw Error("config: target_degree must be at least 1");
  if (min_overlap < static_cast<std::size_t>(dim + 1))
    throw Error("config: min_overlap " + std::to_string(min_overlap) + " is below dim+1 = " + std::to_string(dim + 1));
  if (max_overlap < min_overlap)
    throw Error("config: max_overlap " + std::to_string(max_overlap) + " is below min_overlap " +
                std::to_string(min_overlap));
  if (!(tol_eigen > 0) || !(tol_lsq > 0)) throw Error("config: tolerances must be positive");
  if (jobs < 1) throw Error("config: jobs must be at least 1");
  for (auto d : eval_dims)
    if (d < 1 || min_overlap < static_cast<std::size_t>(d + 1))
      throw Error("config: eval dimension " + std::to_string(d) + " needs min_overlap >= " + std::to_string(d + 1));
  if (synth_nodes < 1 || !(synth_sigma >= 0) || synth_neighbours < 1) throw Error("config: invalid synth settings");
}

void apply_config_text(PipelineConfig& config, std::istream& in, const std::string& source) {
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "input") config.input = value;
    else if (key == "workdir") config.workdir = value;
    else if (key == "dim") config.dim = parse_number<Eigen::Index>(value, where);
    else if (key == "num_patches") config.num_patches = parse_number<int>(value, where);
    else if (key == "target_degree") config.target_degree = parse_number<int>(value, where);
    else if (key == "min_overlap") config.min_overlap = parse_number<std::size_t>(value, where);
    else if (key == "max_overlap") config.max_overlap = parse_number<std::size_t>(value, where);
    else if (key == "seed") config.seed = parse_number<std::uint64_t>(value, where);
    else if (key == "tol_eigen") config.tol_eigen = parse_number<double>(value, where);
    else if (key == "tol_lsq") config.tol_lsq = parse_number<double>(value, where);
    else if (key == "no_trans") {
      if (value != "true" && value != "false") throw Error(where + ": no_trans must be true or false");
      config.no_trans = value == "true";
    } else if (key == "jobs") config.jobs = parse_number<int>(value, where);
    else if (key == "eval_dims") config.eval_dims = parse_dims(value, where);
    else if (key == "synth_nodes") config.synth_nodes = parse_number<Eigen::Index>(value, where);
    else if (key == "synth_sigma") config.synth_sigma = parse_number<double>(value, where);
    else if (key == "synth_neighbours") config.synth_neighbours = parse_number<int>(value, where);
    else throw Error(where + ": unknown key '" + key + "'");
  }
}

void apply_config_file(PipelineConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  apply_config_text(config, in, path.string());
}

std::string render_config(const PipelineConfig& c) {
  std::ostringstream out;
  out << "input = " << c.input.string() << '\n'
      << "workdir = " << c.workdir.string() << '\n'
      << "dim = " << c.dim << '\n'
      << "num_patches = " << c.num_patches << '\n'
      << "target_degree = " << c.target_degree << '\n'
      << "min_overlap = " << c.min_overlap << '\n'
      << "max_overlap = " << c.max_overlap << '\n'
      << "seed = " << c.seed << '\n'
      << "tol_eigen = " << format_double(c.tol_eigen) << '\n'
      << "tol_lsq = " << format_double(c.tol_lsq) << '\n'
      << "no_trans = " << (c.no_trans ? "true" : "false") << '\n'
      << "jobs = " << c.jobs << '\n'
      << "eval_dims = " << join_dims(c.eval_dims) << '\n'
      << "synth_nodes = " << c.synth_nodes << '\n'
      << "synth_sigma = " << format_double(c.synth_sigma) << '\n'
      << "synth_neighbours = " << c.synth_neighbours << '\n';
  return out.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::map<std::string, std::string> stage_params(const PipelineConfig& c, const std::string& stage) {
  if (stage == "partition")
    return {{"num_patches", std::to_string(c.num_patches)},
            {"dim", std::to_string(c.dim)},
            {"seed", std::to_string(c.seed)}};
  if (stage == "patches")
    return {{"target_degree", std::to_string(c.target_degree)},
            {"min_overlap", std::to_string(c.min_overlap)},
            {"max_overlap", std::to_string(c.max_overlap)},
            {"seed", std::to_string(c.seed)}};
  if (stage == "embed") return {{"dim", std::to_string(c.dim)}};
  if (stage == "align")
    return {{"tol_eigen", format_double(c.tol_eigen)},
            {"tol_lsq", format_double(c.tol_lsq)},
            {"no_trans", c.no_trans ? "true" : "false"},
            {"seed", std::to_string(c.seed)}};
  if (stage == "eval")
    return {{"eval_dims", join_dims(c.eval_dims)},
            {"tol_eigen", format_double(c.tol_eigen)},
            {"tol_lsq", format_double(c.tol_lsq)},
            {"seed", std::to_string(c.seed)}};
  if (stage == "synth")
    return {{"synth_nodes", std::to_string(c.synth_nodes)},
            {"dim", std::to_string(c.dim)},
            {"num_patches", std::to_string(c.num_patches)},
            {"min_overlap", std::to_string(c.min_overlap)},
            {"synth_sigma", format_double(c.synth_sigma)},
            {"synth_neighbours", std::to_string(c.synth_neighbours)},
            {"seed", std::to_string(c.seed)}};
  throw Error("unknown stage '" + stage + "'");
}

std::string stage_hash(const PipelineConfig& config, const std::string& stage, const std::string& upstream_hash) {
  std::string text = stage + "\n";
  for (const auto& [k, v] : stage_params(config, stage)) text += k + "=" + v + "\n";
  text += "upstream=" + upstream_hash + "\n";
  return fnv1a_hex(text);
}

namespace {

class Workdir {
 public:
  explicit Workdir(const PipelineConfig& config) : config_(config), root_(config.workdir) {
    const auto path = root_ / artifacts::kManifest;
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        manifest_ = json::parse(in);
      } catch (const json::exception& e) {
        throw Error(path.string() + ": unreadable manifest (" + e.what() + ")");
      }
      if (manifest_.value("manifest_format", 0) != kManifestFormatVersion)
        throw Error(path.string() + ": unsupported manifest format; rerun the pipeline from the first stage");
    }
  }

  fs::path path(const char* name) const { return root_ / name; }

  bool synthetic() const { return stages().contains("synth"); }

  // Producer of graph/patches/embeddings in this workdir.
  std::string producer(const std::string& stage) const { return synthetic() ? "synth" : stage; }

  bool has_stage(const std::string& stage) const { return stages().contains(stage); }

  std::string recorded_hash(const std::string& stage) const {
    return has_stage(stage) ? stages()[stage].value("config_hash", std::string()) : std::string();
  }

  /// Hash `stage` would record now: its parameters under the current
  /// configuration chained to the recorded hash of the stage it consumes.
  std::string expected_hash(const std::string& stage) const {
    static const std::map<std::string, std::string> upstream = {
        {"patches", "partition"}, {"embed", "patches"}, {"align", "embed"}, {"eval", "embed"}};
    auto it = upstream.find(stage);
    return stage_hash(config_, stage, it == upstream.end() ? std::string() : recorded_hash(producer(it->second)));
  }

  /// Checks that `stage` ran with the current configuration and that the
  /// given artifact exists.
  void require(const std::string& stage, const fs::path& artifact) const {
    const std::string who = producer(stage);
    if (!fs::exists(artifact))
      throw Error("missing " + artifact.string() + "; run `l2g " + who + "` first");
    if (!has_stage(who))
      throw Error("manifest has no record of `l2g " + who + "` for " + artifact.string() + "; rerun `l2g " + who + "`");
    if (recorded_hash(who) != expected_hash(who))
      throw Error("stale " + artifact.string() + ": produced by `l2g " + who +
                  "` with a different configuration; rerun `l2g " + who + "`");
  }

  void record(const std::string& stage, const std::vector<std::string>& outputs, const std::vector<std::string>& drop) {
    fs::create_directories(root_);
    manifest_["manifest_format"] = kManifestFormatVersion;
    manifest_["embedding_format"] = kEmbeddingFormatVersion;
    manifest_["version"] = kVersion;
    auto& st = manifest_["stages"];
    if (!st.is_object()) st = json::object();
    for (const auto& d : drop) st.erase(d);
    json entry;
    entry["config_hash"] = expected_hash(stage);
    entry["seed"] = config_.seed;
    entry["params"] = stage_params(config_, stage);
    if (stage == "partition") entry["input"] = config_.input.string();
    entry["outputs"] = outputs;
    st[stage] = entry;
    std::ofstream out(root_ / artifacts::kManifest);
    if (!out) throw Error("cannot write " + (root_ / artifacts::kManifest).string());
    out << manifest_.dump(2) << '\n';
  }

 private:
  const json& stages() const {
    static const json empty = json::object();
    auto it = manifest_.find("stages");
    return it == manifest_.end() ? empty : *it;
  }

  const PipelineConfig& config_;
  fs::path root_;
  json manifest_ = json::object();
};

// The workdir graph keeps its compact ids; load_edge_list would renumber.
Graph read_workdir_graph(const fs::path& path, NodeId n) {
  auto loaded = load_edge_list(path);
  auto edges = loaded.graph.edges();
  NodeId max_id = -1;
  for (auto& [u, v] : edges) {
    u = loaded.mapping.to_old(u);
    v = loaded.mapping.to_old(v);
    max_id = std::max({max_id, u, v});
  }
  if (max_id >= n) throw Error(path.string() + ": node id " + std::to_string(max_id) + " exceeds node count");
  return Graph::from_edges(n, edges);
}

NodeId workdir_node_count(const Workdir& wd) {
  if (wd.synthetic()) return static_cast<NodeId>(read_embedding(wd.path(artifacts::kGroundTruth)).node_ids.size());
  return read_mapping(wd.path(artifacts::kMapping)).size();
}

std::vector<fs::path> embedding_paths(const Workdir& wd, int p) {
  std::vector<fs::path> paths;
  for (int k = 0; k < p; ++k) {
    auto path = patch_embedding_path(wd.path(artifacts::kEmbeddings), k);
    if (!fs::exists(path))
      throw Error("missing " + path.string() + "; run `l2g " + wd.producer("embed") + "` or supply external embeddings");
    paths.push_back(path);
  }
  return paths;
}

// Embeddings either come from the embed stage or are dropped in externally.
void require_embeddings(const Workdir& wd, std::ostream& log) {
  if (wd.producer("embed") == "embed" && !wd.has_stage("embed"))
    log << "embeddings: no embed stage recorded, treating " << wd.path(artifacts::kEmbeddings).string()
        << " as external\n";
  else
    wd.require("embed", wd.path(artifacts::kEmbeddings));
}

std::size_t min_edge_overlap(const PatchGraph& pg) {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& e : pg.edges) m = std::min(m, e.overlap_weight());
  return m;
}

}  // namespace

void cmd_partition(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  if (config.input.empty()) throw Error("partition: no input edge list given (--input)");
  Workdir wd(config);
  auto loaded = load_edge_list(config.input);
  auto lcc = largest_connected_component(loaded.graph);
  const auto mapping = NodeMapping::compose(loaded.mapping, lcc.mapping);
  const auto& g = lcc.graph;

  FennelOptions fo;
  fo.num_clusters = config.num_patches;
  fo.min_size = static_cast<std::size_t>((config.dim + 2) / 2);
  fo.seed = config.seed;
  const auto part = fennel_partition(g, fo);

  fs::create_directories(config.workdir);
  write_edge_list(g, wd.path(artifacts::kGraph));
  write_mapping(mapping, wd.path(artifacts::kMapping));
  write_partition(part, wd.path(artifacts::kPartition));
  wd.record("partition", {artifacts::kGraph, artifacts::kMapping, artifacts::kPartition}, {"synth"});

  const auto q = partition_quality(g, part);
  log << "partition: input " << loaded.graph.num_nodes() << " nodes, " << loaded.graph.num_edges()
      << " edges; LCC " << g.num_nodes() << " nodes, " << g.num_edges() << " edges; " << part.num_clusters()
      << " clusters, cut " << q.cut_edges << "\n";
}

void cmd_patches(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  Workdir wd(config);
  if (wd.synthetic()) throw Error("patches: workdir holds a synthetic instance; its patches come from `l2g synth`");
  wd.require("partition", wd.path(artifacts::kGraph));
  wd.require("partition", wd.path(artifacts::kPartition));
  const NodeId n = workdir_node_count(wd);
  const auto g = read_workdir_graph(wd.path(artifacts::kGraph), n);
  const auto part = read_partition(wd.path(artifacts::kPartition));
  part.validate(n);

  const auto pg = build_patch_graph(g, part);
  if (!pg.is_connected()) throw Error("patches: patch graph of the partition is disconnected");
  const auto weights = sparsifier_weights(g, pg);
  const auto sparse = sparsify_patch_graph(pg, weights, config.target_degree, config.seed);
  ExpandOptions eo;
  eo.min_overlap = config.min_overlap;
  eo.max_overlap = config.max_overlap;
  eo.seed = config.seed;
  eo.jobs = config.jobs;
  const auto expanded = expand_patches(g, sparse, eo);

  const auto dir = wd.path(artifacts::kPatches);
  fs::remove_all(dir);
  write_patch_graph(expanded, dir);
  wd.record("patches", {artifacts::kPatches}, {});

  std::size_t total = 0;
  for (const auto& p : expanded.patches) total += p.size();
  log << "patches: " << expanded.num_patches() << " patches, " << pg.edges.size() << " candidate edges, "
      << expanded.edges.size() << " kept; min overlap " << min_edge_overlap(expanded) << ", mean patch size "
      << static_cast<double>(total) / expanded.num_patches() << "\n";
}

void cmd_embed(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  Workdir wd(config);
  if (wd.synthetic()) throw Error("embed: workdir holds a synthetic instance; its embeddings come from `l2g synth`");
  wd.require("partition", wd.path(artifacts::kGraph));
  wd.require("patches", wd.path(artifacts::kPatches));
  const NodeId n = workdir_node_count(wd);
  const auto g = read_workdir_graph(wd.path(artifacts::kGraph), n);
  const auto pg = read_patch_graph(wd.path(artifacts::kPatches));
  if (pg.num_nodes != n) throw Error("embed: patch files do not cover the graph; rerun `l2g patches`");

  const auto embeddings = embed_all_patches(g, pg, config.dim, config.jobs);
  const auto dir = wd.path(artifacts::kEmbeddings);
  fs::remove_all(dir);
  export_embeddings(embeddings, dir);
  wd.record("embed", {artifacts::kEmbeddings}, {});
  log << "embed: " << embeddings.size() << " patch embeddings of dimension " << config.dim << "\n";
}

void cmd_align(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  Workdir wd(config);
  wd.require("patches", wd.path(artifacts::kPatches));
  require_embeddings(wd, log);
  const auto pg = read_patch_graph(wd.path(artifacts::kPatches));
  const auto embeddings = import_embeddings(embedding_paths(wd, pg.num_patches()), pg);

  NodeList all(static_cast<std::size_t>(pg.num_nodes));
  std::iota(all.begin(), all.end(), NodeId{0});
  if (config.no_trans) {
    write_embedding(wd.path(artifacts::kGlobal), all, no_trans_baseline(embeddings, pg));
    fs::remove(wd.path(artifacts::kTransforms));
    wd.record("align", {artifacts::kGlobal}, {"eval"});
    log << "align: wrote unaligned baseline for " << pg.num_nodes << " nodes\n";
    return;
  }

  AlignOptions ao;
  ao.tol_eigen = config.tol_eigen;
  ao.tol_lsq = config.tol_lsq;
  ao.seed = config.seed;
  ao.jobs = config.jobs;
  const auto result = align(embeddings, pg, ao);
  write_embedding(wd.path(artifacts::kGlobal), all, result.global);
  write_transforms(result, wd.path(artifacts::kTransforms));
  wd.record("align", {artifacts::kGlobal, artifacts::kTransforms}, {"eval"});

  for (const auto& w : result.warnings) log << "warning: " << w << "\n";
  log << "align: " << pg.num_patches() << " patches, " << pg.edges.size() << " patch edges, sync nonzeros "
      << result.sync_nonzeros << ", eigen iterations " << result.eigen_iterations << " (" << result.eigen_method
      << "), lsq iterations " << result.lsq_iterations << ", mean overlap " << result.mean_overlap << "\n";
}

void cmd_eval(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  Workdir wd(config);
  wd.require("partition", wd.path(artifacts::kGraph));
  wd.require("patches", wd.path(artifacts::kPatches));
  const NodeId n = workdir_node_count(wd);
  const auto g = read_workdir_graph(wd.path(artifacts::kGraph), n);
  const auto pg = read_patch_graph(wd.path(artifacts::kPatches));

  AlignOptions ao;
  ao.tol_eigen = config.tol_eigen;
  ao.tol_lsq = config.tol_lsq;
  ao.jobs = config.jobs;

  std::vector<ScenarioResult> rows;
  if (config.eval_dims.empty()) {
    require_embeddings(wd, log);
    const auto embeddings = import_embeddings(embedding_paths(wd, pg.num_patches()), pg);
    const Eigen::Index d = embeddings.front().dim();
    const Matrix full =
        wd.synthetic() ? read_embedding(wd.path(artifacts::kGroundTruth)).coords : spectral_embed(g, d);
    auto cmp = evaluate_scenarios(g, full, embeddings, pg, config.seed, ao);
    for (const auto& w : cmp.alignment.warnings) log << "warning: " << w << "\n";
    rows = std::move(cmp.rows);
  } else {
    if (wd.synthetic()) throw Error("eval: --dims re-embeds with the spectral embedder and needs a graph pipeline workdir");
    for (auto d : config.eval_dims) {
      if (min_edge_overlap(pg) < static_cast<std::size_t>(d + 1))
        throw Error("eval: patch overlaps are below d+1 = " + std::to_string(d + 1) +
                    "; rerun `l2g patches` with a larger --min-overlap");
      auto cmp = compare_scenarios(g, pg, d, config.seed, ao);
      for (const auto& w : cmp.alignment.warnings) log << "warning: d=" << d << ": " << w << "\n";
      rows.insert(rows.end(), cmp.rows.begin(), cmp.rows.end());
    }
  }

  {
    std::ofstream out(wd.path(artifacts::kEval));
    if (!out) throw Error("cannot write " + wd.path(artifacts::kEval).string());
    write_scenario_table(rows, out);
    std::ofstream series(wd.path(artifacts::kSeries));
    if (!series) throw Error("cannot write " + wd.path(artifacts::kSeries).string());
    write_auc_series(rows, series);
  }
  wd.record("eval", {artifacts::kEval, artifacts::kSeries}, {});
  write_scenario_table(rows, log);
}

void cmd_synth(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  Workdir wd(config);
  const auto inst = generate_synthetic(config.synth_nodes, config.dim, config.num_patches, config.synth_sigma,
                                       config.min_overlap, config.seed);
  const auto g = dot_product_graph(inst.ground_truth, config.synth_neighbours);

  fs::create_directories(config.workdir);
  for (const char* stale : {artifacts::kMapping, artifacts::kPartition, artifacts::kGlobal, artifacts::kTransforms})
    fs::remove(wd.path(stale));
  write_edge_list(g, wd.path(artifacts::kGraph));
  NodeList all(static_cast<std::size_t>(config.synth_nodes));
  std::iota(all.begin(), all.end(), NodeId{0});
  write_embedding(wd.path(artifacts::kGroundTruth), all, inst.ground_truth);
  fs::remove_all(wd.path(artifacts::kPatches));
  write_patch_graph(inst.patch_graph, wd.path(artifacts::kPatches));
  fs::remove_all(wd.path(artifacts::kEmbeddings));
  export_embeddings(inst.patches, wd.path(artifacts::kEmbeddings));
  wd.record("synth",
            {artifacts::kGraph, artifacts::kGroundTruth, artifacts::kPatches, artifacts::kEmbeddings},
            {"partition", "patches", "embed", "align", "eval"});
  log << "synth: " << config.synth_nodes << " nodes, dimension " << config.dim << ", " << config.num_patches
      << " patches, " << inst.patch_graph.edges.size() << " patch edges, sigma " << config.synth_sigma << "\n";
}

}  // namespace l2g
