#include "photofab/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "photofab/alloc_contiguous.hpp"
#include "photofab/config.hpp"
#include "photofab/cost_model.hpp"
#include "photofab/frag_alloc.hpp"
#include "photofab/workload.hpp"

namespace photofab::cli {
namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string format = "csv";
  int threads = -1;

  std::string experiment;
  std::string problem_path;
  std::string shape;
  std::string mode;
  double bytes = 0.0;
  double churn_fraction = -1.0;
  std::string churn_by = "slices";
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig config = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.threads >= 0) config.threads = o.threads;
  config.validate();
  return config;
}

// Writes `name`.csv plus a summary `name`.json under --out, or prints to
// `out` when no directory is given.
void emit(const Options& o, const std::string& name, const ExperimentResult& result,
          std::ostream& out) {
  if (o.out_dir.empty()) {
    if (o.format == "json") {
      out << to_json(result, true).dump(2) << '\n';
    } else {
      write_csv(out, result);
    }
    return;
  }
  std::filesystem::create_directories(o.out_dir);
  const std::filesystem::path dir(o.out_dir);
  if (o.format == "json") {
    std::ofstream(dir / (name + ".json")) << to_json(result, true).dump(2) << '\n';
    return;
  }
  std::ofstream csv(dir / (name + ".csv"));
  write_csv(csv, result);
  std::ofstream(dir / (name + ".summary.json")) << to_json(result, false).dump(2) << '\n';
}

ExperimentResult table(const Options& o, const ExperimentConfig& config,
                       std::vector<std::string> columns) {
  ExperimentResult r;
  r.seed = o.seed;
  r.config = to_json(config);
  r.columns = std::move(columns);
  return r;
}

int cmd_fill(const Options& o, std::ostream& out) {
  const ExperimentConfig config = load(o);
  Cluster cluster(config.cluster);
  Rng rng = trial_rng(o.seed, 0);
  const FillTrace trace = fill_cluster(cluster, SliceDistribution(config.workload.distribution),
                                       rng, config.workload.max_failures);
  ExperimentResult r = table(o, config, {"slice", "rack", "shape", "x", "y", "z", "size"});
  for (SliceId id : trace.allocated) {
    const Slice& s = cluster.slice(id);
    r.rows.push_back({id, s.rack, to_string(s.placed_shape), s.anchor.x, s.anchor.y,
                      s.anchor.z, s.size()});
  }
  r.summary = {{"slices", trace.allocated.size()},
               {"attempts", trace.attempts},
               {"allocated_chips", cluster.allocated_chips()},
               {"total_chips", cluster.total_chips()}};
  emit(o, "fill", r, out);
  return kExitOk;
}

int cmd_churn(const Options& o, std::ostream& out) {
  const ExperimentConfig config = load(o);
  ChurnMode mode;
  if (o.churn_by == "slices") {
    mode = ChurnMode::kBySlice;
  } else if (o.churn_by == "chips") {
    mode = ChurnMode::kByFreeChips;
  } else {
    throw UsageError("--by must be slices or chips");
  }
  const double fraction =
      o.churn_fraction > 0.0 ? o.churn_fraction
                             : (mode == ChurnMode::kBySlice ? config.workload.churn_fraction
                                                            : config.workload.free_target);
  Cluster cluster(config.cluster);
  Rng rng = trial_rng(o.seed, 0);
  fill_cluster(cluster, SliceDistribution(config.workload.distribution), rng,
               config.workload.max_failures);
  const auto victims = churn(cluster, fraction, mode, rng);
  ExperimentResult r = table(o, config, {"rack", "T", "S", "I"});
  double max_index = 0.0;
  for (int rack = 0; rack < cluster.rack_count(); ++rack) {
    const Fragmentation f = fragmentation_index(cluster, rack);
    r.rows.push_back({rack, f.free_chips, f.largest_block, f.index});
    max_index = std::max(max_index, f.index);
  }
  r.summary = {{"removed_slices", victims.size()},
               {"live_slices", cluster.slices().size()},
               {"free_chips", cluster.free_chips()},
               {"max_index", max_index}};
  emit(o, "churn", r, out);
  return kExitOk;
}

int cmd_experiment(const Options& o, std::ostream& out) {
  const ExperimentId id = parse_experiment_id(o.experiment);
  const ExperimentResult r = run_experiment(id, load(o), o.seed);
  emit(o, to_string(id), r, out);
  return kExitOk;
}

int cmd_solve(const Options& o, std::ostream& out) {
  std::ifstream in(o.problem_path);
  if (!in) throw UsageError("cannot read problem file '" + o.problem_path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("problem JSON: ") + e.what());
  }
  AssignmentProblem problem;
  try {
    problem = problem_from_json(doc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("problem: ") + e.what());
  }
  const SolveResult result = solve_fragmented(problem);
  nlohmann::json report;
  int code = kExitOk;
  if (const auto* bad = std::get_if<Infeasible>(&result)) {
    report = {{"status", "infeasible"}, {"reason", bad->reason}};
    code = kExitInfeasible;
  } else {
    const auto& solution = std::get<AssignmentSolution>(result);
    const int capacity = problem.graph.edge_count() > 0 ? problem.graph.edge(0).capacity
                                                        : doc.value("capacity", 4);
    const CapacityReport cap = check_capacity(solution, capacity);
    report = to_json(solution, problem);
    report["status"] = cap.ok ? "ok" : "over_capacity";
    report["over_capacity_edges"] = cap.over_capacity;
    if (!cap.ok) code = kExitInfeasible;
  }
  if (o.out_dir.empty()) {
    out << report.dump(2) << '\n';
  } else {
    std::filesystem::create_directories(o.out_dir);
    std::ofstream(std::filesystem::path(o.out_dir) / "solution.json") << report.dump(2) << '\n';
  }
  return code;
}

int cmd_cost(const Options& o, std::ostream& out) {
  const ExperimentConfig config = load(o);
  const Extent3 shape = parse_extent(o.shape);
  const Mode mode = parse_mode(o.mode);
  if (!(o.bytes >= 0.0)) throw UsageError("byte count must be >= 0");
  const double fraction = usable_dims(shape, config.cluster.rack_dims, mode).fraction;
  const CostParams params = CostParams::from_config(config.cluster);
  const int n = shape.volume();

  ExperimentResult r = table(o, config,
                             {"slice", "mode", "collective", "fraction", "alpha_steps",
                              "beta_bytes", "reconfigs", "seconds"});
  auto row = [&](const std::string& collective, const CollectiveCost& c) {
    r.rows.push_back({to_string(shape), to_string(mode), collective, fraction, c.alpha_steps,
                      c.beta_bytes, c.reconfigs, c.total_seconds(params)});
  };
  if (n > 1 && fraction > 0.0) {
    const CollectiveCost rs = ring_reduce_scatter(n, o.bytes, fraction);
    const CollectiveCost ag = ring_all_gather(n, o.bytes, fraction);
    row("reduce_scatter", rs);
    row("all_gather", ag);
    row("all_reduce", rs + ag);
  }
  if (mode.kind == ModeKind::kMorphLux) {
    CollectiveCost setup;
    setup.reconfigs = 1;
    row("setup", setup);
  }
  r.summary = {{"bytes", o.bytes}, {"nodes", n}, {"fraction", fraction}};
  emit(o, "cost", r, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Photonic fabric allocation simulator", "photofab"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "INI or JSON config file");
  app.add_option("--seed", o.seed, "Seed for every random draw");
  app.add_option("--out", o.out_dir, "Directory for output files");
  app.add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", o.threads, "Trial workers (0: one per core)");

  auto* fill = app.add_subcommand("fill", "Fill an empty cluster with sampled slices");
  auto* churn_cmd = app.add_subcommand("churn", "Fill, then deallocate random slices");
  churn_cmd->add_option("--fraction", o.churn_fraction, "Share of slices, or free-chip target");
  churn_cmd->add_option("--by", o.churn_by, "slices or chips");
  auto* experiment = app.add_subcommand("experiment", "Run experiment e1, e2, e3 or e4");
  experiment->add_option("id", o.experiment)->required();
  auto* solve = app.add_subcommand("solve", "Solve a fragmented allocation problem");
  solve->add_option("problem", o.problem_path)->required();
  auto* cost = app.add_subcommand("cost", "Collective cost breakdown for one slice");
  cost->add_option("shape", o.shape)->required();
  cost->add_option("mode", o.mode)->required();
  cost->add_option("bytes", o.bytes)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fill) return cmd_fill(o, out);
    if (*churn_cmd) return cmd_churn(o, out);
    if (*experiment) return cmd_experiment(o, out);
    if (*solve) return cmd_solve(o, out);
    if (*cost) return cmd_cost(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace photofab::cli
