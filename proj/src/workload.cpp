#include "photofab/workload.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "photofab/alloc_contiguous.hpp"
#include "photofab/control_plane.hpp"
#include "photofab/cost_model.hpp"
#include "photofab/frag_alloc.hpp"

namespace photofab {

Rng trial_rng(std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  return Rng(seq);
}

SliceDistribution::SliceDistribution(std::vector<WeightedShape> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("distribution is empty");
  double total = 0.0;
  for (const auto& e : entries_) {
    if (!(e.probability >= 0.0)) throw ConfigError("distribution weights must be >= 0");
    total += e.probability;
    weights_.push_back(e.probability);
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ConfigError(fmt::format("distribution weights sum to {}, not 1", total));
  }
}

Extent3 SliceDistribution::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  return entries_[pick(rng)].shape;
}

int SliceDistribution::min_volume() const {
  int v = entries_.front().shape.volume();
  for (const auto& e : entries_) {
    if (e.probability > 0.0) v = std::min(v, e.shape.volume());
  }
  return v;
}

FillTrace fill_cluster(Cluster& cluster, const SliceDistribution& dist, Rng& rng,
                       int max_failures, Mode mode) {
  FillTrace trace;
  int failures = 0;
  while (failures < max_failures && cluster.free_chips() >= dist.min_volume()) {
    ++trace.attempts;
    const SliceRequest request{dist.sample(rng), mode};
    if (auto id = allocate_contiguous(cluster, request)) {
      trace.allocated.push_back(*id);
      failures = 0;
    } else {
      ++failures;
    }
  }
  return trace;
}

std::vector<SliceId> churn(Cluster& cluster, double fraction, ChurnMode mode, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("churn fraction must lie in (0, 1]");
  }
  std::vector<SliceId> live;
  for (const auto& [id, s] : cluster.slices()) live.push_back(id);
  std::shuffle(live.begin(), live.end(), rng);

  std::vector<SliceId> victims;
  if (mode == ChurnMode::kBySlice) {
    const auto count = static_cast<std::size_t>(std::llround(fraction * live.size()));
    for (std::size_t i = 0; i < count; ++i) {
      cluster.release(live[i]);
      victims.push_back(live[i]);
    }
    return victims;
  }
  const double target = fraction * cluster.total_chips();
  for (SliceId id : live) {
    if (cluster.free_chips() >= target) break;
    cluster.release(id);
    victims.push_back(id);
  }
  return victims;
}

ExperimentId parse_experiment_id(const std::string& raw) {
  std::string text = raw;
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (text == "e1") return ExperimentId::kE1;
  if (text == "e2") return ExperimentId::kE2;
  if (text == "e3") return ExperimentId::kE3;
  if (text == "e4") return ExperimentId::kE4;
  throw ConfigError("unknown experiment '" + raw + "'");
}

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::kE1:
      return "e1";
    case ExperimentId::kE2:
      return "e2";
    case ExperimentId::kE3:
      return "e3";
    case ExperimentId::kE4:
      return "e4";
  }
  return "?";
}

void for_each_trial(int trials, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, trials);
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int t = next++; t < trials; t = next++) {
        try {
          fn(t);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

Cluster filled_cluster(const ExperimentConfig& config, Rng& rng) {
  Cluster cluster(config.cluster);
  fill_cluster(cluster, SliceDistribution(config.workload.distribution), rng,
               config.workload.max_failures);
  return cluster;
}

const std::vector<Mode>& e2_modes() {
  static const std::vector<Mode> modes{Mode::baseline(), Mode::morphlux(), Mode::ici(0.7),
                                       Mode::ici(0.5), Mode::ici(0.25)};
  return modes;
}

}  // namespace

std::vector<E1Row> run_e1(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const int racks = config.cluster.racks_count;
  std::vector<E1Row> rows(static_cast<std::size_t>(config.workload.trials * racks));
  for_each_trial(config.workload.trials, config.threads, [&](int trial) {
    Rng rng = trial_rng(seed, trial);
    Cluster cluster = filled_cluster(config, rng);
    churn(cluster, config.workload.churn_fraction, ChurnMode::kBySlice, rng);
    for (int rack = 0; rack < racks; ++rack) {
      const Fragmentation f = fragmentation_index(cluster, rack);
      rows[trial * racks + rack] = {trial, rack, f.free_chips, f.largest_block, f.index};
    }
  });
  return rows;
}

std::vector<E2Row> run_e2(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const int racks = config.cluster.racks_count;
  const auto& modes = e2_modes();
  const int per_trial = racks * static_cast<int>(modes.size());
  const int m = config.cluster.ports_per_tpu;
  std::vector<E2Row> rows(static_cast<std::size_t>(config.workload.trials * per_trial));
  for_each_trial(config.workload.trials, config.threads, [&](int trial) {
    Rng rng = trial_rng(seed, trial);
    const Cluster cluster = filled_cluster(config, rng);
    std::vector<std::vector<const Slice*>> by_rack(static_cast<std::size_t>(racks));
    for (const auto& [id, s] : cluster.slices()) by_rack[s.rack].push_back(&s);
    for (int rack = 0; rack < racks; ++rack) {
      for (std::size_t k = 0; k < modes.size(); ++k) {
        E2Row row{trial, rack, to_string(modes[k])};
        double weighted = 0.0;
        long long chips = 0;
        for (const Slice* s : by_rack[rack]) {
          const double util =
              port_utilization(s->placed_shape, config.cluster.rack_dims, modes[k], m);
          row.ports_used += std::llround(util * m * s->size());
          weighted += s->size() *
                      usable_dims(s->placed_shape, config.cluster.rack_dims, modes[k]).fraction;
          chips += s->size();
        }
        row.ports_total = chips * m;
        row.bw_fraction = chips > 0 ? weighted / chips : 0.0;
        rows[trial * per_trial + rack * static_cast<int>(modes.size()) + k] = row;
      }
    }
  });
  return rows;
}

namespace {

struct E3Stream {
  std::string name;
  std::vector<Extent3> shapes;  // drawn uniformly
};

std::vector<E3Stream> e3_streams(const std::vector<Extent3>& by_size) {
  const Extent3& largest = by_size.back();
  std::vector<E3Stream> out{{std::to_string(largest.volume()), {largest}}};
  if (by_size.size() >= 2) {
    const Extent3& second = by_size[by_size.size() - 2];
    out.push_back({fmt::format("{},{}", second.volume(), largest.volume()), {second, largest}});
  }
  return out;
}

std::vector<Extent3> stream_requests(const E3Stream& stream, int free_chips, Rng& rng) {
  std::vector<Extent3> out;
  if (stream.shapes.size() == 1) {
    const int n = free_chips / stream.shapes.front().volume();
    out.assign(static_cast<std::size_t>(n), stream.shapes.front());
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, stream.shapes.size() - 1);
  int total = 0;
  while (total <= free_chips) {
    out.push_back(stream.shapes[pick(rng)]);
    total += out.back().volume();
  }
  return out;
}

E3ModeOutcome outcome(const std::string& name, std::size_t requests) {
  E3ModeOutcome out;
  out.mode = name;
  out.requests = static_cast<int>(requests);
  return out;
}

E3ModeOutcome run_contiguous(Cluster cluster, const std::vector<Extent3>& requests,
                             const std::string& name, Mode mode) {
  E3ModeOutcome out = outcome(name, requests.size());
  for (const Extent3& shape : requests) {
    const bool ok = allocate_contiguous(cluster, {shape, mode}).has_value();
    out.success.push_back(ok);
    out.successes += ok;
  }
  return out;
}

E3ModeOutcome run_ideal(const Cluster& cluster, const std::vector<Extent3>& requests) {
  E3ModeOutcome out = outcome("ideal", requests.size());
  std::vector<int> free(static_cast<std::size_t>(cluster.rack_count()));
  for (int r = 0; r < cluster.rack_count(); ++r) free[r] = cluster.free_chips(r);
  for (const Extent3& shape : requests) {
    const auto it = std::find_if(free.begin(), free.end(),
                                 [&](int f) { return f >= shape.volume(); });
    const bool ok = it != free.end();
    if (ok) *it -= shape.volume();
    out.success.push_back(ok);
    out.successes += ok;
  }
  return out;
}

E3ModeOutcome run_morphlux(Cluster cluster, const std::vector<Extent3>& requests,
                           std::vector<E3Solve>& solves) {
  E3ModeOutcome out = outcome("morphlux", requests.size());
  for (const Extent3& shape : requests) {
    const SliceRequest request{shape, Mode::morphlux()};
    bool ok = false;
    bool fragmented = false;
    for (int rack = 0; rack < cluster.rack_count() && !ok; ++rack) {
      if (cluster.free_chips(rack) < shape.volume()) continue;
      if (allocate_contiguous_in_rack(cluster, request, rack)) {
        ok = true;
        break;
      }
      const int free_servers = static_cast<int>(cluster.free_servers(rack).size());
      const auto start = std::chrono::steady_clock::now();
      auto placed = allocate_fragmented_in_rack(cluster, request, rack);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!placed) continue;
      E3Solve solve{seconds, static_cast<int>(placed->solution.mapping.size()), free_servers,
                    placed->solution.z, false};
      const RealizeResult realized = realize_slice(cluster, placed->id);
      if (std::holds_alternative<Rejection>(realized)) {
        cluster.release(placed->id);
      } else {
        solve.accepted = true;
        ok = true;
        fragmented = true;
      }
      solves.push_back(solve);
    }
    out.success.push_back(ok);
    out.successes += ok;
    out.frag_successes += fragmented;
  }
  return out;
}

}  // namespace

std::vector<E3Trial> run_e3(const ExperimentConfig& base, std::uint64_t seed) {
  ExperimentConfig config = base;
  config.cluster.placement = Placement::kServer;
  config.validate();

  std::vector<Extent3> by_size;
  for (const auto& w : config.workload.distribution) by_size.push_back(w.shape);
  std::stable_sort(by_size.begin(), by_size.end(), [](const Extent3& a, const Extent3& b) {
    return a.volume() < b.volume();
  });
  const std::vector<E3Stream> streams = e3_streams(by_size);

  std::vector<E3Trial> trials(static_cast<std::size_t>(config.workload.trials * streams.size()));
  for_each_trial(config.workload.trials, config.threads, [&](int trial) {
    Rng rng = trial_rng(seed, trial);
    Cluster cluster(config.cluster);
    // Even chip share per shape, placed in shuffled or largest-first order.
    std::vector<Extent3> fill;
    const int share = cluster.total_chips() / static_cast<int>(by_size.size());
    for (const Extent3& shape : by_size) {
      for (int i = 0; i < share / shape.volume(); ++i) fill.push_back(shape);
    }
    if (config.workload.shuffle_fill) {
      std::shuffle(fill.begin(), fill.end(), rng);
    } else {
      std::reverse(fill.begin(), fill.end());
    }
    for (const Extent3& shape : fill) allocate_contiguous(cluster, {shape, Mode::baseline()});
    churn(cluster, config.workload.free_target, ChurnMode::kByFreeChips, rng);

    for (std::size_t s = 0; s < streams.size(); ++s) {
      E3Trial& t = trials[trial * streams.size() + s];
      t.trial = trial;
      t.stream = streams[s].name;
      t.free_chips = cluster.free_chips();
      const std::vector<Extent3> requests = stream_requests(streams[s], t.free_chips, rng);
      for (const Extent3& r : requests) t.request_sizes.push_back(r.volume());
      t.modes.push_back(run_contiguous(cluster, requests, "baseline", Mode::baseline()));
      t.modes.push_back(run_contiguous(cluster, requests, "sipac", Mode::morphlux()));
      t.modes.push_back(run_morphlux(cluster, requests, t.solves));
      t.modes.push_back(run_ideal(cluster, requests));
    }
  });
  return trials;
}

std::vector<E4Row> run_e4(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = trial_rng(seed, config.workload.e4_trial);
  const Cluster cluster = filled_cluster(config, rng);
  const CostParams params = CostParams::from_config(config.cluster);
  const Extent3& rack = config.cluster.rack_dims;
  const double share = config.cost.compute_share;

  std::vector<E4Row> rows;
  for (const auto& [id, s] : cluster.slices()) {
    const IterTime base =
        train_iter_time(config.cost.grad_bytes, 0.0, s.placed_shape, rack, Mode::baseline(), params);
    const double compute = share / (1.0 - share) * base.comm_seconds;
    const double base_seconds = compute + base.comm_seconds;
    for (const Mode& mode : e2_modes()) {
      const IterTime t =
          train_iter_time(config.cost.grad_bytes, compute, s.placed_shape, rack, mode, params);
      rows.push_back({id, s.rack, s.size(), s.placed_shape, to_string(mode), t.seconds,
                      t.seconds > 0.0 ? base_seconds / t.seconds : 1.0});
    }
  }
  return rows;
}

namespace {

nlohmann::json e1_summary(const std::vector<E1Row>& rows) {
  double max_index = 0.0;
  double sum = 0.0;
  std::map<int, double> per_trial_max;
  std::vector<int> histogram(10, 0);
  for (const E1Row& r : rows) {
    max_index = std::max(max_index, r.index);
    sum += r.index;
    per_trial_max[r.trial] = std::max(per_trial_max[r.trial], r.index);
    ++histogram[std::min(9, static_cast<int>(r.index * 10))];
  }
  nlohmann::json trial_max = nlohmann::json::array();
  for (const auto& [t, v] : per_trial_max) trial_max.push_back(v);
  return {{"racks", rows.size()},
          {"max_index", max_index},
          {"mean_index", rows.empty() ? 0.0 : sum / rows.size()},
          {"per_trial_max", trial_max},
          {"histogram_deciles", histogram}};
}

nlohmann::json e2_summary(const std::vector<E2Row>& rows) {
  struct Acc {
    long long used = 0;
    long long total = 0;
    double min_util = 1.0;
    double max_util = 0.0;
    double bw = 0.0;
    int racks = 0;
  };
  std::map<std::string, Acc> acc;
  for (const E2Row& r : rows) {
    if (r.ports_total == 0) continue;
    Acc& a = acc[r.mode];
    const double util = static_cast<double>(r.ports_used) / r.ports_total;
    a.used += r.ports_used;
    a.total += r.ports_total;
    a.min_util = std::min(a.min_util, util);
    a.max_util = std::max(a.max_util, util);
    a.bw += r.bw_fraction;
    ++a.racks;
  }
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [mode, a] : acc) {
    out[mode] = {{"utilization", static_cast<double>(a.used) / a.total},
                 {"min_rack_utilization", a.min_util},
                 {"max_rack_utilization", a.max_util},
                 {"mean_bw_fraction", a.bw / a.racks}};
  }
  return out;
}

nlohmann::json e3_summary(const std::vector<E3Trial>& trials) {
  std::map<std::string, std::map<std::string, std::pair<long long, long long>>> totals;
  int solves = 0;
  int rejected = 0;
  int max_z = 0;
  int morphlux_equals_ideal = 0;
  for (const E3Trial& t : trials) {
    for (const auto& m : t.modes) {
      auto& [req, ok] = totals[t.stream][m.mode];
      req += m.requests;
      ok += m.successes;
    }
    const auto find = [&](const std::string& name) {
      return std::find_if(t.modes.begin(), t.modes.end(),
                          [&](const E3ModeOutcome& m) { return m.mode == name; });
    };
    morphlux_equals_ideal += find("morphlux")->success == find("ideal")->success;
    for (const E3Solve& s : t.solves) {
      ++solves;
      rejected += !s.accepted;
      max_z = std::max(max_z, s.z);
    }
  }
  nlohmann::json streams = nlohmann::json::object();
  for (const auto& [stream, modes] : totals) {
    for (const auto& [mode, counts] : modes) {
      streams[stream][mode] = {
          {"requests", counts.first},
          {"successes", counts.second},
          {"success_fraction",
           counts.first > 0 ? static_cast<double>(counts.second) / counts.first : 0.0}};
    }
  }
  return {{"streams", streams},
          {"fragmented_solves", solves},
          {"over_capacity_rejections", rejected},
          {"max_z", max_z},
          {"trials_morphlux_equals_ideal", morphlux_equals_ideal},
          {"trial_streams", trials.size()}};
}

nlohmann::json e4_summary(const std::vector<E4Row>& rows, const ExperimentConfig& config) {
  // Samples per second summed per rack, one sample batch = 2 per chip.
  std::map<std::string, std::map<int, double>> rack_throughput;
  std::map<std::string, std::map<int, std::pair<double, int>>> speedup_by_size;
  for (const E4Row& r : rows) {
    rack_throughput[r.mode][r.rack] += 2.0 * r.size / r.iter_seconds;
    auto& [sum, n] = speedup_by_size[r.mode][r.size];
    sum += r.speedup_vs_baseline;
    ++n;
  }
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [mode, racks] : rack_throughput) {
    double total = 0.0;
    for (const auto& [rack, v] : racks) total += v;
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [size, acc] : speedup_by_size[mode]) {
      sizes[std::to_string(size)] = acc.first / acc.second;
    }
    out[mode] = {{"mean_rack_throughput", total / racks.size()},
                 {"total_throughput", total},
                 {"mean_speedup_by_size", sizes}};
  }
  out["morphlux_setup_seconds"] = config.cluster.reconfig_delay;
  return out;
}

}  // namespace

ExperimentResult run_experiment(ExperimentId id, const ExperimentConfig& config,
                                std::uint64_t seed) {
  ExperimentResult result;
  result.id = id;
  result.seed = seed;
  result.config = to_json(config);
  auto& rows = result.rows;
  switch (id) {
    case ExperimentId::kE1: {
      const auto data = run_e1(config, seed);
      result.columns = {"trial", "rack", "T", "S", "I"};
      for (const E1Row& r : data) {
        rows.push_back({r.trial, r.rack, r.free_chips, r.largest_block, r.index});
      }
      result.summary = e1_summary(data);
      break;
    }
    case ExperimentId::kE2: {
      const auto data = run_e2(config, seed);
      result.columns = {"trial", "rack", "mode", "ports_used", "ports_total", "bw_fraction"};
      for (const E2Row& r : data) {
        rows.push_back({r.trial, r.rack, r.mode, r.ports_used, r.ports_total, r.bw_fraction});
      }
      result.summary = e2_summary(data);
      break;
    }
    case ExperimentId::kE3: {
      const auto data = run_e3(config, seed);
      result.columns = {"trial", "stream", "mode", "requests", "successes", "frag_successes"};
      for (const E3Trial& t : data) {
        for (const E3ModeOutcome& m : t.modes) {
          rows.push_back({t.trial, t.stream, m.mode, m.requests, m.successes, m.frag_successes});
        }
      }
      result.summary = e3_summary(data);
      break;
    }
    case ExperimentId::kE4: {
      const auto data = run_e4(config, seed);
      result.columns = {"slice", "size", "mode", "iter_seconds", "speedup_vs_baseline"};
      for (const E4Row& r : data) {
        rows.push_back({r.slice, r.size, r.mode, r.iter_seconds, r.speedup_vs_baseline});
      }
      result.summary = e4_summary(data, config);
      break;
    }
  }
  return result;
}

void write_csv(std::ostream& out, const ExperimentResult& result) {
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    out << (i ? "," : "") << result.columns[i];
  }
  out << '\n';
  for (const auto& row : result.rows) {
    bool first = true;
    for (const auto& cell : row) {
      if (!first) out << ',';
      first = false;
      if (cell.is_string()) {
        const std::string s = cell.get<std::string>();
        // Stream names such as "16,32" hold a comma.
        if (s.find(',') != std::string::npos) {
          out << '"' << s << '"';
        } else {
          out << s;
        }
      } else {
        out << cell.dump();
      }
    }
    out << '\n';
  }
}

nlohmann::json to_json(const ExperimentResult& result, bool with_rows) {
  nlohmann::json doc{{"experiment", to_string(result.id)},
                     {"seed", result.seed},
                     {"config", result.config},
                     {"columns", result.columns},
                     {"summary", result.summary}};
  if (with_rows) doc["rows"] = result.rows;
  return doc;
}

}  // namespace photofab
