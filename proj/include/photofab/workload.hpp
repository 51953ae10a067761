// Slice-size sampling, fill and churn protocols, and the four experiment
// drivers (fragmentation, port usage, fragmented allocation, throughput).

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "photofab/cluster.hpp"
#include "photofab/config.hpp"

namespace photofab {

using Rng = std::mt19937_64;

// Independent generator for one trial of a seeded run.
Rng trial_rng(std::uint64_t seed, int trial);

class SliceDistribution {
 public:
  // Throws ConfigError unless weights are non-negative and sum to 1.
  explicit SliceDistribution(std::vector<WeightedShape> entries);

  Extent3 sample(Rng& rng) const;
  const std::vector<WeightedShape>& entries() const { return entries_; }
  int min_volume() const;

 private:
  std::vector<WeightedShape> entries_;
  std::vector<double> weights_;
};

struct FillTrace {
  std::vector<SliceId> allocated;
  int attempts = 0;
};

// Samples and allocates contiguous slices until `max_failures` consecutive
// attempts fail or no free chip could hold the smallest shape.
FillTrace fill_cluster(Cluster& cluster, const SliceDistribution& dist, Rng& rng,
                       int max_failures = 50, Mode mode = Mode::baseline());

enum class ChurnMode {
  kBySlice,      // remove round(fraction * live slices)
  kByFreeChips,  // remove until free chips >= fraction * total chips
};

// Removes uniformly chosen victims without replacement; returns them in
// removal order. Throws std::invalid_argument unless 0 < fraction <= 1.
std::vector<SliceId> churn(Cluster& cluster, double fraction, ChurnMode mode, Rng& rng);

enum class ExperimentId { kE1, kE2, kE3, kE4 };

// "e1".."e4", case-insensitive. Throws ConfigError.
ExperimentId parse_experiment_id(const std::string& text);
std::string to_string(ExperimentId id);

struct E1Row {
  int trial = 0;
  int rack = 0;
  int free_chips = 0;
  int largest_block = 0;
  double index = 0.0;
};
std::vector<E1Row> run_e1(const ExperimentConfig& config, std::uint64_t seed);

struct E2Row {
  int trial = 0;
  int rack = 0;
  std::string mode;
  long long ports_used = 0;
  long long ports_total = 0;
  double bw_fraction = 0.0;  // chip-weighted usable bandwidth share
};
// Modes per rack: baseline, morphlux, ici0.7, ici0.5, ici0.25.
std::vector<E2Row> run_e2(const ExperimentConfig& config, std::uint64_t seed);

struct E3ModeOutcome {
  std::string mode;  // baseline, sipac, morphlux, ideal
  int requests = 0;
  int successes = 0;
  int frag_successes = 0;
  std::vector<bool> success;  // per request
};

struct E3Solve {
  double seconds = 0.0;
  int slots = 0;
  int free_servers = 0;
  int z = 0;
  bool accepted = false;  // passed the capacity and loss checks
};

struct E3Trial {
  int trial = 0;
  std::string stream;  // "32" or "16,32" for the default shapes
  int free_chips = 0;  // after churn
  std::vector<int> request_sizes;
  std::vector<E3ModeOutcome> modes;
  std::vector<E3Solve> solves;  // morphlux fragmented attempts
};
std::vector<E3Trial> run_e3(const ExperimentConfig& config, std::uint64_t seed);

struct E4Row {
  SliceId slice = 0;
  int rack = 0;
  int size = 0;
  Extent3 shape;
  std::string mode;
  double iter_seconds = 0.0;
  double speedup_vs_baseline = 0.0;
};
std::vector<E4Row> run_e4(const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentResult {
  ExperimentId id = ExperimentId::kE1;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<std::string> columns;
  nlohmann::json rows = nlohmann::json::array();  // array of typed rows
  nlohmann::json summary = nlohmann::json::object();
};

ExperimentResult run_experiment(ExperimentId id, const ExperimentConfig& config,
                                std::uint64_t seed);

void write_csv(std::ostream& out, const ExperimentResult& result);
// Config echo, seed and summary; rows included when `with_rows`.
nlohmann::json to_json(const ExperimentResult& result, bool with_rows);

// Runs fn(trial) for every trial on up to `threads` workers (0: hardware
// concurrency). Exceptions propagate after all workers stop.
void for_each_trial(int trials, int threads, const std::function<void(int)>& fn);

}  // namespace photofab
