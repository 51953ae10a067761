// Experiment recipe: fabric constants, workload knobs and cost-model inputs,
// loadable from an INI-style file or a JSON document.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "photofab/topology.hpp"

namespace photofab {

struct WeightedShape {
  Extent3 shape;
  double probability = 0.0;
};

struct WorkloadConfig {
  // Defaults to equal weight on 2x2x1, 2x2x2, 2x2x4 and 2x4x4.
  std::vector<WeightedShape> distribution;
  int trials = 16;
  int max_failures = 50;
  double churn_fraction = 0.2;  // E1, by slice count
  double free_target = 0.3;     // E3, by free chips
  bool shuffle_fill = true;     // E3 fill order: shuffled or largest first
  int e4_trial = 0;             // which seeded fill E4 measures

  WorkloadConfig();
};

struct CostConfig {
  double grad_bytes = 2.4e9;
  double compute_share = 0.25;  // compute / baseline iteration time
};

struct ExperimentConfig {
  ClusterConfig cluster;
  WorkloadConfig workload;
  CostConfig cost;
  int threads = 0;  // 0: one per hardware thread

  // Throws ConfigError.
  void validate() const;
};

// "2x2x1:0.25, 2x2x2:0.75". Throws ConfigError.
std::vector<WeightedShape> parse_distribution(const std::string& text);
std::string to_string(const std::vector<WeightedShape>& distribution);

// Reads `path` as JSON when it ends in .json, INI otherwise. Unknown keys are
// rejected. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_ini_config(const std::string& text);
ExperimentConfig config_from_json(const nlohmann::json& doc);

// Sectioned echo of every field, suitable for config_from_json.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace photofab
