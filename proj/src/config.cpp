#include "photofab/config.hpp"

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace photofab {

WorkloadConfig::WorkloadConfig()
    : distribution{{{2, 2, 1}, 0.25}, {{2, 2, 2}, 0.25}, {{2, 2, 4}, 0.25}, {{2, 4, 4}, 0.25}} {}

void ExperimentConfig::validate() const {
  cluster.validate();
  if (workload.distribution.empty()) throw ConfigError("distribution is empty");
  double total = 0.0;
  for (const auto& [shape, p] : workload.distribution) {
    if (!(p >= 0.0)) throw ConfigError("distribution weights must be >= 0");
    std::array<int, 3> s{shape.x, shape.y, shape.z};
    std::array<int, 3> r{cluster.rack_dims.x, cluster.rack_dims.y, cluster.rack_dims.z};
    std::sort(s.begin(), s.end());
    std::sort(r.begin(), r.end());
    if (s[0] > r[0] || s[1] > r[1] || s[2] > r[2]) {
      throw ConfigError("shape " + to_string(shape) + " fits no rack orientation");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ConfigError(fmt::format("distribution weights sum to {}, not 1", total));
  }
  if (workload.trials < 1) throw ConfigError("trials must be >= 1");
  if (workload.max_failures < 1) throw ConfigError("max_failures must be >= 1");
  if (!(workload.churn_fraction > 0.0 && workload.churn_fraction <= 1.0)) {
    throw ConfigError("churn_fraction must lie in (0, 1]");
  }
  if (!(workload.free_target > 0.0 && workload.free_target <= 1.0)) {
    throw ConfigError("free_target must lie in (0, 1]");
  }
  if (workload.e4_trial < 0) throw ConfigError("e4_trial must be >= 0");
  if (!(cost.grad_bytes >= 0.0)) throw ConfigError("grad_bytes must be >= 0");
  if (!(cost.compute_share >= 0.0 && cost.compute_share < 1.0)) {
    throw ConfigError("compute_share must lie in [0, 1)");
  }
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::vector<WeightedShape> parse_distribution(const std::string& text) {
  std::vector<WeightedShape> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, last - first + 1);
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("distribution entry '" + item + "' needs shape:weight");
    }
    WeightedShape w;
    w.shape = parse_extent(item.substr(0, colon));
    const std::string weight = item.substr(colon + 1);
    auto [p, ec] = std::from_chars(weight.data(), weight.data() + weight.size(),
                                   w.probability);
    if (ec != std::errc{} || p != weight.data() + weight.size()) {
      throw ConfigError("bad weight in distribution entry '" + item + "'");
    }
    out.push_back(w);
  }
  if (out.empty()) throw ConfigError("distribution is empty");
  return out;
}

std::string to_string(const std::vector<WeightedShape>& distribution) {
  std::string out;
  for (const auto& [shape, p] : distribution) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{}:{}", to_string(shape), p);
  }
  return out;
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  long long value = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || p != v.data() + v.size() || value < INT32_MIN ||
      value > INT32_MAX) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return static_cast<int>(value);
}

double to_double(const std::string& key, const std::string& v) {
  double value = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return value;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto int_field = [&t](const std::string& key, auto member) {
      t[key] = [key, member](ExperimentConfig& c, const std::string& v) {
        member(c) = to_int(key, v);
      };
    };
    auto double_field = [&t](const std::string& key, auto member) {
      t[key] = [key, member](ExperimentConfig& c, const std::string& v) {
        member(c) = to_double(key, v);
      };
    };
    int_field("cluster.racks_count", [](ExperimentConfig& c) -> int& { return c.cluster.racks_count; });
    t["cluster.rack_dims"] = [](ExperimentConfig& c, const std::string& v) {
      c.cluster.rack_dims = parse_extent(v);
    };
    t["cluster.server_dims"] = [](ExperimentConfig& c, const std::string& v) {
      c.cluster.server_dims = parse_extent(v);
    };
    int_field("cluster.ports_per_tpu", [](ExperimentConfig& c) -> int& { return c.cluster.ports_per_tpu; });
    int_field("cluster.fibers_per_adjacent_server_pair",
              [](ExperimentConfig& c) -> int& { return c.cluster.fibers_per_adjacent_server_pair; });
    int_field("cluster.circuit_fiber_units",
              [](ExperimentConfig& c) -> int& { return c.cluster.circuit_fiber_units; });
    int_field("cluster.paths_k", [](ExperimentConfig& c) -> int& { return c.cluster.paths_k; });
    double_field("cluster.link_bandwidth", [](ExperimentConfig& c) -> double& { return c.cluster.link_bandwidth; });
    double_field("cluster.alpha", [](ExperimentConfig& c) -> double& { return c.cluster.alpha; });
    double_field("cluster.reconfig_delay", [](ExperimentConfig& c) -> double& { return c.cluster.reconfig_delay; });
    double_field("cluster.loss_per_crossing",
                 [](ExperimentConfig& c) -> double& { return c.cluster.loss_per_crossing; });
    double_field("cluster.waveguide_loss", [](ExperimentConfig& c) -> double& { return c.cluster.waveguide_loss; });
    double_field("cluster.loss_budget", [](ExperimentConfig& c) -> double& { return c.cluster.loss_budget; });
    double_field("cluster.hop_length_cm", [](ExperimentConfig& c) -> double& { return c.cluster.hop_length_cm; });
    t["cluster.placement"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "chip") {
        c.cluster.placement = Placement::kChip;
      } else if (v == "server") {
        c.cluster.placement = Placement::kServer;
      } else {
        throw ConfigError("cluster.placement must be chip or server");
      }
    };
    t["workload.distribution"] = [](ExperimentConfig& c, const std::string& v) {
      c.workload.distribution = parse_distribution(v);
    };
    int_field("workload.trials", [](ExperimentConfig& c) -> int& { return c.workload.trials; });
    int_field("workload.max_failures", [](ExperimentConfig& c) -> int& { return c.workload.max_failures; });
    double_field("workload.churn_fraction", [](ExperimentConfig& c) -> double& { return c.workload.churn_fraction; });
    double_field("workload.free_target", [](ExperimentConfig& c) -> double& { return c.workload.free_target; });
    t["workload.fill_order"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "shuffled") {
        c.workload.shuffle_fill = true;
      } else if (v == "largest_first") {
        c.workload.shuffle_fill = false;
      } else {
        throw ConfigError("workload.fill_order must be shuffled or largest_first");
      }
    };
    int_field("workload.e4_trial", [](ExperimentConfig& c) -> int& { return c.workload.e4_trial; });
    double_field("cost.grad_bytes", [](ExperimentConfig& c) -> double& { return c.cost.grad_bytes; });
    double_field("cost.compute_share", [](ExperimentConfig& c) -> double& { return c.cost.compute_share; });
    int_field("run.threads", [](ExperimentConfig& c) -> int& { return c.threads; });
    return t;
  }();
  return table;
}

ExperimentConfig apply(const std::map<std::string, std::string>& values) {
  ExperimentConfig config;
  for (const auto& [key, value] : values) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(config, value);
  }
  config.validate();
  return config;
}

}  // namespace

ExperimentConfig parse_ini_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("key '" + section + "' must sit inside a [section]");
    }
    for (const auto& [key, leaf] : body) values[section + "." + key] = leaf.data();
  }
  return apply(values);
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config JSON must be an object");
  std::map<std::string, std::string> values;
  auto scalar = [](const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    throw ConfigError("config value for '" + key + "' must be a scalar");
  };
  for (const auto& [section, body] : doc.items()) {
    if (body.is_object()) {
      for (const auto& [key, v] : body.items()) {
        values[section + "." + key] = scalar(key, v);
      }
    } else {
      values[section] = scalar(section, body);
    }
  }
  return apply(values);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    try {
      return config_from_json(nlohmann::json::parse(buffer.str()));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config JSON: ") + e.what());
    }
  }
  return parse_ini_config(buffer.str());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  const ClusterConfig& k = c.cluster;
  return {
      {"cluster",
       {{"racks_count", k.racks_count},
        {"rack_dims", to_string(k.rack_dims)},
        {"server_dims", to_string(k.server_dims)},
        {"ports_per_tpu", k.ports_per_tpu},
        {"fibers_per_adjacent_server_pair", k.fibers_per_adjacent_server_pair},
        {"circuit_fiber_units", k.circuit_fiber_units},
        {"paths_k", k.paths_k},
        {"link_bandwidth", k.link_bandwidth},
        {"alpha", k.alpha},
        {"reconfig_delay", k.reconfig_delay},
        {"loss_per_crossing", k.loss_per_crossing},
        {"waveguide_loss", k.waveguide_loss},
        {"loss_budget", k.loss_budget},
        {"hop_length_cm", k.hop_length_cm},
        {"placement", k.placement == Placement::kServer ? "server" : "chip"}}},
      {"workload",
       {{"distribution", to_string(c.workload.distribution)},
        {"trials", c.workload.trials},
        {"max_failures", c.workload.max_failures},
        {"churn_fraction", c.workload.churn_fraction},
        {"free_target", c.workload.free_target},
        {"fill_order", c.workload.shuffle_fill ? "shuffled" : "largest_first"},
        {"e4_trial", c.workload.e4_trial}}},
      {"cost", {{"grad_bytes", c.cost.grad_bytes}, {"compute_share", c.cost.compute_share}}},
      {"run", {{"threads", c.threads}}},
  };
}

}  // namespace photofab
