#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpamp/independence.hpp"
#include "mpamp/rate_distortion.hpp"
#include "mpamp/rate_scheduler.hpp"
#include "mpamp/state_evolution.hpp"
#include "mpamp/tradeoff.hpp"

namespace mpamp {

struct TargetSetting {
  std::optional<double> delta;     // absolute EMSE
  std::optional<double> delta_db;  // dB above the MMSE
  double resolve(double mmse) const;
};

struct CostSetting {
  std::optional<double> b;
  std::optional<PlatformCost> platform;
  double resolve() const;
};

struct ScheduleSetting {
  std::vector<double> rates;      // bits; 0 skips, "inf" is lossless
  std::size_t lossless_iterations = 0;  // used when rates is empty
};

struct SimulateSetting {
  std::size_t N = 10'000;
  std::size_t trials = 50;
  std::size_t T = 10;
  std::vector<double> gammas;  // explicit bins; empty draws random admissible ones
  double onsager_scale = 1.0;
  bool dump_messages = false;  // first trial's bin indices
};

struct ParetoSetting {
  std::vector<double> b_grid;
  std::vector<double> mse_multiples;  // target MSE as multiples of the MMSE
  std::vector<double> ladder_db;      // corner-point target ladder
};

struct RunConfig {
  SystemConfig system;
  RdOptions rd;
  GridOptions grid;
  SolveOptions solve;
  TargetSetting target;
  CostSetting cost;
  ScheduleSetting schedule;
  SimulateSetting simulate;
  ParetoSetting pareto;
  IndependenceGrid independence = IndependenceGrid::standard();
  std::size_t calibration_cells = 88;
  std::uint64_t seed = 1;

  static RunConfig defaults();
  void validate() const;
};

// Unknown keys are rejected; missing keys take defaults. Throws InvalidArgument.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
// Canonical form: every field explicit, fixed key order.
nlohmann::json to_json(const RunConfig& config);
std::string canonical_dump(const RunConfig& config);
// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace mpamp
