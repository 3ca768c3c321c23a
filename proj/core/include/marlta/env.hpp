#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marlta/network.hpp"
#include "marlta/tntp.hpp"

namespace marlta {

enum class DemandMode { kFixed, kVariable };

std::string to_string(DemandMode mode);
DemandMode demand_mode_from_string(const std::string& text);

struct EnvConfig {
  int steps_per_episode = 50;
  double prune_threshold = 1e-4;
  bool prune = true;
  CostMode mode = CostMode::kUserEquilibrium;
  DemandMode demand_mode = DemandMode::kFixed;
  double beta_low = 0.5;
  double beta_high = 1.0;
  bool use_coords = true;

  // Throws ConfigError.
  void validate() const;
};

// Observation layout, per agent:
//   [0, 5)    origin x, y, destination x, y, default demand
//   [5, 41)   route slot one-hot, 6 x 6
//   [41, 59)  per slot free-flow time, link count, mean link degree
//   [59, 95)  per slot cost, cost change, BPR time, mean v/c, congested links,
//             previous share
//   [95, 101) route mask
inline constexpr int kStaticFeatures = 5 + kMaxRoutes * kMaxRoutes + 3 * kMaxRoutes;
inline constexpr int kDynamicPerRoute = 6;
inline constexpr int kObsDim = kStaticFeatures + kDynamicPerRoute * kMaxRoutes + kMaxRoutes;

struct EnvState {
  FlowState current;
  FlowState previous;
  int t = 0;
  DemandMatrix demand;
  JointAction prev_action;        // last pruned joint action
  std::vector<double> local_gaps; // at `current`
  double global_gap = 0.0;        // at `current`
};

struct StepInfo {
  double global_gap = 0.0;
};

struct StepResult {
  std::vector<double> rewards;
  bool done = false;
  StepInfo info;
};

// Each demand multiplied by an independent U(low, high) draw.
DemandMatrix scale_demand(const DemandMatrix& dm, double low, double high, std::mt19937_64& rng);

// Zero components below tau and renormalize. When every component is below
// tau the largest (lowest index on ties) becomes 1.
std::vector<double> prune_action(std::span<const double> a, double tau);

// -curr at t == 1, prev - curr afterwards.
std::vector<double> compute_rewards(std::span<const double> prev_gaps,
                                    std::span<const double> curr_gaps, int t);

// One OD-router environment. Holds references to the network data, which
// must outlive it. Const methods only, so one instance can serve many
// episode states.
class Environment {
 public:
  Environment(const Network& net, const RouteSet& rs, const DemandMatrix& default_demand,
              const NodeCoords* coords, EnvConfig cfg);

  const EnvConfig& config() const noexcept { return cfg_; }
  const Network& network() const noexcept { return *net_; }
  const RouteSet& routes() const noexcept { return *rs_; }
  const DemandMatrix& default_demand() const noexcept { return *dm_; }
  std::size_t agent_count() const noexcept { return dm_->size(); }

  // Draws episode demand per the demand mode, loads the uniform action.
  EnvState reset(std::mt19937_64& rng) const;
  // Reset with an explicit episode demand.
  EnvState reset_with_demand(const DemandMatrix& demand) const;

  // Prunes (when enabled), loads, rewards, advances t. Throws
  // ContractViolation on a shape mismatch or when the episode is over.
  StepResult step(EnvState& state, const JointAction& joint) const;

  std::vector<double> observe(std::size_t agent, const EnvState& state) const;
  // Row-major agent_count x kObsDim.
  std::vector<double> observe_all(const EnvState& state) const;

  // Per-route free-flow time of an agent (normalization base is the min).
  double free_flow_base(std::size_t agent) const { return ff_base_[agent]; }

 private:
  void fill_dynamic(std::size_t agent, const EnvState& state, double* out) const;

  const Network* net_;
  const RouteSet* rs_;
  const DemandMatrix* dm_;
  EnvConfig cfg_;
  std::vector<double> static_;  // agent_count x kStaticFeatures
  std::vector<double> ff_base_;
  double max_route_len_ = 1.0;
};

// `episode,step,global_gap,mean_reward` rows.
struct EpisodeLog {
  struct Row {
    int episode = 0;
    int step = 0;
    double global_gap = 0.0;
    double mean_reward = 0.0;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
};

}  // namespace marlta
