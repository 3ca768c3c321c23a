#include "marlta/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "marlta/equilibrium.hpp"
#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/loading.hpp"

namespace marlta {

std::string to_string(DemandMode mode) {
  return mode == DemandMode::kFixed ? "fixed" : "variable";
}

DemandMode demand_mode_from_string(const std::string& text) {
  if (text == "fixed") return DemandMode::kFixed;
  if (text == "variable") return DemandMode::kVariable;
  throw ConfigError("unknown demand mode '" + text + "' (expected fixed or variable)");
}

void EnvConfig::validate() const {
  if (steps_per_episode < 1) throw ConfigError("steps_per_episode must be at least 1");
  if (!(prune_threshold > 0.0 && prune_threshold < 1.0)) {
    throw ConfigError("prune_threshold must lie in (0, 1)");
  }
  if (demand_mode == DemandMode::kVariable && !(beta_low > 0.0 && beta_low < beta_high)) {
    throw ConfigError("variable demand needs 0 < beta_low < beta_high");
  }
}

DemandMatrix scale_demand(const DemandMatrix& dm, double low, double high, std::mt19937_64& rng) {
  if (!(low > 0.0) || high < low) throw ConfigError("demand scaling needs 0 < low <= high");
  std::vector<double> d(dm.size());
  std::uniform_real_distribution<double> beta(low, high);
  for (std::size_t i = 0; i < dm.size(); ++i) {
    d[i] = low == high ? dm[i].demand * low : dm[i].demand * beta(rng);
  }
  return dm.with_demands(d);
}

std::vector<double> prune_action(std::span<const double> a, double tau) {
  std::vector<double> out(a.begin(), a.end());
  bool changed = false;
  double kept = 0.0;
  for (double& v : out) {
    if (v != 0.0 && v < tau) {
      v = 0.0;
      changed = true;
    }
    kept += v;
  }
  if (!changed) return out;
  if (kept > 0.0) {
    for (double& v : out) v /= kept;
    return out;
  }
  const auto best = std::max_element(a.begin(), a.end()) - a.begin();
  std::fill(out.begin(), out.end(), 0.0);
  out[static_cast<std::size_t>(best)] = 1.0;
  return out;
}

std::vector<double> compute_rewards(std::span<const double> prev_gaps,
                                    std::span<const double> curr_gaps, int t) {
  if (t < 1) throw ContractViolation("rewards are defined from step 1");
  if (t > 1 && prev_gaps.size() != curr_gaps.size()) {
    throw ContractViolation("gap vectors differ in length");
  }
  std::vector<double> r(curr_gaps.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = t == 1 ? -curr_gaps[i] : prev_gaps[i] - curr_gaps[i];
  }
  return r;
}

Environment::Environment(const Network& net, const RouteSet& rs,
                         const DemandMatrix& default_demand, const NodeCoords* coords,
                         EnvConfig cfg)
    : net_(&net), rs_(&rs), dm_(&default_demand), cfg_(cfg) {
  cfg_.validate();
  rs.validate(net, default_demand);
  const std::size_t n = default_demand.size();

  int max_len = 1;
  for (const auto& routes : rs.all()) {
    for (const Route& r : routes) max_len = std::max(max_len, static_cast<int>(r.links.size()));
  }
  max_route_len_ = max_len;
  int max_degree = 1;
  for (int v = 0; v < net.node_count(); ++v) {
    max_degree = std::max(max_degree, static_cast<int>(net.out_links(v).size()));
  }

  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
  if (cfg_.use_coords) {
    if (!coords) throw ConfigError("coordinate features are enabled but no node file was given");
    bool first = true;
    for (int v = 0; v < net.node_count(); ++v) {
      auto it = coords->find(net.original_id(v));
      if (it == coords->end()) continue;
      const Coordinate c = it->second;
      if (first) {
        min_x = max_x = c.x;
        min_y = max_y = c.y;
        first = false;
      }
      min_x = std::min(min_x, c.x);
      max_x = std::max(max_x, c.x);
      min_y = std::min(min_y, c.y);
      max_y = std::max(max_y, c.y);
    }
  }
  auto scaled = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  auto coord_of = [&](int node) {
    auto it = coords->find(net.original_id(node));
    if (it == coords->end()) {
      throw ConfigError("node " + std::to_string(net.original_id(node)) + " has no coordinates");
    }
    return it->second;
  };

  const double mean_demand = default_demand.mean();
  static_.assign(n * kStaticFeatures, 0.0);
  ff_base_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* s = static_.data() + i * kStaticFeatures;
    if (cfg_.use_coords) {
      const Coordinate o = coord_of(default_demand[i].origin);
      const Coordinate d = coord_of(default_demand[i].destination);
      s[0] = scaled(o.x, min_x, max_x);
      s[1] = scaled(o.y, min_y, max_y);
      s[2] = scaled(d.x, min_x, max_x);
      s[3] = scaled(d.y, min_y, max_y);
    }
    s[4] = mean_demand > 0.0 ? default_demand[i].demand / mean_demand : 0.0;

    const auto routes = rs.routes(i);
    double base = std::numeric_limits<double>::infinity();
    std::vector<double> ff(routes.size(), 0.0);
    for (std::size_t r = 0; r < routes.size(); ++r) {
      for (int e : routes[r].links) ff[r] += net.link(e).free_flow_time;
      base = std::min(base, ff[r]);
    }
    ff_base_[i] = base > 0.0 ? base : 1.0;
    for (std::size_t r = 0; r < routes.size(); ++r) {
      s[5 + r * kMaxRoutes + r] = 1.0;
      double degree = 0.0;
      for (int e : routes[r].links) {
        degree += static_cast<double>(net.out_links(net.link(e).head).size());
      }
      const double len = static_cast<double>(routes[r].links.size());
      s[41 + r] = ff[r] / ff_base_[i];
      s[41 + kMaxRoutes + r] = len / max_route_len_;
      s[41 + 2 * kMaxRoutes + r] = degree / len / max_degree;
    }
  }
}

namespace {

FlowState load(const Network& net, const RouteSet& rs, const DemandMatrix& dm,
               const JointAction& act, CostMode mode, std::vector<double>& local_gaps,
               double& global_gap) {
  FlowState fs = load_network(net, rs, dm, act, mode);
  const GapReport gr = gap_report(fs, dm);
  local_gaps = gr.local_gaps;
  global_gap = gr.global_gap;
  return fs;
}

}  // namespace

EnvState Environment::reset(std::mt19937_64& rng) const {
  if (cfg_.demand_mode == DemandMode::kFixed) return reset_with_demand(*dm_);
  return reset_with_demand(scale_demand(*dm_, cfg_.beta_low, cfg_.beta_high, rng));
}

EnvState Environment::reset_with_demand(const DemandMatrix& demand) const {
  if (demand.size() != dm_->size()) {
    throw ContractViolation("episode demand has a different number of OD pairs");
  }
  for (std::size_t i = 0; i < demand.size(); ++i) {
    if (demand[i].origin != (*dm_)[i].origin || demand[i].destination != (*dm_)[i].destination) {
      throw ContractViolation("episode demand reorders OD pairs");
    }
  }
  EnvState s;
  s.demand = demand;
  s.prev_action = uniform_action(*rs_);
  s.current = load(*net_, *rs_, s.demand, s.prev_action, cfg_.mode, s.local_gaps, s.global_gap);
  s.previous = s.current;
  s.t = 0;
  return s;
}

StepResult Environment::step(EnvState& state, const JointAction& joint) const {
  if (state.t >= cfg_.steps_per_episode) throw ContractViolation("episode is already finished");
  check_joint_action(*rs_, joint);
  JointAction pruned = joint;
  if (cfg_.prune) {
    for (auto& a : pruned) a = prune_action(a, cfg_.prune_threshold);
  }
  std::vector<double> gaps;
  double global = 0.0;
  FlowState next = load(*net_, *rs_, state.demand, pruned, cfg_.mode, gaps, global);

  StepResult out;
  out.rewards = compute_rewards(state.local_gaps, gaps, state.t + 1);
  state.previous = std::move(state.current);
  state.current = std::move(next);
  state.prev_action = std::move(pruned);
  state.local_gaps = std::move(gaps);
  state.global_gap = global;
  ++state.t;
  out.done = state.t == cfg_.steps_per_episode;
  out.info.global_gap = global;
  return out;
}

void Environment::fill_dynamic(std::size_t agent, const EnvState& state, double* out) const {
  const auto routes = rs_->routes(agent);
  const double base = ff_base_[agent];
  for (std::size_t r = 0; r < routes.size(); ++r) {
    double bpr = 0.0;
    double vc = 0.0;
    double congested = 0.0;
    for (int e : routes[r].links) {
      const Link& l = net_->link(e);
      const double x = state.current.link_flows[static_cast<std::size_t>(e)];
      bpr += bpr_time(l, x);
      vc += x / l.capacity;
      if (x / l.capacity > 1.0) congested += 1.0;
    }
    const double len = static_cast<double>(routes[r].links.size());
    const double cost = state.current.path_costs[agent][r];
    out[r] = cost / base;
    out[kMaxRoutes + r] = (cost - state.previous.path_costs[agent][r]) / base;
    out[2 * kMaxRoutes + r] = bpr / base;
    out[3 * kMaxRoutes + r] = vc / len;
    out[4 * kMaxRoutes + r] = congested / max_route_len_;
    out[5 * kMaxRoutes + r] = state.prev_action[agent][r];
    out[6 * kMaxRoutes + r] = 1.0;  // mask
  }
}

std::vector<double> Environment::observe(std::size_t agent, const EnvState& state) const {
  std::vector<double> obs(kObsDim, 0.0);
  std::copy_n(static_.begin() + static_cast<long>(agent * kStaticFeatures), kStaticFeatures,
              obs.begin());
  fill_dynamic(agent, state, obs.data() + kStaticFeatures);
  return obs;
}

std::vector<double> Environment::observe_all(const EnvState& state) const {
  const std::size_t n = agent_count();
  std::vector<double> obs(n * kObsDim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = obs.data() + i * kObsDim;
    std::copy_n(static_.begin() + static_cast<long>(i * kStaticFeatures), kStaticFeatures, row);
    fill_dynamic(i, state, row + kStaticFeatures);
  }
  return obs;
}

std::string EpisodeLog::to_csv() const {
  std::ostringstream out;
  out << "episode,step,global_gap,mean_reward\n";
  for (const Row& r : rows) {
    out << r.episode << ',' << r.step << ',' << format_double(r.global_gap) << ','
        << format_double(r.mean_reward) << '\n';
  }
  return out.str();
}

}  // namespace marlta
