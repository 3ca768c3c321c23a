#include "marlta/equilibrium.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/loading.hpp"
#include "marlta/shortest_paths.hpp"
#include "parallel.hpp"

namespace marlta {

double beckmann_objective(const Network& net, std::span<const double> link_flows) {
  double z = 0.0;
  for (std::size_t e = 0; e < link_flows.size(); ++e) {
    z += bpr_integral(net.link(static_cast<int>(e)), link_flows[e]);
  }
  return z;
}

double total_system_cost(const Network& net, std::span<const double> link_flows) {
  double z = 0.0;
  for (std::size_t e = 0; e < link_flows.size(); ++e) {
    z += link_flows[e] * bpr_time(net.link(static_cast<int>(e)), link_flows[e]);
  }
  return z;
}

double assignment_objective(const Network& net, std::span<const double> link_flows,
                            CostMode mode) {
  return mode == CostMode::kUserEquilibrium ? beckmann_objective(net, link_flows)
                                            : total_system_cost(net, link_flows);
}

namespace {

double sp_denominator(const FlowState& fs, const DemandMatrix& dm) {
  if (fs.sp_costs.size() != dm.size()) {
    throw ContractViolation("flow state and demand matrix disagree on agent count");
  }
  double sp = 0.0;
  for (std::size_t i = 0; i < dm.size(); ++i) sp += fs.sp_costs[i] * dm[i].demand;
  return sp;
}

// Both sums are nonnegative and num >= denom in exact arithmetic; rounding
// can leave a tiny negative gap when all flow is on shortest routes.
double gap_from(double num, double denom) {
  const double g = num / denom - 1.0;
  return g < 0.0 && g > -1e-12 ? 0.0 : g;
}

double weighted_link_cost(const FlowState& fs) {
  double total = 0.0;
  for (std::size_t e = 0; e < fs.link_flows.size(); ++e) total += fs.link_flows[e] * fs.link_costs[e];
  return total;
}

}  // namespace

double relative_gap_global(const FlowState& fs, const DemandMatrix& dm) {
  if (dm.total() <= 0.0) throw UndefinedGapError("relative gap is undefined for zero demand");
  const double sp = sp_denominator(fs, dm);
  if (!(sp > 0.0)) throw UndefinedGapError("relative gap is undefined for zero shortest-path cost");
  return gap_from(weighted_link_cost(fs), sp);
}

double relative_gap_local(const FlowState& fs, const DemandMatrix& dm, std::size_t agent) {
  if (agent >= dm.size() || agent >= fs.path_flows.size()) {
    throw ContractViolation("agent " + std::to_string(agent) + " out of range");
  }
  const double denom = fs.sp_costs[agent] * dm[agent].demand;
  if (!(denom > 0.0)) {
    throw UndefinedGapError("local gap of agent " + std::to_string(agent) + " is undefined");
  }
  double num = 0.0;
  const auto& pf = fs.path_flows[agent];
  const auto& pc = fs.path_costs[agent];
  for (std::size_t p = 0; p < pf.size(); ++p) num += pf[p] * pc[p];
  return gap_from(num, denom);
}

GapReport gap_report(const FlowState& fs, const DemandMatrix& dm) {
  GapReport r;
  r.total_cost = weighted_link_cost(fs);
  r.sp_total = sp_denominator(fs, dm);
  r.global_gap = relative_gap_global(fs, dm);
  if (!fs.path_flows.empty()) {
    r.local_gaps.resize(dm.size());
    for (std::size_t i = 0; i < dm.size(); ++i) r.local_gaps[i] = relative_gap_local(fs, dm, i);
  }
  return r;
}

std::string SolverTrace::to_csv() const {
  std::ostringstream out;
  out << "iter,gap,objective,step,seconds\n";
  for (const TraceRow& r : rows) {
    out << r.iter << ',' << format_double(r.gap) << ',' << format_double(r.objective) << ','
        << format_double(r.step) << ',' << format_double(r.seconds) << '\n';
  }
  return out.str();
}

namespace {

struct AonResult {
  std::vector<double> flows;
  std::vector<double> sp_costs;  // per OD pair
};

AonResult aon(const Network& net, const DemandMatrix& dm, std::span<const double> costs,
              int threads) {
  std::map<int, std::vector<std::size_t>> by_origin;
  for (std::size_t i = 0; i < dm.size(); ++i) by_origin[dm[i].origin].push_back(i);
  std::vector<int> origins;
  for (const auto& [o, _] : by_origin) origins.push_back(o);

  std::vector<ShortestPathTree> trees(origins.size());
  detail::parallel_for(origins.size(), threads, [&](std::size_t k) {
    trees[k] = shortest_path_tree(net, costs, origins[k]);
  });

  AonResult r;
  r.flows.assign(static_cast<std::size_t>(net.link_count()), 0.0);
  r.sp_costs.assign(dm.size(), 0.0);
  for (std::size_t k = 0; k < origins.size(); ++k) {
    const ShortestPathTree& tree = trees[k];
    for (std::size_t i : by_origin[origins[k]]) {
      const int dest = dm[i].destination;
      const double d = tree.dist[static_cast<std::size_t>(dest)];
      if (d == kUnreachable) {
        throw StructuralError("OD pair (" + std::to_string(net.original_id(dm[i].origin)) + ", " +
                              std::to_string(net.original_id(dest)) + ") is disconnected");
      }
      r.sp_costs[i] = d;
      for (int v = dest; v != tree.origin;) {
        const int e = tree.pred_link[static_cast<std::size_t>(v)];
        r.flows[static_cast<std::size_t>(e)] += dm[i].demand;
        v = net.link(e).tail;
      }
    }
  }
  return r;
}

std::vector<double> blend(std::span<const double> x, std::span<const double> y, double step) {
  std::vector<double> out(x.size());
  for (std::size_t e = 0; e < x.size(); ++e) {
    out[e] = std::max(0.0, (1.0 - step) * x[e] + step * y[e]);
  }
  return out;
}

// Directional derivative of the mode objective at x + lambda * (y - x).
double directional_derivative(const Network& net, std::span<const double> x,
                              std::span<const double> y, double lambda, CostMode mode) {
  double g = 0.0;
  for (std::size_t e = 0; e < x.size(); ++e) {
    const double d = y[e] - x[e];
    if (d == 0.0) continue;
    const double flow = std::max(0.0, (1.0 - lambda) * x[e] + lambda * y[e]);
    g += link_cost(net.link(static_cast<int>(e)), flow, mode) * d;
  }
  return g;
}

struct LineSearch {
  double step = 0.0;
  bool fallback = false;
};

LineSearch exact_line_search(const Network& net, std::span<const double> x,
                             std::span<const double> y, CostMode mode, int iter) {
  const double g0 = directional_derivative(net, x, y, 0.0, mode);
  if (!std::isfinite(g0) || g0 > 0.0) return {1.0 / iter, true};
  if (g0 == 0.0) return {0.0, false};
  const double g1 = directional_derivative(net, x, y, 1.0, mode);
  if (!std::isfinite(g1)) return {1.0 / iter, true};
  if (g1 <= 0.0) return {1.0, false};

  double lo = 0.0;
  double hi = 1.0;
  for (int k = 0; k < 64; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double g = directional_derivative(net, x, y, mid, mode);
    if (std::abs(g) < 1e-12) return {mid, false};
    if (g < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {0.5 * (lo + hi), false};
}

enum class StepRule { kMsa, kLineSearch };

SolverResult solve(const Network& net, const DemandMatrix& dm, const SolverOptions& opt,
                   StepRule rule) {
  if (opt.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (dm.empty()) throw UndefinedGapError("cannot solve an assignment with no demand");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  SolverResult result;
  const std::vector<double> t0 = net.free_flow_times();
  AonResult target = aon(net, dm, t0, opt.threads);
  std::vector<double> x(t0.size(), 0.0);
  std::vector<double> costs;
  double objective = 0.0;

  for (int iter = 1; iter <= opt.max_iters; ++iter) {
    TraceRow row;
    row.iter = iter;
    if (iter == 1) {
      row.step = 1.0;
    } else if (rule == StepRule::kMsa) {
      row.step = 1.0 / iter;
    } else {
      const LineSearch ls = exact_line_search(net, x, target.flows, opt.mode, iter);
      row.step = ls.step;
      row.line_search_fallback = ls.fallback;
    }
    std::vector<double> next = blend(x, target.flows, row.step);
    double next_objective = assignment_objective(net, next, opt.mode);
    if (rule == StepRule::kLineSearch && iter > 1 && next_objective > objective) {
      // Roundoff near the optimum of a flat line search; keep the current point.
      row.step = 0.0;
      next = x;
      next_objective = objective;
    }
    x = std::move(next);
    objective = next_objective;

    costs = link_costs(net, x, opt.mode);
    target = aon(net, dm, costs, opt.threads);
    double total = 0.0;
    double sp = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) total += x[e] * costs[e];
    for (std::size_t i = 0; i < dm.size(); ++i) sp += target.sp_costs[i] * dm[i].demand;
    if (!(sp > 0.0)) throw UndefinedGapError("relative gap is undefined for zero shortest-path cost");
    row.gap = gap_from(total, sp);
    row.objective = objective;
    row.seconds =
        opt.record_time ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
    result.trace.rows.push_back(row);
    if (row.gap <= opt.gap_tol) break;
  }

  result.state.mode = opt.mode;
  result.state.link_flows = std::move(x);
  result.state.link_costs = std::move(costs);
  result.state.sp_costs = std::move(target.sp_costs);
  return result;
}

}  // namespace

std::vector<double> all_or_nothing(const Network& net, const DemandMatrix& dm,
                                   std::span<const double> costs, int threads) {
  return aon(net, dm, costs, threads).flows;
}

SolverResult solve_msa(const Network& net, const DemandMatrix& dm, const SolverOptions& opt) {
  return solve(net, dm, opt, StepRule::kMsa);
}

SolverResult solve_fw(const Network& net, const DemandMatrix& dm, const SolverOptions& opt) {
  return solve(net, dm, opt, StepRule::kLineSearch);
}

}  // namespace marlta
