#pragma once

#include <span>
#include <string>
#include <vector>

#include "marlta/network.hpp"

namespace marlta {

// Sum of BPR integrals (UE objective). Throws DomainError for negative flow.
double beckmann_objective(const Network& net, std::span<const double> link_flows);

// Sum of x * bpr_time(x) (SO objective).
double total_system_cost(const Network& net, std::span<const double> link_flows);

// The objective minimized under `mode`.
double assignment_objective(const Network& net, std::span<const double> link_flows,
                            CostMode mode);

struct GapReport {
  double global_gap = 0.0;
  std::vector<double> local_gaps;  // empty for states without path flows
  double total_cost = 0.0;         // sum of x_e * c_e
  double sp_total = 0.0;           // sum of k_rs * d_rs
};

// (sum x_e c_e) / (sum k_rs d_rs) - 1, costs in fs.mode.
// Throws UndefinedGapError when the denominator is zero.
double relative_gap_global(const FlowState& fs, const DemandMatrix& dm);

// The same ratio over one agent's routes. Needs path flows.
double relative_gap_local(const FlowState& fs, const DemandMatrix& dm, std::size_t agent);

GapReport gap_report(const FlowState& fs, const DemandMatrix& dm);

struct SolverOptions {
  CostMode mode = CostMode::kUserEquilibrium;
  int max_iters = 50;
  double gap_tol = 0.0;      // stop once gap <= gap_tol
  bool record_time = true;   // false writes 0 in the seconds column
  int threads = 1;           // shortest-path trees per origin
};

struct TraceRow {
  int iter = 0;
  double gap = 0.0;
  double objective = 0.0;
  double step = 0.0;
  double seconds = 0.0;
  bool line_search_fallback = false;
};

struct SolverTrace {
  std::vector<TraceRow> rows;

  // Header `iter,gap,objective,step,seconds`, one row per iteration.
  std::string to_csv() const;
};

struct SolverResult {
  FlowState state;  // link-based: path_flows and path_costs are empty
  SolverTrace trace;
};

// All-or-nothing link flows on shortest paths under `costs`.
std::vector<double> all_or_nothing(const Network& net, const DemandMatrix& dm,
                                   std::span<const double> costs, int threads = 1);

// Iteration 1 is the all-or-nothing load on free-flow times (step 1).
// Iteration j > 1 moves toward the all-or-nothing target with step 1/j.
// Each row reports the gap of the state after that iteration's update.
SolverResult solve_msa(const Network& net, const DemandMatrix& dm, const SolverOptions& opt);

// As solve_msa, with the step chosen by bisection on the directional
// derivative of the mode objective (at most 64 halvings or |g| < 1e-12).
SolverResult solve_fw(const Network& net, const DemandMatrix& dm, const SolverOptions& opt);

}  // namespace marlta
