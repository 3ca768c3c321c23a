#pragma once

#include <span>
#include <vector>

#include "marlta/network.hpp"

namespace marlta {

// Throws ContractViolation unless `act` matches the route counts of `rs` and
// every vector is within `tol` of the probability simplex.
void check_joint_action(const RouteSet& rs, const JointAction& act, double tol = 1e-6);

// Path flows a_p * d, link flows by aggregation, link and path costs in
// `mode`, and sp_costs from full-network shortest paths under the same costs.
FlowState load_network(const Network& net, const RouteSet& rs, const DemandMatrix& dm,
                       const JointAction& act, CostMode mode);

// Link costs for given link flows.
std::vector<double> link_costs(const Network& net, std::span<const double> flows, CostMode mode);

// Shortest path cost per OD pair under `costs`, one tree per distinct origin.
// Throws StructuralError for an unreachable destination.
std::vector<double> od_shortest_costs(const Network& net, const DemandMatrix& dm,
                                      std::span<const double> costs);

}  // namespace marlta
