#include "marlta/loading.hpp"

#include <cmath>
#include <map>
#include <string>

#include "marlta/error.hpp"
#include "marlta/shortest_paths.hpp"

namespace marlta {

void check_joint_action(const RouteSet& rs, const JointAction& act, double tol) {
  if (act.size() != rs.agent_count()) {
    throw ContractViolation("joint action has " + std::to_string(act.size()) +
                            " agents, route set has " + std::to_string(rs.agent_count()));
  }
  for (std::size_t i = 0; i < act.size(); ++i) {
    if (static_cast<int>(act[i].size()) != rs.route_count(i)) {
      throw ContractViolation("agent " + std::to_string(i) + " action has " +
                              std::to_string(act[i].size()) + " components for " +
                              std::to_string(rs.route_count(i)) + " routes");
    }
    double sum = 0.0;
    for (double a : act[i]) {
      if (!(a >= -tol) || !std::isfinite(a)) {
        throw ContractViolation("agent " + std::to_string(i) + " action has a negative component");
      }
      sum += a;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ContractViolation("agent " + std::to_string(i) + " action sums to " +
                              std::to_string(sum));
    }
  }
}

std::vector<double> link_costs(const Network& net, std::span<const double> flows, CostMode mode) {
  std::vector<double> c(flows.size());
  for (std::size_t e = 0; e < flows.size(); ++e) {
    c[e] = link_cost(net.link(static_cast<int>(e)), flows[e], mode);
  }
  return c;
}

std::vector<double> od_shortest_costs(const Network& net, const DemandMatrix& dm,
                                      std::span<const double> costs) {
  std::vector<double> sp(dm.size());
  std::map<int, ShortestPathTree> trees;
  for (std::size_t i = 0; i < dm.size(); ++i) {
    const OdPair& od = dm[i];
    auto it = trees.find(od.origin);
    if (it == trees.end()) {
      it = trees.emplace(od.origin, shortest_path_tree(net, costs, od.origin)).first;
    }
    sp[i] = it->second.dist[static_cast<std::size_t>(od.destination)];
    if (sp[i] == kUnreachable) {
      throw StructuralError("OD pair (" + std::to_string(net.original_id(od.origin)) + ", " +
                            std::to_string(net.original_id(od.destination)) +
                            ") is disconnected");
    }
  }
  return sp;
}

FlowState load_network(const Network& net, const RouteSet& rs, const DemandMatrix& dm,
                       const JointAction& act, CostMode mode) {
  if (rs.agent_count() != dm.size()) {
    throw ContractViolation("route set and demand matrix disagree on agent count");
  }
  check_joint_action(rs, act);

  FlowState fs;
  fs.mode = mode;
  fs.link_flows.assign(static_cast<std::size_t>(net.link_count()), 0.0);
  fs.path_flows.resize(dm.size());
  fs.path_costs.resize(dm.size());
  for (std::size_t i = 0; i < dm.size(); ++i) {
    const auto routes = rs.routes(i);
    auto& pf = fs.path_flows[i];
    pf.resize(routes.size());
    for (std::size_t p = 0; p < routes.size(); ++p) {
      pf[p] = std::max(0.0, act[i][p]) * dm[i].demand;
      for (int e : routes[p].links) fs.link_flows[static_cast<std::size_t>(e)] += pf[p];
    }
  }
  fs.link_costs = link_costs(net, fs.link_flows, mode);
  for (std::size_t i = 0; i < dm.size(); ++i) {
    const auto routes = rs.routes(i);
    auto& pc = fs.path_costs[i];
    pc.resize(routes.size());
    for (std::size_t p = 0; p < routes.size(); ++p) pc[p] = route_cost(routes[p], fs.link_costs);
  }
  fs.sp_costs = od_shortest_costs(net, dm, fs.link_costs);
  return fs;
}

}  // namespace marlta
