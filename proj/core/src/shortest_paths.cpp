#include "marlta/shortest_paths.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <string>
#include <utility>

#include "marlta/error.hpp"

namespace marlta {
namespace {

struct Blocked {
  std::vector<char> nodes;
  std::vector<char> links;
};

void check_costs(const Network& net, std::span<const double> costs) {
  if (static_cast<int>(costs.size()) != net.link_count()) {
    throw ContractViolation("cost vector length " + std::to_string(costs.size()) +
                            " does not match link count " + std::to_string(net.link_count()));
  }
  for (double c : costs) {
    if (!(c >= 0.0)) throw DomainError("shortest paths need non-negative link costs");
  }
}

ShortestPathTree dijkstra(const Network& net, std::span<const double> costs, int origin,
                          int target, const Blocked* blocked) {
  const auto n = static_cast<std::size_t>(net.node_count());
  ShortestPathTree tree;
  tree.origin = origin;
  tree.dist.assign(n, kUnreachable);
  tree.pred_link.assign(n, kNoLink);
  std::vector<char> settled(n, 0);

  using Label = std::pair<double, int>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> queue;
  tree.dist[static_cast<std::size_t>(origin)] = 0.0;
  queue.emplace(0.0, origin);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    const auto uu = static_cast<std::size_t>(u);
    if (settled[uu]) continue;
    settled[uu] = 1;
    if (u == target) break;
    if (u != origin && !net.can_pass_through(u)) continue;
    for (int e : net.out_links(u)) {
      if (blocked && blocked->links[static_cast<std::size_t>(e)]) continue;
      const int v = net.link(e).head;
      const auto vv = static_cast<std::size_t>(v);
      if (settled[vv] || (blocked && blocked->nodes[vv])) continue;
      const double nd = d + costs[static_cast<std::size_t>(e)];
      if (nd < tree.dist[vv]) {
        tree.dist[vv] = nd;
        tree.pred_link[vv] = e;
        queue.emplace(nd, v);
      }
    }
  }
  return tree;
}

double path_cost(const Route& r, std::span<const double> costs) {
  double c = 0.0;
  for (int e : r.links) c += costs[static_cast<std::size_t>(e)];
  return c;
}

struct Candidate {
  double cost;
  std::vector<int> nodes;
  Route route;

  bool operator<(const Candidate& o) const {
    if (cost != o.cost) return cost < o.cost;
    return nodes < o.nodes;
  }
};

}  // namespace

ShortestPathTree shortest_path_tree(const Network& net, std::span<const double> costs,
                                    int origin) {
  check_costs(net, costs);
  if (origin < 0 || origin >= net.node_count()) {
    throw ContractViolation("origin " + std::to_string(origin) + " out of range");
  }
  return dijkstra(net, costs, origin, -1, nullptr);
}

Route extract_route(const Network& net, const ShortestPathTree& tree, int dest) {
  Route r;
  if (dest == tree.origin || tree.pred_link[static_cast<std::size_t>(dest)] == kNoLink) return r;
  for (int v = dest; v != tree.origin;) {
    const int e = tree.pred_link[static_cast<std::size_t>(v)];
    r.links.push_back(e);
    v = net.link(e).tail;
  }
  std::reverse(r.links.begin(), r.links.end());
  return r;
}

std::vector<Route> yen_ksp(const Network& net, std::span<const double> costs, int origin,
                           int destination, int k) {
  check_costs(net, costs);
  if (k < 1) throw ContractViolation("yen_ksp needs k >= 1");
  if (origin == destination) throw ContractViolation("yen_ksp needs origin != destination");
  const int n = net.node_count();
  if (origin < 0 || origin >= n || destination < 0 || destination >= n) {
    throw ContractViolation("yen_ksp endpoint out of range");
  }

  std::vector<Route> accepted;
  std::vector<std::vector<int>> accepted_nodes;
  const ShortestPathTree first = dijkstra(net, costs, origin, destination, nullptr);
  Route best = extract_route(net, first, destination);
  if (best.links.empty()) return accepted;
  accepted_nodes.push_back(route_nodes(net, best));
  accepted.push_back(std::move(best));

  std::set<Candidate> candidates;
  Blocked blocked{std::vector<char>(static_cast<std::size_t>(n), 0),
                  std::vector<char>(static_cast<std::size_t>(net.link_count()), 0)};

  while (static_cast<int>(accepted.size()) < k) {
    const Route& prev = accepted.back();
    const std::vector<int> prev_nodes = accepted_nodes.back();
    for (std::size_t i = 0; i + 1 < prev_nodes.size(); ++i) {
      const int spur = prev_nodes[i];
      std::fill(blocked.nodes.begin(), blocked.nodes.end(), 0);
      std::fill(blocked.links.begin(), blocked.links.end(), 0);
      for (std::size_t a = 0; a < accepted.size(); ++a) {
        const auto& an = accepted_nodes[a];
        if (an.size() > i + 1 && std::equal(an.begin(), an.begin() + static_cast<long>(i) + 1,
                                            prev_nodes.begin())) {
          blocked.links[static_cast<std::size_t>(accepted[a].links[i])] = 1;
        }
      }
      for (std::size_t r = 0; r < i; ++r) blocked.nodes[static_cast<std::size_t>(prev_nodes[r])] = 1;

      const ShortestPathTree spur_tree = dijkstra(net, costs, spur, destination, &blocked);
      Route spur_route = extract_route(net, spur_tree, destination);
      if (spur_route.links.empty()) continue;

      Route total;
      total.links.assign(prev.links.begin(), prev.links.begin() + static_cast<long>(i));
      total.links.insert(total.links.end(), spur_route.links.begin(), spur_route.links.end());
      Candidate c{path_cost(total, costs), route_nodes(net, total), std::move(total)};
      if (std::find(accepted_nodes.begin(), accepted_nodes.end(), c.nodes) ==
          accepted_nodes.end()) {
        candidates.insert(std::move(c));
      }
    }
    if (candidates.empty()) break;
    auto node = candidates.extract(candidates.begin());
    accepted_nodes.push_back(std::move(node.value().nodes));
    accepted.push_back(std::move(node.value().route));
  }
  return accepted;
}

RouteSet build_route_sets(const Network& net, const DemandMatrix& dm, int k) {
  const std::vector<double> t0 = net.free_flow_times();
  std::vector<std::vector<Route>> per_agent;
  per_agent.reserve(dm.size());
  for (const OdPair& od : dm.entries()) {
    auto routes = yen_ksp(net, t0, od.origin, od.destination, k);
    if (routes.empty()) {
      throw StructuralError("OD pair (" + std::to_string(net.original_id(od.origin)) + ", " +
                            std::to_string(net.original_id(od.destination)) +
                            ") is disconnected");
    }
    per_agent.push_back(std::move(routes));
  }
  return RouteSet(std::move(per_agent));
}

}  // namespace marlta
