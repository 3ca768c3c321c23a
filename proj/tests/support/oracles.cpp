#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

namespace marlta::testing {

std::string data_dir() {
  if (const char* env = std::getenv("MARLTA_DATA_DIR"); env && *env) return env;
  return MARLTA_TEST_DATA_DIR;
}

std::vector<double> bellman_ford(const Network& net, const std::vector<double>& costs, int origin) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(net.node_count()), inf);
  dist[static_cast<std::size_t>(origin)] = 0.0;
  for (int round = 0; round < net.node_count(); ++round) {
    bool changed = false;
    for (int e = 0; e < net.link_count(); ++e) {
      const Link& l = net.link(e);
      if (l.tail != origin && l.tail < net.first_thru_node()) continue;
      const double du = dist[static_cast<std::size_t>(l.tail)];
      if (du == inf) continue;
      const double cand = du + costs[static_cast<std::size_t>(e)];
      if (cand < dist[static_cast<std::size_t>(l.head)]) {
        dist[static_cast<std::size_t>(l.head)] = cand;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return dist;
}

namespace {

void dfs(const Network& net, const std::vector<double>& costs, int d, PathCandidate& cur,
         std::vector<bool>& on_path, std::vector<PathCandidate>& out) {
  const int u = cur.nodes.back();
  if (u == d) {
    out.push_back(cur);
    return;
  }
  if (cur.nodes.size() > 1 && !net.can_pass_through(u)) return;
  for (int e = 0; e < net.link_count(); ++e) {
    const Link& l = net.link(e);
    if (l.tail != u || on_path[static_cast<std::size_t>(l.head)]) continue;
    on_path[static_cast<std::size_t>(l.head)] = true;
    cur.nodes.push_back(l.head);
    cur.links.push_back(e);
    dfs(net, costs, d, cur, on_path, out);
    cur.nodes.pop_back();
    cur.links.pop_back();
    on_path[static_cast<std::size_t>(l.head)] = false;
  }
}

}  // namespace

std::vector<PathCandidate> enumerate_simple_paths(const Network& net,
                                                  const std::vector<double>& costs, int o, int d) {
  std::vector<PathCandidate> out;
  PathCandidate cur;
  cur.nodes.push_back(o);
  std::vector<bool> on_path(static_cast<std::size_t>(net.node_count()), false);
  on_path[static_cast<std::size_t>(o)] = true;
  dfs(net, costs, d, cur, on_path, out);
  for (PathCandidate& p : out) {
    p.cost = 0.0;
    for (int e : p.links) p.cost += costs[static_cast<std::size_t>(e)];
  }
  std::sort(out.begin(), out.end(), [](const PathCandidate& a, const PathCandidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.nodes < b.nodes;
  });
  return out;
}

Network random_network(std::mt19937_64& rng, int nodes, double density, bool connected,
                       int first_thru) {
  std::set<std::pair<int, int>> arcs;
  if (connected) {
    for (int i = 0; i < nodes; ++i) arcs.insert({i, (i + 1) % nodes});
  }
  std::bernoulli_distribution coin(density);
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      if (i != j && coin(rng)) arcs.insert({i, j});
    }
  }
  std::vector<std::pair<int, int>> order(arcs.begin(), arcs.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> t0(1.0, 10.0);
  std::uniform_real_distribution<double> cap(50.0, 500.0);
  std::vector<Link> links;
  for (const auto& [a, b] : order) {
    Link l;
    l.tail = a;
    l.head = b;
    l.free_flow_time = t0(rng);
    l.capacity = cap(rng);
    l.length = l.free_flow_time;
    links.push_back(l);
  }
  return Network(nodes, std::move(links), {}, first_thru, first_thru);
}

std::vector<double> random_costs(std::mt19937_64& rng, const Network& net, double lo, double hi,
                                 bool integral) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> c(static_cast<std::size_t>(net.link_count()));
  for (double& v : c) v = integral ? std::floor(u(rng)) : u(rng);
  return c;
}

DemandMatrix random_demand(std::mt19937_64& rng, const Network& net, int pairs) {
  std::uniform_int_distribution<int> node(0, net.node_count() - 1);
  std::uniform_real_distribution<double> demand(1.0, 100.0);
  std::set<std::pair<int, int>> seen;
  std::vector<OdPair> out;
  for (int tries = 0; static_cast<int>(out.size()) < pairs && tries < 50 * pairs; ++tries) {
    const int o = node(rng);
    const int d = node(rng);
    if (o == d || !seen.insert({o, d}).second) continue;
    out.push_back({o, d, demand(rng)});
  }
  return DemandMatrix(std::move(out));
}

JointAction random_action(std::mt19937_64& rng, const RouteSet& rs) {
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution drop(0.2);
  JointAction act(rs.agent_count());
  for (std::size_t i = 0; i < rs.agent_count(); ++i) {
    std::vector<double> a(static_cast<std::size_t>(rs.route_count(i)));
    double sum = 0.0;
    for (double& v : a) {
      v = drop(rng) ? 0.0 : ex(rng);
      sum += v;
    }
    if (sum == 0.0) {
      a[0] = 1.0;
      sum = 1.0;
    }
    for (double& v : a) v /= sum;
    act[i] = std::move(a);
  }
  return act;
}

double central_difference(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace marlta::testing
