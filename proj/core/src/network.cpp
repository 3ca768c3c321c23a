#include "marlta/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "marlta/error.hpp"

namespace marlta {

std::string to_string(CostMode mode) {
  return mode == CostMode::kUserEquilibrium ? "ue" : "so";
}

CostMode cost_mode_from_string(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ue") return CostMode::kUserEquilibrium;
  if (lower == "so") return CostMode::kSystemOptimal;
  throw ConfigError("unknown objective '" + text + "' (expected ue or so)");
}

namespace {

void require_nonnegative_flow(double flow) {
  if (!(flow >= 0.0)) {
    throw DomainError("link flow must be non-negative, got " + std::to_string(flow));
  }
}

double ratio_power(const Link& link, double flow) {
  if (link.power == 0.0) return 1.0;
  return std::pow(flow / link.capacity, link.power);
}

}  // namespace

double bpr_time(const Link& link, double flow) {
  require_nonnegative_flow(flow);
  return link.free_flow_time * (1.0 + link.b * ratio_power(link, flow));
}

double marginal_time(const Link& link, double flow) {
  require_nonnegative_flow(flow);
  return link.free_flow_time * (1.0 + link.b * (link.power + 1.0) * ratio_power(link, flow));
}

double bpr_integral(const Link& link, double flow) {
  require_nonnegative_flow(flow);
  return link.free_flow_time *
         (flow + link.b * link.capacity / (link.power + 1.0) *
                     std::pow(flow / link.capacity, link.power + 1.0));
}

double link_cost(const Link& link, double flow, CostMode mode) {
  return mode == CostMode::kUserEquilibrium ? bpr_time(link, flow) : marginal_time(link, flow);
}

Network::Network(int node_count, std::vector<Link> links, std::vector<int> original_ids,
                 int first_thru_node, int zone_count)
    : node_count_(node_count),
      zone_count_(zone_count),
      first_thru_node_(first_thru_node),
      links_(std::move(links)),
      original_ids_(std::move(original_ids)) {
  if (node_count_ < 0) throw ValidationError("negative node count");
  if (original_ids_.empty()) {
    original_ids_.resize(static_cast<std::size_t>(node_count_));
    std::iota(original_ids_.begin(), original_ids_.end(), 1);
  }
  if (static_cast<int>(original_ids_.size()) != node_count_) {
    throw StructuralError("original id table does not match node count");
  }
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const Link& l = links_[i];
    const std::string where = "link " + std::to_string(i);
    if (l.tail < 0 || l.tail >= node_count_ || l.head < 0 || l.head >= node_count_) {
      throw StructuralError(where + " references a node outside [0, " +
                            std::to_string(node_count_) + ")");
    }
    if (!seen.emplace(l.tail, l.head).second) {
      throw StructuralError(where + " duplicates (" + std::to_string(original_ids_[l.tail]) +
                            ", " + std::to_string(original_ids_[l.head]) + ")");
    }
    if (!(l.capacity > 0.0)) throw ValidationError(where + " has non-positive capacity");
    if (!(l.free_flow_time >= 0.0)) throw ValidationError(where + " has negative free-flow time");
    if (!(l.power >= 0.0)) throw ValidationError(where + " has negative BPR power");
    if (!(l.b >= 0.0)) throw ValidationError(where + " has negative BPR coefficient");
  }

  // CSR adjacency, links in index order within each node.
  auto build = [&](auto endpoint, std::vector<int>& offsets, std::vector<int>& index) {
    offsets.assign(static_cast<std::size_t>(node_count_) + 1, 0);
    for (const Link& l : links_) ++offsets[static_cast<std::size_t>(endpoint(l)) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    index.assign(links_.size(), 0);
    std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < links_.size(); ++i) {
      index[static_cast<std::size_t>(cursor[static_cast<std::size_t>(endpoint(links_[i]))]++)] =
          static_cast<int>(i);
    }
  };
  build([](const Link& l) { return l.tail; }, out_offsets_, out_index_);
  build([](const Link& l) { return l.head; }, in_offsets_, in_index_);
}

std::span<const int> Network::out_links(int node) const {
  const auto n = static_cast<std::size_t>(node);
  return std::span<const int>(out_index_).subspan(
      static_cast<std::size_t>(out_offsets_[n]),
      static_cast<std::size_t>(out_offsets_[n + 1] - out_offsets_[n]));
}

std::span<const int> Network::in_links(int node) const {
  const auto n = static_cast<std::size_t>(node);
  return std::span<const int>(in_index_).subspan(
      static_cast<std::size_t>(in_offsets_[n]),
      static_cast<std::size_t>(in_offsets_[n + 1] - in_offsets_[n]));
}

std::optional<int> Network::index_of(int original_id) const {
  const auto it = std::find(original_ids_.begin(), original_ids_.end(), original_id);
  if (it == original_ids_.end()) return std::nullopt;
  return static_cast<int>(it - original_ids_.begin());
}

std::optional<int> Network::find_link(int tail, int head) const {
  for (int e : out_links(tail)) {
    if (links_[static_cast<std::size_t>(e)].head == head) return e;
  }
  return std::nullopt;
}

std::vector<double> Network::free_flow_times() const {
  std::vector<double> t0;
  t0.reserve(links_.size());
  for (const Link& l : links_) t0.push_back(l.free_flow_time);
  return t0;
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  char buf[64];
  auto put_int = [&](long long v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    mix(std::string_view(buf, static_cast<std::size_t>(p - buf)));
    mix(",");
  };
  auto put_double = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    mix(std::string_view(buf, static_cast<std::size_t>(p - buf)));
    mix(",");
  };
  put_int(node_count_);
  put_int(first_thru_node_);
  for (int id : original_ids_) put_int(id);
  for (const Link& l : links_) {
    put_int(l.tail);
    put_int(l.head);
    put_double(l.free_flow_time);
    put_double(l.capacity);
    put_double(l.b);
    put_double(l.power);
    mix(";");
  }
  return h;
}

DemandMatrix::DemandMatrix(std::vector<OdPair> entries) : entries_(std::move(entries)) {
  std::set<std::pair<int, int>> seen;
  for (const OdPair& od : entries_) {
    if (!(od.demand > 0.0) || !std::isfinite(od.demand)) {
      throw ValidationError("OD demand must be positive and finite");
    }
    if (od.origin == od.destination) {
      throw StructuralError("OD pair with identical origin and destination " +
                            std::to_string(od.origin));
    }
    if (!seen.emplace(od.origin, od.destination).second) {
      throw StructuralError("duplicate OD pair (" + std::to_string(od.origin) + ", " +
                            std::to_string(od.destination) + ")");
    }
  }
}

double DemandMatrix::total() const noexcept {
  double sum = 0.0;
  for (const OdPair& od : entries_) sum += od.demand;
  return sum;
}

double DemandMatrix::mean() const noexcept {
  return entries_.empty() ? 0.0 : total() / static_cast<double>(entries_.size());
}

DemandMatrix DemandMatrix::with_demands(std::span<const double> demands) const {
  if (demands.size() != entries_.size()) {
    throw ContractViolation("demand vector length does not match OD pair count");
  }
  std::vector<OdPair> scaled(entries_.begin(), entries_.end());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i].demand = demands[i];
  return DemandMatrix(std::move(scaled));
}

RouteSet::RouteSet(std::vector<std::vector<Route>> per_agent) : routes_(std::move(per_agent)) {}

std::vector<int> route_nodes(const Network& net, const Route& route) {
  std::vector<int> nodes;
  if (route.links.empty()) return nodes;
  nodes.reserve(route.links.size() + 1);
  nodes.push_back(net.link(route.links.front()).tail);
  for (int e : route.links) nodes.push_back(net.link(e).head);
  return nodes;
}

double route_cost(const Route& route, std::span<const double> link_costs) {
  double cost = 0.0;
  for (int e : route.links) cost += link_costs[static_cast<std::size_t>(e)];
  return cost;
}

void RouteSet::validate(const Network& net, const DemandMatrix& dm) const {
  if (routes_.size() != dm.size()) {
    throw StructuralError("route set has " + std::to_string(routes_.size()) +
                          " agents, demand matrix has " + std::to_string(dm.size()));
  }
  for (std::size_t i = 0; i < routes_.size(); ++i) {
    const auto& rs = routes_[i];
    const std::string who = "agent " + std::to_string(i);
    if (rs.empty() || static_cast<int>(rs.size()) > kMaxRoutes) {
      throw StructuralError(who + " has " + std::to_string(rs.size()) + " routes");
    }
    for (const Route& r : rs) {
      if (r.links.empty()) throw StructuralError(who + " has an empty route");
      for (int e : r.links) {
        if (e < 0 || e >= net.link_count()) throw StructuralError(who + " route uses unknown link");
      }
      for (std::size_t k = 1; k < r.links.size(); ++k) {
        if (net.link(r.links[k - 1]).head != net.link(r.links[k]).tail) {
          throw StructuralError(who + " route is not contiguous");
        }
      }
      auto nodes = route_nodes(net, r);
      if (nodes.front() != dm[i].origin || nodes.back() != dm[i].destination) {
        throw StructuralError(who + " route does not connect its OD pair");
      }
      std::sort(nodes.begin(), nodes.end());
      if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
        throw StructuralError(who + " route contains a loop");
      }
    }
  }
}

JointAction uniform_action(const RouteSet& rs) {
  JointAction act(rs.agent_count());
  for (std::size_t i = 0; i < rs.agent_count(); ++i) {
    const int k = rs.route_count(i);
    act[i].assign(static_cast<std::size_t>(k), 1.0 / k);
  }
  return act;
}

}  // namespace marlta
