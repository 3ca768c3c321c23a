#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace marlta {

inline constexpr int kMaxRoutes = 6;
inline constexpr double kDefaultBprB = 0.15;
inline constexpr double kDefaultBprPower = 4.0;

// UE prices links at their travel time, SO at their marginal travel time.
enum class CostMode { kUserEquilibrium, kSystemOptimal };

std::string to_string(CostMode mode);
CostMode cost_mode_from_string(const std::string& text);

struct Link {
  int tail = 0;
  int head = 0;
  double free_flow_time = 0.0;  // t0, minutes
  double capacity = 1.0;        // w, vehicles per period
  double b = kDefaultBprB;
  double power = kDefaultBprPower;
  double length = 0.0;
};

// BPR travel time t0 * (1 + b * (x / w)^power). Throws DomainError for x < 0.
double bpr_time(const Link& link, double flow);

// d(x * c(x)) / dx = t0 * (1 + b * (power + 1) * (x / w)^power).
double marginal_time(const Link& link, double flow);

// Integral of bpr_time from 0 to x (one Beckmann term).
double bpr_integral(const Link& link, double flow);

double link_cost(const Link& link, double flow, CostMode mode);

// Directed road graph. Nodes are dense 0-based indices; the ids used in the
// source files are retained for I/O.
class Network {
 public:
  Network() = default;
  // Validates link endpoints and parameters; throws StructuralError or
  // ValidationError. `first_thru_node` is a dense index: nodes below it are
  // zone centroids that shortest paths may not pass through.
  Network(int node_count, std::vector<Link> links, std::vector<int> original_ids = {},
          int first_thru_node = 0, int zone_count = 0);

  int node_count() const noexcept { return node_count_; }
  int link_count() const noexcept { return static_cast<int>(links_.size()); }
  int zone_count() const noexcept { return zone_count_; }
  int first_thru_node() const noexcept { return first_thru_node_; }

  const Link& link(int index) const { return links_[static_cast<std::size_t>(index)]; }
  std::span<const Link> links() const noexcept { return links_; }
  std::span<const int> out_links(int node) const;
  std::span<const int> in_links(int node) const;

  // A node may appear in the interior of a path only when it is not a zone.
  bool can_pass_through(int node) const noexcept { return node >= first_thru_node_; }

  int original_id(int node) const { return original_ids_[static_cast<std::size_t>(node)]; }
  std::optional<int> index_of(int original_id) const;
  std::optional<int> find_link(int tail, int head) const;

  std::vector<double> free_flow_times() const;

  // FNV-1a over a canonical text rendering of the topology and link
  // parameters. Used to tie cached artifacts to one network.
  std::uint64_t checksum() const;

 private:
  int node_count_ = 0;
  int zone_count_ = 0;
  int first_thru_node_ = 0;
  std::vector<Link> links_;
  std::vector<int> original_ids_;
  std::vector<int> out_offsets_, out_index_;
  std::vector<int> in_offsets_, in_index_;
};

struct OdPair {
  int origin = 0;       // dense node index
  int destination = 0;  // dense node index
  double demand = 0.0;  // trips per period

  bool operator==(const OdPair&) const = default;
};

// Agent i routes the demand of entries()[i].
class DemandMatrix {
 public:
  DemandMatrix() = default;
  // Throws ValidationError for non-positive demand, StructuralError for a
  // duplicated pair or origin == destination.
  explicit DemandMatrix(std::vector<OdPair> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const OdPair& operator[](std::size_t agent) const { return entries_[agent]; }
  std::span<const OdPair> entries() const noexcept { return entries_; }
  double total() const noexcept;
  double mean() const noexcept;

  // Same pairs, new demand values (one per agent, all > 0).
  DemandMatrix with_demands(std::span<const double> demands) const;

  bool operator==(const DemandMatrix&) const = default;

 private:
  std::vector<OdPair> entries_;
};

struct Route {
  std::vector<int> links;  // link indices from origin to destination

  bool operator==(const Route&) const = default;
};

// Candidate routes per agent, index-aligned with a DemandMatrix.
class RouteSet {
 public:
  RouteSet() = default;
  explicit RouteSet(std::vector<std::vector<Route>> per_agent);

  std::size_t agent_count() const noexcept { return routes_.size(); }
  int route_count(std::size_t agent) const {
    return static_cast<int>(routes_[agent].size());
  }
  std::span<const Route> routes(std::size_t agent) const { return routes_[agent]; }
  const std::vector<std::vector<Route>>& all() const noexcept { return routes_; }

  // Throws StructuralError unless every route is loopless, connects its
  // agent's OD pair, and each agent has 1..kMaxRoutes routes.
  void validate(const Network& net, const DemandMatrix& dm) const;

  bool operator==(const RouteSet&) const = default;

 private:
  std::vector<std::vector<Route>> routes_;
};

// Node sequence of a route, origin first.
std::vector<int> route_nodes(const Network& net, const Route& route);
double route_cost(const Route& route, std::span<const double> link_costs);

// Per agent route shares; each vector lies on the probability simplex.
using JointAction = std::vector<std::vector<double>>;

JointAction uniform_action(const RouteSet& rs);

// Result of one network loading. Immutable once built.
struct FlowState {
  CostMode mode = CostMode::kUserEquilibrium;
  std::vector<double> link_flows;
  std::vector<double> link_costs;  // bpr_time (UE) or marginal_time (SO)
  // Route-level views, empty for link-based solver states.
  std::vector<std::vector<double>> path_flows;
  std::vector<std::vector<double>> path_costs;
  std::vector<double> sp_costs;  // full-network shortest path cost per agent
};

}  // namespace marlta
