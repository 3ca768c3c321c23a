#pragma once

#include <limits>
#include <span>
#include <vector>

#include "marlta/network.hpp"

namespace marlta {

inline constexpr int kNoLink = -1;
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct ShortestPathTree {
  int origin = 0;
  std::vector<double> dist;     // kUnreachable when no path exists
  std::vector<int> pred_link;   // kNoLink for the origin and unreachable nodes
};

// Dijkstra from `origin`. Zone nodes (below the network's first thru node)
// are never expanded except the origin itself. Among equal-cost labels the
// first one settled wins, and the queue pops lower node indices first; links
// are scanned in index order. Throws DomainError on a negative cost.
ShortestPathTree shortest_path_tree(const Network& net, std::span<const double> costs,
                                    int origin);

// Link sequence from the tree origin to `dest`; empty if unreachable.
Route extract_route(const Network& net, const ShortestPathTree& tree, int dest);

// Up to k loopless paths in nondecreasing cost order, ties broken by the
// node sequence. Empty when `destination` is unreachable.
std::vector<Route> yen_ksp(const Network& net, std::span<const double> costs, int origin,
                           int destination, int k);

// yen_ksp on free-flow times for every OD pair. Throws StructuralError naming
// the first disconnected pair.
RouteSet build_route_sets(const Network& net, const DemandMatrix& dm, int k = kMaxRoutes);

}  // namespace marlta
