#pragma once

// Readers and writers for the TNTP text formats used by the public
// transportation network benchmark collection (net, trips, node files).

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "marlta/network.hpp"

namespace marlta {

struct Coordinate {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Coordinate&) const = default;
};

// Keyed by the node id used in the files (not the dense index).
using NodeCoords = std::map<int, Coordinate>;

struct TripTable {
  DemandMatrix demand;                  // strictly positive entries only
  std::optional<double> total_od_flow;  // <TOTAL OD FLOW>, if present
  int zone_count = 0;
};

// Node ids in TNTP files are 1..<NUMBER OF NODES>; they map to dense index
// id - 1. Missing or zero b / power default to 0.15 / 4.
Network parse_network(std::istream& in);
Network parse_network(std::string_view text);

// Origins and destinations are validated against `net` when supplied.
TripTable parse_trips(std::istream& in, const Network* net = nullptr);
TripTable parse_trips(std::string_view text, const Network* net = nullptr);

NodeCoords parse_node_coords(std::istream& in);
NodeCoords parse_node_coords(std::string_view text);

// Throws ValidationError for coordinates on nodes the network lacks.
void validate_coords(const NodeCoords& coords, const Network& net);
// True when every node of `net` has a coordinate.
bool covers_network(const NodeCoords& coords, const Network& net);

std::string write_network(const Network& net);
std::string write_trips(const DemandMatrix& dm, const Network& net);
std::string write_node_coords(const NodeCoords& coords);

Network load_network_file(const std::string& path);
TripTable load_trips_file(const std::string& path, const Network* net = nullptr);
NodeCoords load_node_file(const std::string& path);

}  // namespace marlta
