#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "marlta/network.hpp"

namespace marlta {

inline constexpr int kRouteCacheVersion = 1;

// JSON document holding the network checksum and, per agent, its OD pair and
// route link-index lists. Output is byte-stable for equal inputs.
std::string serialize_route_set(const RouteSet& rs, const Network& net, const DemandMatrix& dm);

// Throws VersionError for another format version, StructuralError when the
// checksum or OD pairs do not match, ParseError for malformed documents.
RouteSet deserialize_route_set(std::string_view text, const Network& net, const DemandMatrix& dm);

void save_route_cache(const std::filesystem::path& path, const RouteSet& rs, const Network& net,
                      const DemandMatrix& dm);
RouteSet load_route_cache(const std::filesystem::path& path, const Network& net,
                          const DemandMatrix& dm);

}  // namespace marlta
