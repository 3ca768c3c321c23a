#include "marlta/route_cache.hpp"

#include <cstdio>

#include <json.hpp>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"

namespace marlta {
namespace {

constexpr const char* kFormatName = "marlta-route-cache";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_route_set(const RouteSet& rs, const Network& net, const DemandMatrix& dm) {
  if (rs.agent_count() != dm.size()) {
    throw ContractViolation("route set and demand matrix disagree on agent count");
  }
  nlohmann::ordered_json doc;
  doc["format"] = kFormatName;
  doc["version"] = kRouteCacheVersion;
  doc["network_checksum"] = hex64(net.checksum());
  doc["max_routes"] = kMaxRoutes;
  auto agents = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rs.agent_count(); ++i) {
    nlohmann::ordered_json a;
    a["origin"] = net.original_id(dm[i].origin);
    a["destination"] = net.original_id(dm[i].destination);
    auto routes = nlohmann::ordered_json::array();
    for (const Route& r : rs.routes(i)) routes.push_back(r.links);
    a["routes"] = std::move(routes);
    agents.push_back(std::move(a));
  }
  doc["agents"] = std::move(agents);
  return doc.dump(1) + "\n";
}

RouteSet deserialize_route_set(std::string_view text, const Network& net, const DemandMatrix& dm) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("route cache is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName) {
      throw ParseError("not a route cache document", 0);
    }
    const int version = doc.at("version").get<int>();
    if (version != kRouteCacheVersion) {
      throw VersionError("route cache version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kRouteCacheVersion) +
                         ")");
    }
    if (doc.at("network_checksum").get<std::string>() != hex64(net.checksum())) {
      throw StructuralError("route cache was built for a different network");
    }
    const auto& agents = doc.at("agents");
    if (agents.size() != dm.size()) {
      throw StructuralError("route cache has " + std::to_string(agents.size()) +
                            " agents, demand has " + std::to_string(dm.size()));
    }
    std::vector<std::vector<Route>> per_agent;
    per_agent.reserve(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      if (a.at("origin").get<int>() != net.original_id(dm[i].origin) ||
          a.at("destination").get<int>() != net.original_id(dm[i].destination)) {
        throw StructuralError("route cache agent " + std::to_string(i) +
                              " has a different OD pair");
      }
      std::vector<Route> routes;
      for (const auto& r : a.at("routes")) routes.push_back(Route{r.get<std::vector<int>>()});
      per_agent.push_back(std::move(routes));
    }
    RouteSet rs(std::move(per_agent));
    rs.validate(net, dm);
    return rs;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed route cache: ") + e.what(), 0);
  }
}

void save_route_cache(const std::filesystem::path& path, const RouteSet& rs, const Network& net,
                      const DemandMatrix& dm) {
  write_file_atomic(path, serialize_route_set(rs, net, dm));
}

RouteSet load_route_cache(const std::filesystem::path& path, const Network& net,
                          const DemandMatrix& dm) {
  return deserialize_route_set(read_text_file(path), net, dm);
}

}  // namespace marlta
