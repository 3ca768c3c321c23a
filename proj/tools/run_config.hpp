#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "marlta/env.hpp"
#include "marlta/equilibrium.hpp"
#include "marlta/ippo.hpp"
#include "marlta/network.hpp"
#include "marlta/tntp.hpp"

namespace marlta::cli {

using Json = nlohmann::ordered_json;

// Every setting the subcommands read, with its default. Config files and
// flags override keys of this document; unknown keys are rejected.
Json default_config();

// Recursively copies `patch` over `base`. Throws ConfigError on keys that
// `base` lacks or on a value of the wrong JSON type.
void merge_config(Json& base, const Json& patch, const std::string& where = "");

Json load_config_file(const std::filesystem::path& path);

// Fixture root: explicit setting, then $MARLTA_DATA_DIR, then the build-time default.
std::filesystem::path resolve_data_dir(const Json& cfg);

struct InputPaths {
  std::filesystem::path net;
  std::filesystem::path trips;
  std::optional<std::filesystem::path> nodes;  // unset when no node file is available
};

// Explicit file settings win; otherwise <data>/<name>/<name>_{net,trips,node}.tntp.
// Throws IoError naming the first required file that does not exist.
InputPaths resolve_inputs(const Json& cfg);

// Network, demand, optional coordinates and route sets, ready for use.
struct Problem {
  Network net;
  TripTable trips;
  std::optional<NodeCoords> coords;
  RouteSet routes;
};

// Routes come from the configured cache when it exists, otherwise they are
// built (and saved to the cache path when one is set).
Problem load_problem(const Json& cfg, bool need_routes);

EnvConfig env_config(const Json& cfg);
SolverOptions solver_options(const Json& cfg);
TrainConfig train_config(const Json& cfg);

}  // namespace marlta::cli
