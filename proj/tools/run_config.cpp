#include "run_config.hpp"

#include <cstdlib>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/route_cache.hpp"
#include "marlta/shortest_paths.hpp"

#ifndef MARLTA_DEFAULT_DATA_DIR
#define MARLTA_DEFAULT_DATA_DIR "data"
#endif

namespace marlta::cli {

namespace fs = std::filesystem;

Json default_config() {
  const TrainConfig t;
  const EnvConfig e;
  return Json{
      {"data_dir", ""},
      {"network", "SiouxFalls"},
      {"net_file", ""},
      {"trips_file", ""},
      {"node_file", ""},
      {"route_cache", ""},
      {"k", kMaxRoutes},
      {"objective", "ue"},
      {"demand", "fixed"},
      {"beta_low", e.beta_low},
      {"beta_high", e.beta_high},
      {"steps", e.steps_per_episode},
      {"prune_threshold", e.prune_threshold},
      {"use_coords", e.use_coords},
      {"seed", 0},
      {"output_dir", "out"},
      {"timing", true},
      {"solver", {{"method", "fw"}, {"max_iters", 50}, {"gap_tol", 0.0}, {"threads", 1}}},
      {"train",
       {{"variant", "DA"},
        {"hidden_size", t.hidden_size},
        {"layers", t.layers},
        {"lr", t.lr},
        {"clip", t.clip},
        {"minibatch", t.minibatch},
        {"gamma", t.gamma},
        {"gae_lambda", t.gae_lambda},
        {"epochs", t.epochs},
        {"ent_coef", t.ent_coef},
        {"vf_coef", t.vf_coef},
        {"max_grad_norm", t.max_grad_norm},
        {"workers", t.workers},
        {"episodes_per_worker", t.episodes_per_worker},
        {"iterations", t.iterations},
        {"checkpoint_every", t.checkpoint_every}}},
      {"eval", {{"checkpoint", ""}, {"episodes", 5}}},
  };
}

namespace {

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    return !(a.is_number_integer() || a.is_number_unsigned()) ||
           b.is_number_integer() || b.is_number_unsigned();
  }
  return a.type() == b.type();
}

}  // namespace

void merge_config(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config " + (where.empty() ? "root" : where) + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      merge_config(slot, value, path);
    } else if (!same_kind(slot, value)) {
      throw ConfigError("config key '" + path + "' has the wrong type");
    } else {
      slot = value;
    }
  }
}

Json load_config_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what(), 0);
  }
}

fs::path resolve_data_dir(const Json& cfg) {
  const std::string dir = cfg.at("data_dir").get<std::string>();
  if (!dir.empty()) return dir;
  if (const char* env = std::getenv("MARLTA_DATA_DIR"); env && *env) return env;
  return MARLTA_DEFAULT_DATA_DIR;
}

InputPaths resolve_inputs(const Json& cfg) {
  const fs::path data = resolve_data_dir(cfg);
  const std::string name = cfg.at("network").get<std::string>();
  auto pick = [&](const char* key, const char* suffix) {
    const std::string explicit_path = cfg.at(key).get<std::string>();
    if (!explicit_path.empty()) return fs::path(explicit_path);
    return data / name / (name + "_" + suffix + ".tntp");
  };
  InputPaths p{pick("net_file", "net"), pick("trips_file", "trips"), std::nullopt};
  for (const fs::path& f : {p.net, p.trips}) {
    if (!fs::is_regular_file(f)) throw IoError("input file not found: " + f.string());
  }
  const fs::path node = pick("node_file", "node");
  if (fs::is_regular_file(node)) {
    p.nodes = node;
  } else if (!cfg.at("node_file").get<std::string>().empty()) {
    throw IoError("input file not found: " + node.string());
  }
  return p;
}

Problem load_problem(const Json& cfg, bool need_routes) {
  const InputPaths paths = resolve_inputs(cfg);
  Problem p;
  p.net = load_network_file(paths.net.string());
  p.trips = load_trips_file(paths.trips.string(), &p.net);
  if (paths.nodes && cfg.at("use_coords").get<bool>()) {
    p.coords = load_node_file(paths.nodes->string());
    validate_coords(*p.coords, p.net);
  }
  if (!need_routes) return p;

  const int k = cfg.at("k").get<int>();
  if (k < 1 || k > kMaxRoutes) throw ConfigError("k must lie in [1, 6]");
  const std::string cache = cfg.at("route_cache").get<std::string>();
  if (!cache.empty() && fs::is_regular_file(cache)) {
    p.routes = load_route_cache(cache, p.net, p.trips.demand);
  } else {
    p.routes = build_route_sets(p.net, p.trips.demand, k);
    if (!cache.empty()) save_route_cache(cache, p.routes, p.net, p.trips.demand);
  }
  return p;
}

EnvConfig env_config(const Json& cfg) {
  EnvConfig e;
  e.steps_per_episode = cfg.at("steps").get<int>();
  e.prune_threshold = cfg.at("prune_threshold").get<double>();
  e.mode = cost_mode_from_string(cfg.at("objective").get<std::string>());
  e.demand_mode = demand_mode_from_string(cfg.at("demand").get<std::string>());
  e.beta_low = cfg.at("beta_low").get<double>();
  e.beta_high = cfg.at("beta_high").get<double>();
  e.use_coords = cfg.at("use_coords").get<bool>();
  e.prune = variant_from_string(cfg.at("train").at("variant").get<std::string>()).prune;
  e.validate();
  return e;
}

SolverOptions solver_options(const Json& cfg) {
  const Json& s = cfg.at("solver");
  SolverOptions o;
  o.mode = cost_mode_from_string(cfg.at("objective").get<std::string>());
  o.max_iters = s.at("max_iters").get<int>();
  o.gap_tol = s.at("gap_tol").get<double>();
  o.threads = s.at("threads").get<int>();
  o.record_time = cfg.at("timing").get<bool>();
  if (o.max_iters < 1) throw ConfigError("solver.max_iters must be positive");
  if (o.threads < 1) throw ConfigError("solver.threads must be positive");
  return o;
}

TrainConfig train_config(const Json& cfg) {
  const Json& t = cfg.at("train");
  TrainConfig c;
  const Variant v = variant_from_string(t.at("variant").get<std::string>());
  c.head = v.head;
  c.prune = v.prune;
  c.hidden_size = t.at("hidden_size").get<int>();
  c.layers = t.at("layers").get<int>();
  c.lr = t.at("lr").get<double>();
  c.clip = t.at("clip").get<double>();
  c.minibatch = t.at("minibatch").get<int>();
  c.gamma = t.at("gamma").get<double>();
  c.gae_lambda = t.at("gae_lambda").get<double>();
  c.epochs = t.at("epochs").get<int>();
  c.ent_coef = t.at("ent_coef").get<double>();
  c.vf_coef = t.at("vf_coef").get<double>();
  c.max_grad_norm = t.at("max_grad_norm").get<double>();
  c.workers = t.at("workers").get<int>();
  c.episodes_per_worker = t.at("episodes_per_worker").get<int>();
  c.iterations = t.at("iterations").get<int>();
  c.checkpoint_every = t.at("checkpoint_every").get<int>();
  const auto seed = cfg.at("seed").get<long long>();
  if (seed < 0) throw ConfigError("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.validate();
  return c;
}

}  // namespace marlta::cli
