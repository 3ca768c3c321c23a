// marlta: command-line driver for network inspection, route sets,
// conventional assignment solvers and multi-agent routing policies.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "marlta/equilibrium.hpp"
#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/ippo.hpp"
#include "marlta/route_cache.hpp"
#include "marlta/shortest_paths.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace marlta;
using cli::Json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Flags that override one key of the resolved config, applied after the
// config file so the command line always wins.
class Overrides {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& pointer,
              const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    entries_.push_back({opt, [value, pointer](Json& cfg) {
                          cfg[Json::json_pointer(pointer)] = *value;
                        }});
    return opt;
  }

  void flag(CLI::App* app, const std::string& flag, const std::string& pointer, Json value,
            const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, help);
    entries_.push_back({opt, [value, pointer](Json& cfg) {
                          cfg[Json::json_pointer(pointer)] = value;
                        }});
  }

  void apply(Json& cfg) const {
    for (const Entry& e : entries_) {
      if (e.opt->count() > 0) e.apply(cfg);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(Json&)> apply;
  };
  std::vector<Entry> entries_;
};

struct Command {
  explicit Command(CLI::App* sub) : app(sub) {}

  CLI::App* app;
  std::string config_file;
  Overrides overrides;
  std::function<int(const Json&)> run;
};

void add_common(Command& c) {
  c.app->add_option("-c,--config", c.config_file, "JSON config file (see docs/config.md)")
      ->check(CLI::ExistingFile);
  Overrides& o = c.overrides;
  o.option<std::string>(c.app, "--data-dir", "/data_dir", "fixture root (default $MARLTA_DATA_DIR)");
  o.option<std::string>(c.app, "--network", "/network", "fixture name under the data root");
  o.option<std::string>(c.app, "--net", "/net_file", "TNTP network file");
  o.option<std::string>(c.app, "--trips", "/trips_file", "TNTP trips file");
  o.option<std::string>(c.app, "--nodes", "/node_file", "TNTP node coordinate file");
  o.flag(c.app, "--no-coords", "/use_coords", false, "ignore node coordinates");
}

void add_routes(Command& c) {
  c.overrides.option<std::string>(c.app, "--routes", "/route_cache",
                                  "route cache; built and saved when absent");
}

void add_run(Command& c) {
  Overrides& o = c.overrides;
  o.option<std::string>(c.app, "-o,--output-dir", "/output_dir", "directory for outputs");
  o.option<long long>(c.app, "--seed", "/seed", "random seed");
  o.option<std::string>(c.app, "--objective", "/objective", "ue or so")
      ->check(CLI::IsMember({"ue", "so"}));
  o.option<std::string>(c.app, "--demand", "/demand", "fixed or variable")
      ->check(CLI::IsMember({"fixed", "variable"}));
  o.option<double>(c.app, "--beta-low", "/beta_low", "lower demand multiplier");
  o.option<double>(c.app, "--beta-high", "/beta_high", "upper demand multiplier");
  o.flag(c.app, "--no-timing", "/timing", false, "write 0 in timing columns");
}

fs::path prepare_output_dir(const Json& cfg) {
  const fs::path dir = cfg.at("output_dir").get<std::string>();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
  return dir;
}

void echo_config(const fs::path& dir, const Json& cfg) {
  write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
}

std::uint64_t seed_of(const Json& cfg) {
  const auto seed = cfg.at("seed").get<long long>();
  if (seed < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(seed);
}

int run_inspect(const Json& cfg) {
  const cli::Problem p = cli::load_problem(cfg, false);
  const DemandMatrix& dm = p.trips.demand;
  std::cout << "nodes " << p.net.node_count() << "\n"
            << "links " << p.net.link_count() << "\n"
            << "zones " << p.net.zone_count() << "\n"
            << "first_thru_node " << p.net.original_id(p.net.first_thru_node()) << "\n"
            << "od_pairs " << dm.size() << "\n"
            << "total_demand " << format_double(dm.total()) << "\n";
  if (p.trips.total_od_flow) {
    std::cout << "declared_total_od_flow " << format_double(*p.trips.total_od_flow) << "\n";
  }
  std::cout << "coordinates " << (p.coords ? (covers_network(*p.coords, p.net) ? "complete" : "partial") : "none")
            << "\n"
            << "checksum " << std::hex << p.net.checksum() << std::dec << "\n";
  return 0;
}

int run_paths(const Json& cfg, const std::string& out_file) {
  Json c = cfg;
  c["route_cache"] = "";
  const cli::Problem p = cli::load_problem(c, true);
  fs::path out = out_file;
  if (out.empty()) {
    const std::string cache = cfg.at("route_cache").get<std::string>();
    out = cache.empty() ? prepare_output_dir(cfg) / "routes.json" : fs::path(cache);
  }
  save_route_cache(out, p.routes, p.net, p.trips.demand);
  std::size_t total = 0;
  int fewer = 0;
  for (std::size_t i = 0; i < p.routes.agent_count(); ++i) {
    total += static_cast<std::size_t>(p.routes.route_count(i));
    if (p.routes.route_count(i) < cfg.at("k").get<int>()) ++fewer;
  }
  std::cout << "agents " << p.routes.agent_count() << "\nroutes " << total
            << "\nagents_below_k " << fewer << "\nwritten " << out.string() << "\n";
  return 0;
}

int run_solve(const Json& cfg) {
  const cli::Problem p = cli::load_problem(cfg, false);
  const EnvConfig env = cli::env_config(cfg);
  const SolverOptions opt = cli::solver_options(cfg);
  const DemandMatrix demand = evaluation_demand(env, p.trips.demand, seed_of(cfg), 0);
  const std::string method = cfg.at("solver").at("method").get<std::string>();
  SolverResult res;
  if (method == "fw") {
    res = solve_fw(p.net, demand, opt);
  } else if (method == "msa") {
    res = solve_msa(p.net, demand, opt);
  } else {
    throw ConfigError("solver.method must be msa or fw, got '" + method + "'");
  }
  const fs::path dir = prepare_output_dir(cfg);
  echo_config(dir, cfg);
  write_file_atomic(dir / "trace.csv", res.trace.to_csv());
  const TraceRow& last = res.trace.rows.back();
  std::cout << method << " " << cfg.at("objective").get<std::string>() << " iterations "
            << last.iter << " gap " << format_double(last.gap) << " objective "
            << format_double(last.objective) << "\n";
  return 0;
}

Environment make_env(const cli::Problem& p, const EnvConfig& ec) {
  return Environment(p.net, p.routes, p.trips.demand, p.coords ? &*p.coords : nullptr, ec);
}

int run_train(const Json& cfg_in, const std::string& resume) {
  Json cfg = cfg_in;
  TrainConfig tc = cli::train_config(cfg);
  TrainState state;
  if (!resume.empty()) {
    if (!fs::is_regular_file(resume)) throw IoError("checkpoint not found: " + resume);
    state = load_checkpoint(resume);
    if (state.config.hidden() != tc.hidden() || state.config.head != tc.head ||
        state.config.prune != tc.prune) {
      throw ConfigError("checkpoint " + resume + " was trained with a different variant or architecture");
    }
    // Only the stopping point and checkpoint cadence may change on resume.
    const int iterations = tc.iterations;
    const int every = tc.checkpoint_every;
    tc = state.config;
    tc.iterations = iterations;
    tc.checkpoint_every = every;
    state.config = tc;
    cfg["seed"] = tc.seed;
    cfg["train"]["lr"] = tc.lr;
  } else {
    state = init_training(tc);
  }
  const cli::Problem p = cli::load_problem(cfg, true);
  const Environment env = make_env(p, cli::env_config(cfg));

  const fs::path dir = prepare_output_dir(cfg);
  echo_config(dir, cfg);
  TrainOutputs outputs{dir / "metrics.csv", dir / "checkpoint.ckpt", cfg.at("timing").get<bool>()};
  train_loop(state, env, outputs, [](const IterationMetrics& m) {
    std::cerr << "iter " << m.iter << " episodes " << m.episodes << " min_gap "
              << format_double(m.min_gap) << " final_gap " << format_double(m.final_gap) << "\n";
  });
  if (state.history.empty()) write_file_atomic(outputs.metrics_csv, metrics_csv(state.history));
  if (!fs::exists(outputs.checkpoint)) save_checkpoint(outputs.checkpoint, state);
  std::cout << "trained " << state.iteration << " iterations, checkpoint "
            << outputs.checkpoint.string() << "\n";
  return 0;
}

TrainState load_checkpoint_arg(const std::string& path) {
  if (path.empty()) throw ConfigError("eval needs --checkpoint");
  if (!fs::is_regular_file(path)) throw IoError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

int run_eval(const Json& cfg_in) {
  Json cfg = cfg_in;
  const TrainState state = load_checkpoint_arg(cfg.at("eval").at("checkpoint").get<std::string>());
  cfg["train"]["variant"] = variant_name(state.config.variant());
  const cli::Problem p = cli::load_problem(cfg, true);
  const Environment env = make_env(p, cli::env_config(cfg));
  const int episodes = cfg.at("eval").at("episodes").get<int>();
  const EvalReport rep = evaluate_policy(state.model, env, episodes, seed_of(cfg));

  const fs::path dir = prepare_output_dir(cfg);
  echo_config(dir, cfg);
  std::ostringstream csv;
  csv << "episode,step,global_gap\n";
  for (std::size_t e = 0; e < rep.episode_gaps.size(); ++e) {
    for (std::size_t t = 0; t < rep.episode_gaps[e].size(); ++t) {
      csv << e << ',' << t + 1 << ',' << format_double(rep.episode_gaps[e][t]) << '\n';
    }
  }
  write_file_atomic(dir / "eval.csv", csv.str());
  const Json summary{{"variant", variant_name(state.config.variant())},
                     {"episodes", episodes},
                     {"episode_min_gaps", rep.episode_min_gaps},
                     {"mean_min_gap", rep.mean_min_gap}};
  write_file_atomic(dir / "eval.json", summary.dump(2) + "\n");
  std::cout << "mean_min_gap " << format_double(rep.mean_min_gap) << "\n";
  return 0;
}

int run_compare(const Json& cfg_in) {
  Json cfg = cfg_in;
  std::optional<TrainState> policy;
  const std::string ckpt = cfg.at("eval").at("checkpoint").get<std::string>();
  if (!ckpt.empty()) {
    policy = load_checkpoint_arg(ckpt);
    cfg["train"]["variant"] = variant_name(policy->config.variant());
  }
  const cli::Problem p = cli::load_problem(cfg, policy.has_value());
  const EnvConfig ec = cli::env_config(cfg);
  const int steps = ec.steps_per_episode;
  const int episodes = cfg.at("eval").at("episodes").get<int>();
  if (episodes < 1) throw ConfigError("eval.episodes must be positive");
  const std::uint64_t seed = seed_of(cfg);

  SolverOptions opt = cli::solver_options(cfg);
  opt.max_iters = steps;
  opt.gap_tol = 0.0;
  std::vector<double> msa(static_cast<std::size_t>(steps), 0.0);
  std::vector<double> fw(msa.size(), 0.0);
  std::vector<double> marl(msa.size(), 0.0);
  for (int e = 0; e < episodes; ++e) {
    const DemandMatrix demand = evaluation_demand(ec, p.trips.demand, seed, e);
    const SolverResult m = solve_msa(p.net, demand, opt);
    const SolverResult f = solve_fw(p.net, demand, opt);
    for (int t = 0; t < steps; ++t) {
      msa[static_cast<std::size_t>(t)] += m.trace.rows[static_cast<std::size_t>(t)].gap / episodes;
      fw[static_cast<std::size_t>(t)] += f.trace.rows[static_cast<std::size_t>(t)].gap / episodes;
    }
  }
  if (policy) {
    const Environment env = make_env(p, ec);
    const EvalReport rep = evaluate_policy(policy->model, env, episodes, seed);
    for (const auto& gaps : rep.episode_gaps) {
      for (int t = 0; t < steps; ++t) marl[static_cast<std::size_t>(t)] += gaps[static_cast<std::size_t>(t)] / episodes;
    }
  }

  std::ostringstream csv;
  csv << "step,msa,fw" << (policy ? ",marl" : "") << '\n';
  for (int t = 0; t < steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    csv << t + 1 << ',' << format_double(msa[i]) << ',' << format_double(fw[i]);
    if (policy) csv << ',' << format_double(marl[i]);
    csv << '\n';
  }
  const fs::path dir = prepare_output_dir(cfg);
  echo_config(dir, cfg);
  write_file_atomic(dir / "compare.csv", csv.str());
  std::cout << "step " << steps << " msa " << format_double(msa.back()) << " fw "
            << format_double(fw.back());
  if (policy) std::cout << " marl " << format_double(marl.back());
  std::cout << "\n";
  return 0;
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const IoError*>(&e)) return "I/O error";
  if (dynamic_cast<const ParseError*>(&e)) return "parse error";
  if (dynamic_cast<const ConfigError*>(&e)) return "config error";
  if (dynamic_cast<const VersionError*>(&e)) return "version error";
  if (dynamic_cast<const StructuralError*>(&e)) return "structural error";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation error";
  if (dynamic_cast<const ContractViolation*>(&e)) return "contract violation";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic assignment with conventional solvers and multi-agent routing policies"};
  app.require_subcommand(1);

  Command inspect(app.add_subcommand("inspect", "print network and demand statistics"));
  add_common(inspect);
  inspect.run = run_inspect;

  Command paths(app.add_subcommand("paths", "build candidate route sets and write a route cache"));
  add_common(paths);
  add_routes(paths);
  paths.overrides.option<std::string>(paths.app, "-o,--output-dir", "/output_dir", "directory for outputs");
  paths.overrides.option<int>(paths.app, "--k", "/k", "routes per OD pair (1-6)");
  std::string paths_out;
  paths.app->add_option("--out", paths_out, "route cache file to write");
  paths.run = [&paths_out](const Json& cfg) { return run_paths(cfg, paths_out); };

  Command solve(app.add_subcommand("solve", "run MSA or Frank-Wolfe"));
  add_common(solve);
  add_run(solve);
  solve.overrides.option<std::string>(solve.app, "--method", "/solver/method", "msa or fw")
      ->check(CLI::IsMember({"msa", "fw"}));
  solve.overrides.option<int>(solve.app, "--max-iters", "/solver/max_iters", "iteration limit");
  solve.overrides.option<double>(solve.app, "--gap-tol", "/solver/gap_tol", "stop at this relative gap");
  solve.overrides.option<int>(solve.app, "--threads", "/solver/threads", "shortest-path threads");
  solve.run = run_solve;

  auto add_env = [](Command& c) {
    c.overrides.option<int>(c.app, "--steps", "/steps", "steps per episode");
    c.overrides.option<double>(c.app, "--prune-threshold", "/prune_threshold", "pruning threshold");
  };

  Command train(app.add_subcommand("train", "train a shared routing policy with IPPO"));
  add_common(train);
  add_routes(train);
  add_run(train);
  add_env(train);
  {
    Overrides& o = train.overrides;
    CLI::App* a = train.app;
    o.option<std::string>(a, "--variant", "/train/variant", "S, SA, D or DA")
        ->check(CLI::IsMember({"S", "SA", "D", "DA"}));
    o.option<int>(a, "--hidden-size", "/train/hidden_size", "hidden layer width");
    o.option<int>(a, "--layers", "/train/layers", "hidden layer count");
    o.option<double>(a, "--lr", "/train/lr", "Adam learning rate");
    o.option<double>(a, "--clip", "/train/clip", "PPO clip range");
    o.option<int>(a, "--minibatch", "/train/minibatch", "minibatch size");
    o.option<double>(a, "--gamma", "/train/gamma", "discount");
    o.option<double>(a, "--gae-lambda", "/train/gae_lambda", "GAE lambda");
    o.option<int>(a, "--epochs", "/train/epochs", "epochs per update");
    o.option<double>(a, "--ent-coef", "/train/ent_coef", "entropy coefficient");
    o.option<double>(a, "--vf-coef", "/train/vf_coef", "value loss coefficient");
    o.option<double>(a, "--max-grad-norm", "/train/max_grad_norm", "gradient norm clip");
    o.option<int>(a, "--workers", "/train/workers", "rollout workers");
    o.option<int>(a, "--episodes-per-worker", "/train/episodes_per_worker", "episodes per worker and iteration");
    o.option<int>(a, "--iterations", "/train/iterations", "total training iterations");
    o.option<int>(a, "--checkpoint-every", "/train/checkpoint_every", "checkpoint cadence in iterations");
  }
  std::string resume;
  train.app->add_option("--resume", resume, "continue from a checkpoint");
  train.run = [&resume](const Json& cfg) { return run_train(cfg, resume); };

  Command eval(app.add_subcommand("eval", "evaluate a checkpoint in deterministic mode"));
  add_common(eval);
  add_routes(eval);
  add_run(eval);
  add_env(eval);
  eval.overrides.option<std::string>(eval.app, "--checkpoint", "/eval/checkpoint", "checkpoint file");
  eval.overrides.option<int>(eval.app, "--episodes", "/eval/episodes", "evaluation episodes");
  eval.run = run_eval;

  Command compare(app.add_subcommand("compare", "gap per step for MSA, FW and optionally a policy"));
  add_common(compare);
  add_routes(compare);
  add_run(compare);
  add_env(compare);
  compare.overrides.option<std::string>(compare.app, "--checkpoint", "/eval/checkpoint", "policy checkpoint");
  compare.overrides.option<int>(compare.app, "--episodes", "/eval/episodes", "demand draws to average");
  compare.run = run_compare;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (Command* c : {&inspect, &paths, &solve, &train, &eval, &compare}) {
    if (!c->app->parsed()) continue;
    try {
      Json cfg = cli::default_config();
      if (!c->config_file.empty()) cli::merge_config(cfg, cli::load_config_file(c->config_file));
      c->overrides.apply(cfg);
      return c->run(cfg);
    } catch (const Error& e) {
      std::cerr << "marlta " << c->app->get_name() << ": " << error_kind(e) << ": " << e.what() << "\n";
      return kExitFailure;
    } catch (const std::exception& e) {
      std::cerr << "marlta " << c->app->get_name() << ": " << e.what() << "\n";
      return kExitFailure;
    }
  }
  return kExitUsage;
}
