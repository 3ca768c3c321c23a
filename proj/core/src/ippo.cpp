#include "marlta/ippo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/policy_heads.hpp"
#include "parallel.hpp"

namespace marlta {

void TrainConfig::validate() const {
  if (hidden_size < 1 || layers < 1) throw ConfigError("hidden_size and layers must be positive");
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("clip must lie in (0, 1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (minibatch < 1 || epochs < 1) throw ConfigError("minibatch and epochs must be positive");
  if (workers < 1 || episodes_per_worker < 1) throw ConfigError("workers must be at least 1");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be positive");
  if (!(max_grad_norm > 0.0) || !(vf_coef >= 0.0) || !(ent_coef >= 0.0)) {
    throw ConfigError("loss coefficients must be non-negative and max_grad_norm positive");
  }
}

std::mt19937_64 episode_rng(std::uint64_t seed, int worker, int episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), static_cast<std::uint32_t>(episode)};
  return std::mt19937_64(seq);
}

namespace {

std::mt19937_64 update_rng(std::uint64_t seed, int iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x9e3779b9u, static_cast<std::uint32_t>(iteration)};
  return std::mt19937_64(seq);
}

Trajectory run_episode(const ActorCritic& model, const Environment& env, std::uint64_t seed,
                       int worker, int episode) {
  std::mt19937_64 rng = episode_rng(seed, worker, episode);
  EnvState state = env.reset(rng);
  const int n = static_cast<int>(env.agent_count());
  const int steps = env.config().steps_per_episode;

  Trajectory tr;
  tr.agents = n;
  tr.steps = steps;
  tr.worker = worker;
  tr.episode = episode;
  for (int i = 0; i < n; ++i) tr.route_counts.push_back(env.routes().route_count(static_cast<std::size_t>(i)));
  const auto records = static_cast<std::size_t>(n) * static_cast<std::size_t>(steps);
  tr.obs.reserve(records * kObsDim);
  tr.actions.reserve(records);
  for (int t = 0; t < steps; ++t) {
    const std::vector<double> obs = env.observe_all(state);
    ActOutput out = act(model, obs, env.routes(), &rng);
    const StepResult res = env.step(state, out.actions);
    tr.obs.insert(tr.obs.end(), obs.begin(), obs.end());
    tr.actions.insert(tr.actions.end(), out.raw.begin(), out.raw.end());
    tr.log_probs.insert(tr.log_probs.end(), out.log_probs.begin(), out.log_probs.end());
    tr.values.insert(tr.values.end(), out.values.begin(), out.values.end());
    tr.rewards.insert(tr.rewards.end(), res.rewards.begin(), res.rewards.end());
    tr.global_gaps.push_back(res.info.global_gap);
  }
  tr.final_local_gaps = state.local_gaps;
  return tr;
}

}  // namespace

std::vector<Trajectory> collect_rollouts(const ActorCritic& model, const Environment& env,
                                         int workers, int episodes_per_worker,
                                         std::uint64_t seed, int first_episode) {
  if (workers < 1 || episodes_per_worker < 1) throw ConfigError("need at least one worker");
  std::vector<Trajectory> out(static_cast<std::size_t>(workers * episodes_per_worker));
  std::vector<std::string> failures(static_cast<std::size_t>(workers));
  detail::parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
    try {
      for (int e = 0; e < episodes_per_worker; ++e) {
        const int slot = static_cast<int>(w) * episodes_per_worker + e;
        out[static_cast<std::size_t>(slot)] =
            run_episode(model, env, seed, static_cast<int>(w), first_episode + slot);
      }
    } catch (const std::exception& ex) {
      failures[w] = ex.what();
    }
  });
  for (std::size_t w = 0; w < failures.size(); ++w) {
    if (!failures[w].empty()) {
      throw Error("rollout worker " + std::to_string(w) + " failed: " + failures[w]);
    }
  }
  return out;
}

void compute_gae(Trajectory& traj, double gamma, double lambda) {
  const std::size_t records = traj.rewards.size();
  traj.advantages.assign(records, 0.0);
  traj.returns.assign(records, 0.0);
  for (int i = 0; i < traj.agents; ++i) {
    double running = 0.0;
    for (int t = traj.steps - 1; t >= 0; --t) {
      const std::size_t k = traj.index(t, i);
      const double next_value = t + 1 < traj.steps ? traj.values[traj.index(t + 1, i)] : 0.0;
      const double delta = traj.rewards[k] + gamma * next_value - traj.values[k];
      running = delta + gamma * lambda * running;
      traj.advantages[k] = running;
      traj.returns[k] = running + traj.values[k];
    }
  }
}

PpoLossTerms ppo_loss(const ActorCritic& model, const std::vector<PpoRecord>& records,
                      const TrainConfig& cfg) {
  const auto m = static_cast<Eigen::Index>(records.size());
  if (m == 0) throw ContractViolation("empty minibatch");
  Eigen::MatrixXd x(kObsDim, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    x.col(j) = Eigen::Map<const Eigen::VectorXd>(records[static_cast<std::size_t>(j)].obs, kObsDim);
  }
  ForwardCache pcache;
  ForwardCache vcache;
  const Eigen::MatrixXd out = model.policy.forward(x, &pcache);
  const Eigen::MatrixXd vout = model.value.forward(x, &vcache);

  const double inv_m = 1.0 / static_cast<double>(m);
  Eigen::MatrixXd gout = Eigen::MatrixXd::Zero(kMaxRoutes, m);
  Eigen::MatrixXd gval(1, m);
  Eigen::VectorXd glogstd = Eigen::VectorXd::Zero(kMaxRoutes);
  PpoLossTerms terms;
  int clipped = 0;

  for (Eigen::Index j = 0; j < m; ++j) {
    const PpoRecord& rec = records[static_cast<std::size_t>(j)];
    const auto k = static_cast<std::size_t>(rec.routes);
    std::vector<double> head_out(k);
    for (std::size_t r = 0; r < k; ++r) head_out[r] = out(static_cast<Eigen::Index>(r), j);
    const std::span<const double> action(rec.action.data(), k);

    double logp = 0.0;
    double ent = 0.0;
    std::vector<double> dlogp_dout(k), dent_dout(k, 0.0);
    std::vector<double> dlogp_dls, dent_dls;
    if (model.head == HeadKind::kDirichlet) {
      const std::vector<double> c = softplus_positive(head_out);
      const DirichletEval ev = dirichlet_evaluate(c, action);
      logp = ev.log_prob;
      ent = ev.entropy;
      for (std::size_t r = 0; r < k; ++r) {
        const double dc_dx = sigmoid(head_out[r]);
        dlogp_dout[r] = ev.dlogp_dc[r] * dc_dx;
        dent_dout[r] = ev.dentropy_dc[r] * dc_dx;
      }
    } else {
      const std::span<const double> ls(model.log_std.data(), k);
      GaussianEval ev = gaussian_evaluate(head_out, ls, action);
      logp = ev.log_prob;
      ent = ev.entropy;
      dlogp_dout = std::move(ev.dlogp_dmean);
      dlogp_dls = std::move(ev.dlogp_dlogstd);
      dent_dls = std::move(ev.dentropy_dlogstd);
    }

    const double ratio = std::exp(logp - rec.old_log_prob);
    const double a = rec.advantage;
    const double unclipped = ratio * a;
    const double clipped_val = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
    terms.policy_loss -= std::min(unclipped, clipped_val) * inv_m;
    terms.entropy += ent * inv_m;
    terms.max_ratio_error = std::max(terms.max_ratio_error, std::abs(ratio - 1.0));
    if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;

    const double dl_dlogp = unclipped <= clipped_val ? -a * ratio * inv_m : 0.0;
    const double dl_dent = -cfg.ent_coef * inv_m;
    for (std::size_t r = 0; r < k; ++r) {
      gout(static_cast<Eigen::Index>(r), j) = dl_dlogp * dlogp_dout[r] + dl_dent * dent_dout[r];
    }
    for (std::size_t r = 0; r < dlogp_dls.size(); ++r) {
      glogstd(static_cast<Eigen::Index>(r)) += dl_dlogp * dlogp_dls[r] + dl_dent * dent_dls[r];
    }

    const double err = vout(0, j) - rec.ret;
    terms.value_loss += err * err * inv_m;
    gval(0, j) = cfg.vf_coef * 2.0 * err * inv_m;
  }
  terms.loss = terms.policy_loss + cfg.vf_coef * terms.value_loss - cfg.ent_coef * terms.entropy;
  terms.clip_fraction = static_cast<double>(clipped) * inv_m;

  const Eigen::VectorXd gp = model.policy.flatten(model.policy.backward(pcache, gout));
  const Eigen::VectorXd gv = model.value.flatten(model.value.backward(vcache, gval));
  terms.grad.resize(static_cast<Eigen::Index>(model.parameter_count()));
  terms.grad << gp, glogstd, gv;
  return terms;
}

LossReport ppo_update(ActorCritic& model, Adam& opt, const std::vector<Trajectory>& batch,
                      const TrainConfig& cfg, std::mt19937_64& shuffle) {
  std::vector<PpoRecord> records;
  for (const Trajectory& tr : batch) {
    if (tr.advantages.size() != tr.rewards.size()) {
      throw ContractViolation("trajectory has no advantages; run compute_gae first");
    }
    for (int t = 0; t < tr.steps; ++t) {
      for (int i = 0; i < tr.agents; ++i) {
        const std::size_t k = tr.index(t, i);
        records.push_back({tr.obs.data() + k * kObsDim, tr.actions[k],
                           tr.route_counts[static_cast<std::size_t>(i)], tr.log_probs[k],
                           tr.advantages[k], tr.returns[k]});
      }
    }
  }
  LossReport report;
  if (records.empty()) return report;

  double mean = 0.0;
  for (const PpoRecord& r : records) mean += r.advantage;
  mean /= static_cast<double>(records.size());
  double var = 0.0;
  for (const PpoRecord& r : records) var += (r.advantage - mean) * (r.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(records.size()));
  for (PpoRecord& r : records) r.advantage = (r.advantage - mean) / (sd + 1e-8);

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PpoRecord> mb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
      mb.clear();
      for (std::size_t q = start; q < end; ++q) mb.push_back(records[order[q]]);
      PpoLossTerms terms = ppo_loss(model, mb, cfg);
      if (epoch == 0 && start == 0) report.max_first_epoch_ratio_error = terms.max_ratio_error;
      if (!std::isfinite(terms.loss) || !terms.grad.allFinite()) {
        ++report.skipped_minibatches;
        continue;
      }
      const double norm = terms.grad.norm();
      if (norm > cfg.max_grad_norm) terms.grad *= cfg.max_grad_norm / norm;
      Eigen::VectorXd params = model.flat();
      if (!opt.step(params, terms.grad)) {
        ++report.skipped_minibatches;
        continue;
      }
      model.set_flat(params);
      ++report.minibatches;
      report.policy_loss += terms.policy_loss;
      report.value_loss += terms.value_loss;
      report.entropy += terms.entropy;
      report.clip_fraction += terms.clip_fraction;
    }
  }
  if (report.minibatches > 0) {
    const double inv = 1.0 / report.minibatches;
    report.policy_loss *= inv;
    report.value_loss *= inv;
    report.entropy *= inv;
    report.clip_fraction *= inv;
  }
  return report;
}

std::string metrics_csv(const std::vector<IterationMetrics>& rows) {
  std::ostringstream out;
  out << "iter,episodes,mean_reward,min_gap,final_gap,seconds\n";
  for (const IterationMetrics& r : rows) {
    out << r.iter << ',' << r.episodes << ',' << format_double(r.mean_reward) << ','
        << format_double(r.min_gap) << ',' << format_double(r.final_gap) << ','
        << format_double(r.seconds) << '\n';
  }
  return out.str();
}

TrainState init_training(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  std::mt19937_64 init = episode_rng(cfg.seed, -1, -1);
  s.model = ActorCritic(cfg.head, cfg.hidden(), init);
  s.optimizer = Adam(s.model.parameter_count(), AdamConfig{cfg.lr});
  return s;
}

std::vector<IterationMetrics> train_loop(TrainState& state, const Environment& env,
                                         const TrainOutputs& outputs,
                                         const std::function<void(const IterationMetrics&)>& log) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  if (state.model.head != cfg.head) throw ConfigError("checkpoint head differs from the config");
  if (env.config().prune != cfg.prune) {
    throw ConfigError("environment pruning does not match the training variant");
  }
  using Clock = std::chrono::steady_clock;
  std::vector<IterationMetrics> rows;
  while (state.iteration < cfg.iterations) {
    const auto start = Clock::now();
    std::vector<Trajectory> batch = collect_rollouts(state.model, env, cfg.workers,
                                                     cfg.episodes_per_worker, cfg.seed,
                                                     state.episodes);
    IterationMetrics row;
    row.iter = state.iteration + 1;
    for (Trajectory& tr : batch) {
      compute_gae(tr, cfg.gamma, cfg.gae_lambda);
      double ret = 0.0;
      for (double r : tr.rewards) ret += r;
      row.mean_reward += ret / tr.agents;
      row.min_gap += *std::min_element(tr.global_gaps.begin(), tr.global_gaps.end());
      row.final_gap += tr.global_gaps.back();
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    row.mean_reward *= inv;
    row.min_gap *= inv;
    row.final_gap *= inv;

    std::mt19937_64 shuffle = update_rng(cfg.seed, state.iteration);
    ppo_update(state.model, state.optimizer, batch, cfg, shuffle);

    ++state.iteration;
    state.episodes += static_cast<int>(batch.size());
    row.episodes = state.episodes;
    row.seconds = outputs.record_time
                      ? std::chrono::duration<double>(Clock::now() - start).count()
                      : 0.0;
    rows.push_back(row);
    state.history.push_back(row);
    if (log) log(row);
    if (!outputs.metrics_csv.empty()) write_file_atomic(outputs.metrics_csv, metrics_csv(state.history));
    const bool last = state.iteration == cfg.iterations;
    if (!outputs.checkpoint.empty() && (last || state.iteration % cfg.checkpoint_every == 0)) {
      save_checkpoint(outputs.checkpoint, state);
    }
  }
  return rows;
}

DemandMatrix evaluation_demand(const EnvConfig& cfg, const DemandMatrix& dm, std::uint64_t seed,
                               int episode) {
  if (cfg.demand_mode == DemandMode::kFixed) return dm;
  std::mt19937_64 rng = episode_rng(seed, 0, episode);
  return scale_demand(dm, cfg.beta_low, cfg.beta_high, rng);
}

EvalReport evaluate(const PolicyFn& policy, const Environment& env, int episodes,
                    std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  EvalReport rep;
  for (int e = 0; e < episodes; ++e) {
    EnvState state =
        env.reset_with_demand(evaluation_demand(env.config(), env.default_demand(), seed, e));
    std::vector<double> gaps;
    for (int t = 0; t < env.config().steps_per_episode; ++t) {
      const std::vector<double> obs = env.observe_all(state);
      gaps.push_back(env.step(state, policy(state, obs)).info.global_gap);
    }
    rep.episode_min_gaps.push_back(*std::min_element(gaps.begin(), gaps.end()));
    rep.episode_gaps.push_back(std::move(gaps));
  }
  rep.mean_min_gap = std::accumulate(rep.episode_min_gaps.begin(), rep.episode_min_gaps.end(), 0.0) /
                     static_cast<double>(episodes);
  return rep;
}

EvalReport evaluate_policy(const ActorCritic& model, const Environment& env, int episodes,
                           std::uint64_t seed) {
  return evaluate(
      [&](const EnvState&, const std::vector<double>& obs) {
        return act(model, obs, env.routes(), nullptr).actions;
      },
      env, episodes, seed);
}

}  // namespace marlta
