#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "marlta/env.hpp"
#include "marlta/mlp.hpp"
#include "marlta/policy.hpp"

namespace marlta {

struct TrainConfig {
  int hidden_size = 512;
  int layers = 3;
  double lr = 4e-5;
  double clip = 0.2;
  int minibatch = 512;
  double gamma = 0.75;
  double gae_lambda = 0.95;
  int epochs = 4;
  double ent_coef = 0.0;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  int workers = 5;
  int episodes_per_worker = 1;
  int iterations = 100;
  int checkpoint_every = 10;
  std::uint64_t seed = 0;
  HeadKind head = HeadKind::kDirichlet;
  bool prune = true;  // must match the environment it trains in

  Variant variant() const { return {head, prune}; }
  std::vector<int> hidden() const { return std::vector<int>(static_cast<std::size_t>(layers), hidden_size); }
  // Throws ConfigError.
  void validate() const;
};

// One episode of one worker. Per-step arrays are indexed t * agents + i.
struct Trajectory {
  int agents = 0;
  int steps = 0;
  int worker = 0;
  int episode = 0;
  std::vector<int> route_counts;    // per agent
  std::vector<double> obs;          // x kObsDim
  std::vector<RawAction> actions;   // pre-prune sample (Dirichlet) or logits (softmax)
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> global_gaps;  // per step, after the step's loading
  std::vector<double> final_local_gaps;

  std::size_t index(int t, int agent) const {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(agents) +
           static_cast<std::size_t>(agent);
  }
};

// Random stream for (seed, worker, episode).
std::mt19937_64 episode_rng(std::uint64_t seed, int worker, int episode);

// Runs `workers` x `episodes_per_worker` stochastic episodes in parallel,
// one environment state per worker. Episode numbers start at
// `first_episode`. A failing worker aborts collection with its id.
std::vector<Trajectory> collect_rollouts(const ActorCritic& model, const Environment& env,
                                         int workers, int episodes_per_worker,
                                         std::uint64_t seed, int first_episode);

// Generalized advantage estimation per agent with a zero terminal value.
// Fills advantages and returns (= advantages + values); no normalization.
void compute_gae(Trajectory& traj, double gamma, double lambda);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double max_first_epoch_ratio_error = 0.0;  // |ratio - 1| in epoch 0, first minibatch
  int minibatches = 0;
  int skipped_minibatches = 0;
};

// Clipped-surrogate epochs over all records with advantages normalized over
// the whole batch. `shuffle` orders minibatches.
LossReport ppo_update(ActorCritic& model, Adam& opt, const std::vector<Trajectory>& batch,
                      const TrainConfig& cfg, std::mt19937_64& shuffle);

// Loss and its gradient (flat, actor-critic layout) on the given records,
// with advantages used as given. Exposed for gradient checks.
struct PpoLossTerms {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_error = 0.0;
  Eigen::VectorXd grad;
};

struct PpoRecord {
  const double* obs = nullptr;
  RawAction action{};
  int routes = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

PpoLossTerms ppo_loss(const ActorCritic& model, const std::vector<PpoRecord>& records,
                      const TrainConfig& cfg);

struct IterationMetrics {
  int iter = 0;
  int episodes = 0;
  double mean_reward = 0.0;  // mean per-agent episode return
  double min_gap = 0.0;      // mean over episodes of the per-episode minimum
  double final_gap = 0.0;    // mean gap at the last step
  double seconds = 0.0;
};

std::string metrics_csv(const std::vector<IterationMetrics>& rows);

struct TrainState {
  ActorCritic model;
  Adam optimizer;
  TrainConfig config;
  int iteration = 0;  // completed iterations
  int episodes = 0;   // completed episodes
  std::vector<IterationMetrics> history;
};

TrainState init_training(const TrainConfig& cfg);

struct TrainOutputs {
  std::filesystem::path metrics_csv;  // rewritten after every iteration when set
  std::filesystem::path checkpoint;   // written every checkpoint_every iterations and at the end
  bool record_time = true;
};

// Runs iterations until state.iteration == cfg.iterations and returns this
// call's rows. The metrics file is rewritten from state.history, so a resumed
// run keeps the rows recorded before its checkpoint. `log` receives each row.
std::vector<IterationMetrics> train_loop(TrainState& state, const Environment& env,
                                         const TrainOutputs& outputs,
                                         const std::function<void(const IterationMetrics&)>& log = {});

struct EvalReport {
  std::vector<double> episode_min_gaps;
  std::vector<std::vector<double>> episode_gaps;  // per episode, per step
  double mean_min_gap = 0.0;
};

// Demand of evaluation episode `episode`: the default demand in fixed mode,
// otherwise the scaled draw Environment::reset makes from episode_rng(seed, 0, episode).
DemandMatrix evaluation_demand(const EnvConfig& cfg, const DemandMatrix& dm, std::uint64_t seed,
                               int episode);

using PolicyFn = std::function<JointAction(const EnvState&, const std::vector<double>& obs)>;

// Deterministic-mode episodes on evaluation_demand(..., e).
EvalReport evaluate(const PolicyFn& policy, const Environment& env, int episodes,
                    std::uint64_t seed);
EvalReport evaluate_policy(const ActorCritic& model, const Environment& env, int episodes,
                           std::uint64_t seed);

inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainState& state);
// Throws VersionError or ParseError; returns a complete state or nothing.
TrainState parse_checkpoint(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace marlta
