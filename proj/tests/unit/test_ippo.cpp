#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "marlta/equilibrium.hpp"
#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/ippo.hpp"
#include "marlta/loading.hpp"
#include "marlta/shortest_paths.hpp"
#include "marlta/tntp.hpp"
#include "oracles.hpp"

using namespace marlta;
namespace fs = std::filesystem;

namespace {

struct Ow {
  Network net;
  DemandMatrix dm;
  NodeCoords coords;
  RouteSet rs;
  Ow() {
    const std::string dir = testing::data_dir() + "/OW13/OW13_";
    net = load_network_file(dir + "net.tntp");
    dm = load_trips_file(dir + "trips.tntp", &net).demand;
    coords = load_node_file(dir + "node.tntp");
    rs = build_route_sets(net, dm);
  }
};

const Ow& ow() {
  static const Ow o;
  return o;
}

EnvConfig short_env(bool prune = true) {
  EnvConfig cfg;
  cfg.steps_per_episode = 8;
  cfg.prune = prune;
  return cfg;
}

TrainConfig small_train(HeadKind head = HeadKind::kDirichlet, bool prune = true) {
  TrainConfig c;
  c.hidden_size = 16;
  c.layers = 2;
  c.lr = 1e-3;
  c.minibatch = 16;
  c.epochs = 2;
  c.workers = 1;
  c.iterations = 3;
  c.checkpoint_every = 2;
  c.seed = 5;
  c.head = head;
  c.prune = prune;
  return c;
}

std::vector<PpoRecord> records_of(const std::vector<Trajectory>& batch) {
  std::vector<PpoRecord> out;
  for (const Trajectory& tr : batch) {
    for (int t = 0; t < tr.steps; ++t) {
      for (int i = 0; i < tr.agents; ++i) {
        const std::size_t k = tr.index(t, i);
        out.push_back({tr.obs.data() + k * kObsDim, tr.actions[k], tr.route_counts[static_cast<std::size_t>(i)],
                       tr.log_probs[k], tr.advantages[k], tr.returns[k]});
      }
    }
  }
  return out;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("marlta_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("advantage estimation") {
  Trajectory tr;
  tr.agents = 1;
  tr.steps = 3;
  tr.rewards = {1.0, 1.0, 1.0};
  tr.values = {0.0, 0.0, 0.0};
  compute_gae(tr, 1.0, 1.0);
  CHECK(tr.advantages == std::vector<double>{3.0, 2.0, 1.0});
  CHECK(tr.returns == tr.advantages);

  tr.rewards = {0.0, 0.0, 0.0};
  compute_gae(tr, 0.75, 0.95);
  CHECK(tr.advantages == std::vector<double>{0.0, 0.0, 0.0});

  Trajectory one;
  one.agents = 2;
  one.steps = 1;
  one.rewards = {0.5, -1.0};
  one.values = {0.2, 0.3};
  compute_gae(one, 0.75, 0.95);
  CHECK(one.advantages[0] == doctest::Approx(0.3));
  CHECK(one.advantages[1] == doctest::Approx(-1.3));
}

TEST_CASE("advantages follow the recursion per agent") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> n(0.0, 1.0);
  Trajectory tr;
  tr.agents = 3;
  tr.steps = 6;
  for (int k = 0; k < 18; ++k) {
    tr.rewards.push_back(n(rng));
    tr.values.push_back(n(rng));
  }
  const double g = 0.75, l = 0.95;
  compute_gae(tr, g, l);
  for (int i = 0; i < 3; ++i) {
    for (int t = 0; t < 6; ++t) {
      // Direct sum: A_t = sum_j (g l)^j delta_{t+j}.
      double expected = 0.0;
      for (int j = t; j < 6; ++j) {
        const double next = j + 1 < 6 ? tr.values[tr.index(j + 1, i)] : 0.0;
        const double delta = tr.rewards[tr.index(j, i)] + g * next - tr.values[tr.index(j, i)];
        expected += std::pow(g * l, j - t) * delta;
      }
      CHECK(tr.advantages[tr.index(t, i)] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("rollout collection") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
  std::mt19937_64 init(1);
  const ActorCritic model(HeadKind::kDirichlet, {16}, init);

  const auto batch = collect_rollouts(model, env, 3, 2, 9, 0);
  REQUIRE(batch.size() == 6);
  for (const Trajectory& tr : batch) {
    CHECK(tr.rewards.size() == 4u * 8u);
    CHECK(tr.obs.size() == 4u * 8u * static_cast<std::size_t>(kObsDim));
    CHECK(tr.global_gaps.size() == 8u);
    for (int i = 0; i < tr.agents; ++i) {
      double total = 0.0;
      for (int t = 0; t < tr.steps; ++t) total += tr.rewards[tr.index(t, i)];
      CHECK(std::abs(total + tr.final_local_gaps[static_cast<std::size_t>(i)]) <= 1e-9);
    }
  }
  CHECK(batch[0].obs != batch[1].obs);

  const auto again = collect_rollouts(model, env, 3, 2, 9, 0);
  for (std::size_t w = 0; w < batch.size(); ++w) {
    CHECK(again[w].rewards == batch[w].rewards);
    CHECK(again[w].log_probs == batch[w].log_probs);
  }
}

TEST_CASE("a failing rollout worker is reported") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
  std::mt19937_64 init(1);
  ActorCritic model(HeadKind::kDirichlet, {8}, init);
  model.policy = Mlp(MlpArch{kObsDim - 1, {8}, kMaxRoutes});
  try {
    collect_rollouts(model, env, 2, 1, 0, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("rollout worker 0") != std::string::npos);
  }
}

TEST_CASE("clipped surrogate") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
  std::mt19937_64 init(2);
  const ActorCritic model(HeadKind::kDirichlet, {16}, init);
  auto batch = collect_rollouts(model, env, 1, 1, 3, 0);
  compute_gae(batch[0], 0.75, 0.95);
  std::vector<PpoRecord> recs = records_of(batch);
  TrainConfig cfg = small_train();

  SUBCASE("ratio one: surrogate is the mean advantage") {
    const PpoLossTerms t = ppo_loss(model, recs, cfg);
    double mean = 0.0;
    for (const PpoRecord& r : recs) mean += r.advantage / static_cast<double>(recs.size());
    CHECK(t.policy_loss == doctest::Approx(-mean).epsilon(1e-10));
    CHECK(t.max_ratio_error <= 1e-6);
    TrainConfig wide = cfg;
    wide.clip = 0.99;
    CHECK(ppo_loss(model, recs, wide).grad.isApprox(t.grad, 1e-12));
  }
  SUBCASE("ratio 1.5 with positive advantage takes the clipped branch") {
    std::vector<PpoRecord> one{recs[0]};
    one[0].advantage = 2.0;
    one[0].old_log_prob -= std::log(1.5);
    const PpoLossTerms t = ppo_loss(model, one, cfg);
    CHECK(t.policy_loss == doctest::Approx(-1.2 * 2.0).epsilon(1e-9));
    CHECK(t.clip_fraction == 1.0);
    const auto np = static_cast<Eigen::Index>(model.policy.parameter_count());
    CHECK(t.grad.head(np).isZero(0.0));
  }
  SUBCASE("zero advantages: no policy gradient, value still trains") {
    for (PpoRecord& r : recs) r.advantage = 0.0;
    const PpoLossTerms t = ppo_loss(model, recs, cfg);
    const auto np = static_cast<Eigen::Index>(model.policy.parameter_count());
    CHECK(t.grad.head(np).isZero(0.0));
    CHECK(t.grad.tail(static_cast<Eigen::Index>(model.value.parameter_count())).norm() > 0.0);
  }
}

TEST_CASE("loss gradient matches central differences for both heads") {
  for (HeadKind head : {HeadKind::kDirichlet, HeadKind::kSoftmaxGaussian}) {
    const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
    std::mt19937_64 init(3);
    ActorCritic model(head, {6}, init);
    model.log_std = Eigen::VectorXd::LinSpaced(kMaxRoutes, -0.5, 0.5);
    auto batch = collect_rollouts(model, env, 1, 1, 4, 0);
    compute_gae(batch[0], 0.75, 0.95);
    std::vector<PpoRecord> recs = records_of(batch);
    recs.resize(12);
    // Move the parameters so ratios differ from one and some records clip.
    Eigen::VectorXd p = model.flat();
    std::normal_distribution<double> n(0.0, 0.05);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += n(init);
    model.set_flat(p);

    TrainConfig cfg = small_train(head);
    cfg.ent_coef = 0.01;
    const PpoLossTerms t = ppo_loss(model, recs, cfg);
    const std::vector<double> x(p.data(), p.data() + p.size());
    const auto loss_at = [&](const std::vector<double>& v) {
      ActorCritic m = model;
      m.set_flat(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      return ppo_loss(m, recs, cfg).loss;
    };
    int bad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fd = testing::central_difference(loss_at, x, i, 1e-5);
      if (!testing::close(t.grad(static_cast<Eigen::Index>(i)), fd, 1e-4, 1e-6)) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("training loop") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());

  SUBCASE("metrics file and first-epoch ratios") {
    const fs::path dir = temp_dir("metrics");
    TrainState s = init_training(small_train());
    const auto rows = train_loop(s, env, {dir / "m.csv", dir / "c.ckpt", false});
    CHECK(rows.size() == 3);
    const std::string csv = read_text_file(dir / "m.csv");
    CHECK(csv.rfind("iter,episodes,mean_reward,min_gap,final_gap,seconds\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(fs::exists(dir / "c.ckpt"));
    fs::remove_all(dir);

    TrainState u = init_training(small_train());
    auto batch = collect_rollouts(u.model, env, 1, 1, 11, 0);
    compute_gae(batch[0], 0.75, 0.95);
    std::mt19937_64 shuffle(1);
    const LossReport rep = ppo_update(u.model, u.optimizer, batch, u.config, shuffle);
    CHECK(rep.max_first_epoch_ratio_error <= 1e-6);
    CHECK(rep.skipped_minibatches == 0);
  }
  SUBCASE("learning rate zero leaves parameters unchanged") {
    TrainConfig c = small_train();
    c.lr = 0.0;
    TrainState s = init_training(c);
    const ActorCritic before = s.model;
    train_loop(s, env, {});
    CHECK(s.model == before);
    CHECK(s.iteration == 3);
  }
  SUBCASE("resuming reproduces an uninterrupted run") {
    TrainState full = init_training(small_train());
    train_loop(full, env, {{}, {}, false});

    TrainConfig first_two = small_train();
    first_two.iterations = 2;
    TrainState part = init_training(first_two);
    train_loop(part, env, {{}, {}, false});
    TrainState resumed = parse_checkpoint(serialize_checkpoint(part));
    resumed.config.iterations = 3;
    train_loop(resumed, env, {{}, {}, false});

    CHECK(resumed.model == full.model);
    CHECK(metrics_csv(resumed.history) == metrics_csv(full.history));
  }
  SUBCASE("every variant trains through the same code path") {
    for (const char* name : {"S", "SA", "D", "DA"}) {
      const Variant v = variant_from_string(name);
      const Environment venv(ow().net, ow().rs, ow().dm, &ow().coords, short_env(v.prune));
      TrainConfig c = small_train(v.head, v.prune);
      c.iterations = 1;
      TrainState s = init_training(c);
      CHECK(train_loop(s, venv, {}).size() == 1);
      CHECK(s.model.head == v.head);
    }
  }
  SUBCASE("pruning mismatch is rejected") {
    TrainState s = init_training(small_train(HeadKind::kDirichlet, false));
    CHECK_THROWS_AS(train_loop(s, env, {}), ConfigError);
  }
}

TEST_CASE("evaluation") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
  SUBCASE("uniform policy matches the direct uniform gap") {
    const JointAction uniform = uniform_action(ow().rs);
    const EvalReport rep =
        evaluate([&](const EnvState&, const std::vector<double>&) { return uniform; }, env, 2, 0);
    const FlowState fs = load_network(ow().net, ow().rs, ow().dm, uniform, CostMode::kUserEquilibrium);
    const double direct = relative_gap_global(fs, ow().dm);
    CHECK(rep.mean_min_gap == doctest::Approx(direct).epsilon(1e-12));
    for (double g : rep.episode_gaps[0]) CHECK(g == doctest::Approx(direct).epsilon(1e-12));
  }
  SUBCASE("evaluation leaves the model untouched") {
    std::mt19937_64 init(4);
    const ActorCritic model(HeadKind::kDirichlet, {8}, init);
    const ActorCritic copy = model;
    const EvalReport a = evaluate_policy(model, env, 2, 1);
    const EvalReport b = evaluate_policy(model, env, 2, 1);
    CHECK(model == copy);
    CHECK(a.episode_gaps == b.episode_gaps);
    CHECK(a.episode_gaps[0].size() == 8u);
  }
  SUBCASE("variable demand draws match the environment's reset") {
    EnvConfig cfg = short_env();
    cfg.demand_mode = DemandMode::kVariable;
    const Environment venv(ow().net, ow().rs, ow().dm, &ow().coords, cfg);
    std::mt19937_64 rng = episode_rng(7, 0, 3);
    CHECK(venv.reset(rng).demand == evaluation_demand(cfg, ow().dm, 7, 3));
    CHECK(evaluation_demand(short_env(), ow().dm, 7, 3) == ow().dm);
  }
}

TEST_CASE("checkpoints") {
  const Environment env(ow().net, ow().rs, ow().dm, &ow().coords, short_env());
  TrainConfig c = small_train(HeadKind::kSoftmaxGaussian);
  c.iterations = 1;
  TrainState s = init_training(c);
  train_loop(s, env, {{}, {}, false});
  const std::string text = serialize_checkpoint(s);

  const TrainState back = parse_checkpoint(text);
  CHECK(back.model == s.model);
  CHECK(back.iteration == 1);
  CHECK(back.episodes == s.episodes);
  CHECK(back.optimizer.steps() == s.optimizer.steps());
  CHECK(back.optimizer.first_moment() == s.optimizer.first_moment());
  CHECK(back.config.prune == s.config.prune);
  CHECK(serialize_checkpoint(back) == text);

  for (std::size_t cut : {std::size_t{10}, text.size() / 2, text.size() - 5}) {
    CHECK_THROWS_AS(parse_checkpoint(text.substr(0, cut)), ParseError);
  }
  std::string other = text;
  other.replace(0, 19, "marlta-checkpoint 7");
  CHECK_THROWS_AS(parse_checkpoint(other), VersionError);

  const fs::path dir = temp_dir("ckpt");
  save_checkpoint(dir / "a.ckpt", s);
  CHECK(load_checkpoint(dir / "a.ckpt").model == s.model);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
  fs::remove_all(dir);
}
