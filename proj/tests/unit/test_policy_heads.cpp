#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "marlta/env.hpp"
#include "marlta/error.hpp"
#include "marlta/policy.hpp"
#include "marlta/policy_heads.hpp"
#include "oracles.hpp"

using namespace marlta;

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("softplus with floor") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-15));
  const auto c = softplus_positive(std::vector<double>{-50.0, 0.0});
  CHECK(c[0] == doctest::Approx(kConcentrationFloor).epsilon(1e-12));
  CHECK(c[0] >= kConcentrationFloor);
  CHECK(c[1] == doctest::Approx(std::log(2.0) + kConcentrationFloor).epsilon(1e-15));
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(-800.0) == 0.0);
}

TEST_CASE("Dirichlet samples") {
  std::mt19937_64 rng(61);
  SUBCASE("simplex") {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> x(1 + i % kMaxRoutes);
      for (double& v : x) v = u(rng);
      const auto a = dirichlet_sample(softplus_positive(x), rng);
      CHECK(a.size() == x.size());
      CHECK(std::abs(sum(a) - 1.0) <= 1e-9);
      for (double v : a) CHECK(v >= kDirichletClip * 0.5);
    }
  }
  SUBCASE("large equal concentrations stay near the center") {
    for (int i = 0; i < 200; ++i) {
      const auto a = dirichlet_sample(std::vector<double>{1000.0, 1000.0}, rng);
      CHECK(std::abs(a[0] - 0.5) < 0.1);
    }
  }
  SUBCASE("empirical mean") {
    const std::vector<double> c{2.0, 1.0, 1.0};
    std::vector<double> mean(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto a = dirichlet_sample(c, rng);
      for (int r = 0; r < 3; ++r) mean[static_cast<std::size_t>(r)] += a[static_cast<std::size_t>(r)] / n;
    }
    CHECK(std::abs(mean[0] - 0.5) < 0.01);
    CHECK(std::abs(mean[1] - 0.25) < 0.01);
    CHECK(std::abs(mean[2] - 0.25) < 0.01);
  }
  SUBCASE("tiny concentrations are clipped away from zero") {
    for (int i = 0; i < 200; ++i) {
      const auto a = dirichlet_sample(std::vector<double>{1e-6, 1e-6, 1e-6}, rng);
      for (double v : a) CHECK(v > 0.0);
      CHECK(std::abs(sum(a) - 1.0) <= 1e-9);
      CHECK(std::isfinite(dirichlet_log_prob(std::vector<double>{1e-6, 1e-6, 1e-6}, a)));
    }
  }
}

TEST_CASE("Dirichlet log density closed forms") {
  CHECK(dirichlet_log_prob(std::vector<double>{1.0, 1.0}, std::vector<double>{0.3, 0.7}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(dirichlet_log_prob(std::vector<double>{2.0, 2.0}, std::vector<double>{0.5, 0.5}) -
                 std::log(1.5)) <= 1e-12);
  CHECK(std::abs(dirichlet_log_prob(std::vector<double>{1.0, 1.0, 1.0},
                                    std::vector<double>{0.2, 0.3, 0.5}) -
                 std::log(2.0)) <= 1e-12);
  // Uniform density 2 on the 2-simplex has entropy -ln 2.
  const DirichletEval ev = dirichlet_evaluate(std::vector<double>{1.0, 1.0, 1.0},
                                              std::vector<double>{0.2, 0.3, 0.5});
  CHECK(std::abs(ev.entropy + std::log(2.0)) <= 1e-12);
  CHECK_THROWS_AS(dirichlet_log_prob(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 1.0}),
                  ContractViolation);
  CHECK_THROWS_AS(dirichlet_log_prob(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0}),
                  ContractViolation);
}

TEST_CASE("Dirichlet gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 5.0);
    const std::size_t k = 2 + seed % 5;
    std::vector<double> c(k);
    for (double& v : c) v = u(rng);
    const std::vector<double> a = dirichlet_sample(c, rng);
    const DirichletEval ev = dirichlet_evaluate(c, a);
    const auto logp = [&](const std::vector<double>& cc) { return dirichlet_log_prob(cc, a); };
    const auto ent = [&](const std::vector<double>& cc) { return dirichlet_evaluate(cc, a).entropy; };
    for (std::size_t r = 0; r < k; ++r) {
      CHECK(testing::close(ev.dlogp_dc[r], testing::central_difference(logp, c, r, 1e-5), 1e-4, 1e-6));
      CHECK(testing::close(ev.dentropy_dc[r], testing::central_difference(ent, c, r, 1e-5), 1e-4, 1e-6));
    }
  }
}

TEST_CASE("softmax") {
  const auto third = softmax(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : third) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto q = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-15));

  std::mt19937_64 rng(62);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> z(1 + i % kMaxRoutes);
    for (double& v : z) v = n(rng);
    const double shift = n(rng);
    std::vector<double> zs = z;
    for (double& v : zs) v += shift;
    const auto p = softmax(z);
    const auto ps = softmax(zs);
    CHECK(std::abs(sum(p) - 1.0) <= 1e-9);
    for (std::size_t r = 0; r < z.size(); ++r) {
      CHECK(std::abs(p[r] - ps[r]) <= 1e-12);
    }
  }
  for (double v : softmax(std::vector<double>{-30.0, 30.0})) CHECK(v > 0.0);
}

TEST_CASE("Gaussian-softmax head") {
  std::mt19937_64 rng(63);
  const std::vector<double> mean{0.5, -1.0, 2.0};
  const std::vector<double> ls{-0.5, 0.0, 0.3};
  const GaussianSample s = gaussian_softmax_sample(mean, ls, rng);
  CHECK(s.action == softmax(s.logits));
  for (double v : s.action) CHECK(v > 0.0);

  double expected = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    const double zr = (s.logits[r] - mean[r]) / std::exp(ls[r]);
    expected += -0.5 * zr * zr - ls[r] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  CHECK(s.log_prob == doctest::Approx(expected).epsilon(1e-13));
  const GaussianEval ev = gaussian_evaluate(mean, ls, s.logits);
  CHECK(ev.log_prob == doctest::Approx(expected).epsilon(1e-13));

  const auto lp_mean = [&](const std::vector<double>& m) { return gaussian_evaluate(m, ls, s.logits).log_prob; };
  const auto lp_ls = [&](const std::vector<double>& l) { return gaussian_evaluate(mean, l, s.logits).log_prob; };
  const auto ent_ls = [&](const std::vector<double>& l) { return gaussian_evaluate(mean, l, s.logits).entropy; };
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(testing::close(ev.dlogp_dmean[r], testing::central_difference(lp_mean, mean, r, 1e-5), 1e-4, 1e-6));
    CHECK(testing::close(ev.dlogp_dlogstd[r], testing::central_difference(lp_ls, ls, r, 1e-5), 1e-4, 1e-6));
    CHECK(testing::close(ev.dentropy_dlogstd[r], testing::central_difference(ent_ls, ls, r, 1e-5), 1e-4, 1e-6));
  }

  const GaussianEval clamped = gaussian_evaluate(mean, std::vector<double>{5.0, -30.0, 0.0}, s.logits);
  CHECK(clamped.dlogp_dlogstd[0] == 0.0);
  CHECK(clamped.dlogp_dlogstd[1] == 0.0);
  CHECK(std::isfinite(clamped.log_prob));
}

TEST_CASE("actor-critic action masking and sharing") {
  std::mt19937_64 rng(64);
  const RouteSet rs{{{Route{{0}}, Route{{1}}}, {Route{{2}}, Route{{3}}, Route{{4}}, Route{{5}}}, {Route{{6}}}}};
  for (HeadKind head : {HeadKind::kDirichlet, HeadKind::kSoftmaxGaussian}) {
    const ActorCritic model(head, {16, 16}, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> obs(3 * kObsDim);
    for (double& v : obs) v = n(rng);

    const ActOutput stoch = act(model, obs, rs, &rng);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(stoch.actions[i].size() == static_cast<std::size_t>(rs.route_count(i)));
      CHECK(std::abs(sum(stoch.actions[i]) - 1.0) <= 1e-9);
      for (std::size_t r = static_cast<std::size_t>(rs.route_count(i)); r < kMaxRoutes; ++r) {
        CHECK(stoch.raw[i][r] == 0.0);
      }
      CHECK(std::isfinite(stoch.log_probs[i]));
    }
    CHECK(stoch.actions[2] == std::vector<double>{1.0});

    // Identical observations and route counts give identical deterministic actions.
    std::vector<double> twin(2 * kObsDim);
    std::copy(obs.begin(), obs.begin() + kObsDim, twin.begin());
    std::copy(obs.begin(), obs.begin() + kObsDim, twin.begin() + kObsDim);
    const RouteSet pair{{{Route{{0}}, Route{{1}}}, {Route{{2}}, Route{{3}}}}};
    const ActOutput det = act(model, twin, pair, nullptr);
    CHECK(det.actions[0] == det.actions[1]);
    CHECK(det.log_probs == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("actor-critic flat layout") {
  std::mt19937_64 rng(65);
  ActorCritic model(HeadKind::kSoftmaxGaussian, {8}, rng);
  const Eigen::VectorXd flat = model.flat();
  CHECK(static_cast<std::size_t>(flat.size()) == model.parameter_count());
  Eigen::VectorXd changed = flat;
  changed(static_cast<Eigen::Index>(model.policy.parameter_count())) = 0.7;
  model.set_flat(changed);
  CHECK(model.log_std(0) == 0.7);
  CHECK(model.flat() == changed);
  CHECK_THROWS_AS(model.set_flat(Eigen::VectorXd::Zero(3)), ContractViolation);
}

TEST_CASE("variant names") {
  for (const char* name : {"S", "SA", "D", "DA"}) {
    CHECK(variant_name(variant_from_string(name)) == name);
  }
  CHECK(variant_from_string("DA").prune);
  CHECK_FALSE(variant_from_string("S").prune);
  CHECK(variant_from_string("SA").head == HeadKind::kSoftmaxGaussian);
  CHECK_THROWS_AS(variant_from_string("X"), ConfigError);
}
