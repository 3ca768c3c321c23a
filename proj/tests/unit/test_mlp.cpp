#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "marlta/error.hpp"
#include "marlta/mlp.hpp"
#include "oracles.hpp"

using namespace marlta;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Mlp random_mlp(std::mt19937_64& rng, MlpArch arch) {
  Mlp m(std::move(arch));
  m.init_orthogonal(rng, 1.0);
  Eigen::VectorXd p = m.flat();
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += n(rng);
  m.set_flat(p);
  return m;
}

}  // namespace

TEST_CASE("zero parameters give zero output") {
  const Mlp m(MlpArch{3, {4, 4}, 2});
  const Eigen::MatrixXd out = m.forward(Eigen::MatrixXd::Ones(3, 5));
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 5);
  CHECK(out.isZero(0.0));
}

TEST_CASE("single linear layer with identity weights") {
  Mlp m(MlpArch{3, {}, 3});
  m.mutable_weight(0) = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd x = (Eigen::MatrixXd(3, 2) << 1, -2, 3, 0.5, -1, 4).finished();
  CHECK(m.forward(x) == x);
}

TEST_CASE("two-layer forward pass by hand") {
  Mlp m(MlpArch{2, {2}, 1});
  m.mutable_weight(0) = (Eigen::MatrixXd(2, 2) << 0.5, -1.0, 0.25, 0.75).finished();
  m.mutable_bias(0) = Eigen::Vector2d(0.1, -0.2);
  m.mutable_weight(1) = (Eigen::MatrixXd(1, 2) << 1.0, 2.0).finished();
  m.mutable_bias(1) = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::MatrixXd out = m.forward(Eigen::Vector2d(1.0, 2.0));
  const double h0 = std::tanh(0.5 * 1.0 - 1.0 * 2.0 + 0.1);
  const double h1 = std::tanh(0.25 * 1.0 + 0.75 * 2.0 - 0.2);
  CHECK(out(0, 0) == doctest::Approx(h0 + 2.0 * h1 + 0.3).epsilon(1e-15));
}

TEST_CASE("input shape mismatch") {
  const Mlp m(MlpArch{3, {2}, 1});
  CHECK_THROWS_AS(m.forward(Eigen::MatrixXd::Zero(4, 1)), ContractViolation);
}

TEST_CASE("backward basics") {
  std::mt19937_64 rng(51);
  SUBCASE("zero output gradient") {
    const Mlp m = random_mlp(rng, MlpArch{4, {3}, 2});
    ForwardCache cache;
    m.forward(random_matrix(rng, 4, 3), &cache);
    const MlpGrads g = m.backward(cache, Eigen::MatrixXd::Zero(2, 3));
    CHECK(m.flatten(g).isZero(0.0));
  }
  SUBCASE("linear layer weight gradient is an outer product") {
    const Mlp m = random_mlp(rng, MlpArch{3, {}, 2});
    const Eigen::VectorXd x = random_matrix(rng, 3, 1);
    const Eigen::VectorXd gy = random_matrix(rng, 2, 1);
    ForwardCache cache;
    m.forward(x, &cache);
    const MlpGrads g = m.backward(cache, gy);
    CHECK(g.weights[0].isApprox(gy * x.transpose(), 1e-14));
    CHECK(g.biases[0].isApprox(gy, 1e-14));
  }
  SUBCASE("stale cache") {
    Mlp m = random_mlp(rng, MlpArch{3, {2}, 1});
    ForwardCache cache;
    m.forward(random_matrix(rng, 3, 2), &cache);
    m.mutable_bias(0)(0) += 1.0;
    CHECK_THROWS_AS(m.backward(cache, Eigen::MatrixXd::Ones(1, 2)), ContractViolation);
  }
}

TEST_CASE("backward matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Mlp base = random_mlp(rng, MlpArch{5, {6, 4, 3}, 3});
    const Eigen::MatrixXd x = random_matrix(rng, 5, 4);
    const Eigen::MatrixXd gy = random_matrix(rng, 3, 4);
    ForwardCache cache;
    base.forward(x, &cache);
    Eigen::MatrixXd gx;
    const Eigen::VectorXd analytic = base.flatten(base.backward(cache, gy, &gx));

    const Eigen::VectorXd p0 = base.flat();
    const auto loss_at = [&](const std::vector<double>& v) {
      Mlp m = base;
      m.set_flat(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      return (m.forward(x).array() * gy.array()).sum();
    };
    const std::vector<double> p(p0.data(), p0.data() + p0.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double fd = testing::central_difference(loss_at, p, i, 1e-5);
      CHECK(testing::close(analytic(static_cast<Eigen::Index>(i)), fd, 1e-4, 1e-6));
    }
    const auto input_loss = [&](const std::vector<double>& v) {
      const Eigen::MatrixXd xi = Eigen::Map<const Eigen::MatrixXd>(v.data(), x.rows(), x.cols());
      return (base.forward(xi).array() * gy.array()).sum();
    };
    const std::vector<double> xv(x.data(), x.data() + x.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      CHECK(testing::close(gx.data()[i], testing::central_difference(input_loss, xv, i, 1e-5), 1e-4, 1e-6));
    }
  }
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(52);
  const Mlp m = random_mlp(rng, MlpArch{6, {8, 8}, 3});
  const Eigen::MatrixXd x = random_matrix(rng, 6, 10);
  CHECK(m.forward(x) == m.forward(x));
}

TEST_CASE("orthogonal initialization") {
  std::mt19937_64 rng(53);
  Mlp m(MlpArch{6, {4}, 2});
  m.init_orthogonal(rng, 0.01);
  const Eigen::MatrixXd& w0 = m.weight(0);  // 4 x 6: orthogonal rows
  CHECK((w0 * w0.transpose()).isApprox(2.0 * Eigen::MatrixXd::Identity(4, 4), 1e-12));
  const Eigen::MatrixXd& w1 = m.weight(1);  // 2 x 4
  CHECK((w1 * w1.transpose()).isApprox(1e-4 * Eigen::MatrixXd::Identity(2, 2), 1e-12));
  CHECK(m.bias(0).isZero(0.0));
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Adam opt(3, AdamConfig{0.1});
    Eigen::VectorXd p = Eigen::Vector3d(1.0, -2.0, 3.0);
    const Eigen::VectorXd before = p;
    REQUIRE(opt.step(p, Eigen::VectorXd::Zero(3)));
    CHECK(p == before);
  }
  SUBCASE("first step is lr times the gradient sign, softened by eps") {
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    Adam opt(3, cfg);
    Eigen::VectorXd p = Eigen::Vector3d::Zero();
    const Eigen::Vector3d g(0.5, -2.0, 1e-3);
    REQUIRE(opt.step(p, g));
    for (int i = 0; i < 3; ++i) {
      CHECK(p(i) == doctest::Approx(-cfg.lr * g(i) / (std::abs(g(i)) + cfg.eps)).epsilon(1e-12));
    }
    CHECK(opt.steps() == 1);
  }
  SUBCASE("components are updated independently") {
    Adam joint(2, AdamConfig{0.05});
    Adam first(1, AdamConfig{0.05});
    Eigen::VectorXd pj = Eigen::Vector2d(1.0, 1.0);
    Eigen::VectorXd p1 = Eigen::VectorXd::Constant(1, 1.0);
    for (int t = 0; t < 5; ++t) {
      joint.step(pj, Eigen::Vector2d(0.3 * t - 0.5, 7.0));
      first.step(p1, Eigen::VectorXd::Constant(1, 0.3 * t - 0.5));
    }
    CHECK(pj(0) == p1(0));
  }
  SUBCASE("non-finite gradient is skipped") {
    Adam opt(2, AdamConfig{0.1});
    Eigen::VectorXd p = Eigen::Vector2d(1.0, 2.0);
    CHECK_FALSE(opt.step(p, Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 1.0)));
    CHECK(p == Eigen::Vector2d(1.0, 2.0));
    CHECK(opt.steps() == 0);
  }
}

TEST_CASE("network serialization") {
  std::mt19937_64 rng(54);
  const Mlp m = random_mlp(rng, MlpArch{7, {5, 3}, 2});
  const std::string text = serialize_mlp(m);
  CHECK(parse_mlp(text) == m);
  CHECK(serialize_mlp(parse_mlp(text)) == text);

  SUBCASE("full-size architecture keeps its shapes") {
    Mlp big(MlpArch{101, {512, 512, 512}, 6});
    big.init_orthogonal(rng, 0.01);
    const Mlp back = parse_mlp(serialize_mlp(big));
    CHECK(back.arch() == big.arch());
    for (int l = 0; l < 4; ++l) {
      CHECK(back.weight(l).rows() == big.weight(l).rows());
      CHECK(back.weight(l).cols() == big.weight(l).cols());
    }
    CHECK(back == big);
  }
  SUBCASE("truncated input") {
    for (std::size_t cut : {text.size() / 3, text.size() / 2, text.size() - 10}) {
      CHECK_THROWS_AS(parse_mlp(text.substr(0, cut)), ParseError);
    }
  }
  SUBCASE("other version") {
    std::string other = text;
    other.replace(0, 5, "mlp 9");
    CHECK_THROWS_AS(parse_mlp(other), VersionError);
  }
  SUBCASE("corrupted shape") {
    std::string bad = text;
    const auto at = bad.find("weight 5 7");
    REQUIRE(at != std::string::npos);
    bad.replace(at, 10, "weight 5 6");
    CHECK_THROWS_AS(parse_mlp(bad), ParseError);
  }
}
