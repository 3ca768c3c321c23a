#include "marlta/policy_heads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "marlta/error.hpp"

namespace marlta {

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softplus_positive(std::span<const double> x) {
  std::vector<double> c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = softplus(x[i]) + kConcentrationFloor;
  return c;
}

std::vector<double> dirichlet_sample(std::span<const double> c, std::mt19937_64& rng) {
  std::vector<double> g(c.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] > 0.0)) throw ContractViolation("Dirichlet concentrations must be positive");
    std::gamma_distribution<double> gamma(c[i], 1.0);
    g[i] = gamma(rng);
    sum += g[i];
  }
  if (!(sum > 0.0)) {
    // Every marginal underflowed; fall back to the largest concentration.
    std::fill(g.begin(), g.end(), 0.0);
    g[static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin())] = 1.0;
    sum = 1.0;
  }
  double clipped_sum = 0.0;
  for (double& v : g) {
    v = std::max(v / sum, kDirichletClip);
    clipped_sum += v;
  }
  for (double& v : g) v /= clipped_sum;
  return g;
}

std::vector<double> dirichlet_mean(std::span<const double> c) {
  double sum = 0.0;
  for (double v : c) sum += v;
  std::vector<double> m(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) m[i] = c[i] / sum;
  return m;
}

DirichletEval dirichlet_evaluate(std::span<const double> c, std::span<const double> a) {
  if (c.size() != a.size() || c.empty()) {
    throw ContractViolation("concentration and action lengths differ");
  }
  const std::size_t k = c.size();
  double c0 = 0.0;
  double lgamma_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(a[i] > 0.0)) {
      throw ContractViolation("Dirichlet log-density needs strictly positive components");
    }
    c0 += c[i];
    lgamma_sum += boost::math::lgamma(c[i]);
  }
  const double psi0 = boost::math::digamma(c0);
  const double tri0 = boost::math::trigamma(c0);
  DirichletEval out;
  out.dlogp_dc.resize(k);
  out.dentropy_dc.resize(k);
  out.log_prob = boost::math::lgamma(c0) - lgamma_sum;
  out.entropy = lgamma_sum - boost::math::lgamma(c0) + (c0 - static_cast<double>(k)) * psi0;
  for (std::size_t i = 0; i < k; ++i) {
    const double log_a = std::log(a[i]);
    const double psi = boost::math::digamma(c[i]);
    out.log_prob += (c[i] - 1.0) * log_a;
    out.entropy -= (c[i] - 1.0) * psi;
    out.dlogp_dc[i] = log_a + psi0 - psi;
    out.dentropy_dc[i] =
        (c0 - static_cast<double>(k)) * tri0 - (c[i] - 1.0) * boost::math::trigamma(c[i]);
  }
  return out;
}

double dirichlet_log_prob(std::span<const double> c, std::span<const double> a) {
  return dirichlet_evaluate(c, a).log_prob;
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double clamp_log_std(double s) { return std::clamp(s, kLogStdMin, kLogStdMax); }

}  // namespace

GaussianSample gaussian_softmax_sample(std::span<const double> mean,
                                       std::span<const double> log_std, std::mt19937_64& rng) {
  if (mean.size() != log_std.size() || mean.empty()) {
    throw ContractViolation("mean and log_std lengths differ");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  GaussianSample s;
  s.logits.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double eps = normal(rng);
    s.logits[i] = mean[i] + std::exp(ls) * eps;
    s.log_prob += -0.5 * eps * eps - ls - kHalfLog2Pi;
  }
  s.action = softmax(s.logits);
  return s;
}

GaussianEval gaussian_evaluate(std::span<const double> mean, std::span<const double> log_std,
                               std::span<const double> logits) {
  if (mean.size() != log_std.size() || mean.size() != logits.size() || mean.empty()) {
    throw ContractViolation("Gaussian head inputs differ in length");
  }
  const std::size_t k = mean.size();
  GaussianEval out;
  out.dlogp_dmean.resize(k);
  out.dlogp_dlogstd.resize(k);
  out.dentropy_dlogstd.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const bool clamped = log_std[i] < kLogStdMin || log_std[i] > kLogStdMax;
    const double ls = clamp_log_std(log_std[i]);
    const double inv_var = std::exp(-2.0 * ls);
    const double d = logits[i] - mean[i];
    out.log_prob += -0.5 * d * d * inv_var - ls - kHalfLog2Pi;
    out.entropy += 0.5 + kHalfLog2Pi + ls;
    out.dlogp_dmean[i] = d * inv_var;
    out.dlogp_dlogstd[i] = clamped ? 0.0 : d * d * inv_var - 1.0;
    out.dentropy_dlogstd[i] = clamped ? 0.0 : 1.0;
  }
  return out;
}

}  // namespace marlta
