#pragma once

#include <random>
#include <span>
#include <vector>

namespace marlta {

// Route slots 0..k-1 are active; slots k..5 are masked out. All functions
// below take and return only the k active components.

inline constexpr double kConcentrationFloor = 1e-6;
inline constexpr double kDirichletClip = 1e-7;
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

double softplus(double x);
double sigmoid(double x);

// softplus(x) + kConcentrationFloor, elementwise.
std::vector<double> softplus_positive(std::span<const double> x);

// Gamma marginals normalized to the simplex, clipped below at 1e-7 and
// renormalized.
std::vector<double> dirichlet_sample(std::span<const double> c, std::mt19937_64& rng);

// c / sum(c).
std::vector<double> dirichlet_mean(std::span<const double> c);

struct DirichletEval {
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> dlogp_dc;
  std::vector<double> dentropy_dc;
};

// Throws ContractViolation if any a_i <= 0 or lengths differ.
DirichletEval dirichlet_evaluate(std::span<const double> c, std::span<const double> a);
double dirichlet_log_prob(std::span<const double> c, std::span<const double> a);

std::vector<double> softmax(std::span<const double> z);

struct GaussianSample {
  std::vector<double> logits;  // sampled z
  std::vector<double> action;  // softmax(z)
  double log_prob = 0.0;       // density of z
};

// log_std is clamped to [kLogStdMin, kLogStdMax] before use.
GaussianSample gaussian_softmax_sample(std::span<const double> mean,
                                       std::span<const double> log_std, std::mt19937_64& rng);

struct GaussianEval {
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> dlogp_dmean;
  std::vector<double> dlogp_dlogstd;  // zero where the clamp is active
  std::vector<double> dentropy_dlogstd;
};

GaussianEval gaussian_evaluate(std::span<const double> mean, std::span<const double> log_std,
                               std::span<const double> logits);

}  // namespace marlta
