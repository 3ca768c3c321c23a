#pragma once

#include <cstdint>
#include <istream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace marlta {

struct MlpArch {
  int input = 0;
  std::vector<int> hidden;  // tanh layers
  int output = 0;           // linear

  int layer_count() const noexcept { return static_cast<int>(hidden.size()) + 1; }
  bool operator==(const MlpArch&) const = default;
};

// Activations of one forward pass, tagged with the parameter version that
// produced them.
struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<Eigen::MatrixXd> activations;  // layer inputs; [0] is the batch input
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Feedforward network on column batches: input is (input x batch).
class Mlp {
 public:
  Mlp() = default;
  // Zero weights and biases.
  explicit Mlp(MlpArch arch);

  // Orthogonal weights with gain sqrt(2) on hidden layers and `final_gain` on
  // the output layer; zero biases.
  void init_orthogonal(std::mt19937_64& rng, double final_gain);

  const MlpArch& arch() const noexcept { return arch_; }
  std::uint64_t version() const noexcept { return version_; }
  std::size_t parameter_count() const noexcept;

  const Eigen::MatrixXd& weight(int layer) const { return weights_[static_cast<std::size_t>(layer)]; }
  const Eigen::VectorXd& bias(int layer) const { return biases_[static_cast<std::size_t>(layer)]; }
  // Mutable access bumps the version, invalidating outstanding caches.
  Eigen::MatrixXd& mutable_weight(int layer);
  Eigen::VectorXd& mutable_bias(int layer);

  // Throws ContractViolation when the input row count differs from arch.input.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, ForwardCache* cache = nullptr) const;

  // Gradients of sum(output_grad .* output). Throws ContractViolation for a
  // cache produced by other parameter values.
  MlpGrads backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                    Eigen::MatrixXd* input_grad = nullptr) const;

  // Layer by layer: weights column-major, then biases.
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& values);
  Eigen::VectorXd flatten(const MlpGrads& grads) const;

  bool operator==(const Mlp& o) const;

 private:
  MlpArch arch_;
  std::vector<Eigen::MatrixXd> weights_;  // (out x in)
  std::vector<Eigen::VectorXd> biases_;
  std::uint64_t version_ = 1;
};

struct AdamConfig {
  double lr = 4e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig cfg);

  // Returns false, leaving params and state untouched, when any gradient
  // component is non-finite.
  bool step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  std::int64_t steps() const noexcept { return t_; }
  const Eigen::VectorXd& first_moment() const noexcept { return m_; }
  const Eigen::VectorXd& second_moment() const noexcept { return v_; }
  void restore(Eigen::VectorXd m, Eigen::VectorXd v, std::int64_t t);

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  std::int64_t t_ = 0;
};

inline constexpr int kMlpFormatVersion = 1;

// Self-describing text block: version, architecture, row-major values with
// round-trip precision.
std::string serialize_mlp(const Mlp& mlp);
// Throws VersionError, ParseError (truncated or corrupt input).
Mlp parse_mlp(std::istream& in);
Mlp parse_mlp(const std::string& text);

// Shared helpers for the text checkpoint formats.
void write_vector(std::string& out, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& in, const std::string& tag);

}  // namespace marlta
