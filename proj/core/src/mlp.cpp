#include "marlta/mlp.hpp"

#include <atomic>
#include <cmath>

#include "marlta/error.hpp"

namespace marlta {
namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return ++counter;
}

Eigen::MatrixXd orthogonal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int j = 0; j < small; ++j) {
    for (int i = 0; i < big; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (rows >= cols) return q;
  return q.transpose();
}

}  // namespace

Mlp::Mlp(MlpArch arch) : arch_(std::move(arch)), version_(next_version()) {
  if (arch_.input < 1 || arch_.output < 1) throw ContractViolation("MLP dimensions must be positive");
  int in = arch_.input;
  for (int h : arch_.hidden) {
    if (h < 1) throw ContractViolation("hidden layer width must be positive");
    weights_.push_back(Eigen::MatrixXd::Zero(h, in));
    biases_.push_back(Eigen::VectorXd::Zero(h));
    in = h;
  }
  weights_.push_back(Eigen::MatrixXd::Zero(arch_.output, in));
  biases_.push_back(Eigen::VectorXd::Zero(arch_.output));
}

void Mlp::init_orthogonal(std::mt19937_64& rng, double final_gain) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double gain = l + 1 == weights_.size() ? final_gain : std::sqrt(2.0);
    weights_[l] = gain * orthogonal(static_cast<int>(weights_[l].rows()),
                                    static_cast<int>(weights_[l].cols()), rng);
    biases_[l].setZero();
  }
  version_ = next_version();
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

Eigen::MatrixXd& Mlp::mutable_weight(int layer) {
  version_ = next_version();
  return weights_[static_cast<std::size_t>(layer)];
}

Eigen::VectorXd& Mlp::mutable_bias(int layer) {
  version_ = next_version();
  return biases_[static_cast<std::size_t>(layer)];
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, ForwardCache* cache) const {
  if (weights_.empty()) throw ContractViolation("forward on an empty MLP");
  if (input.rows() != arch_.input) {
    throw ContractViolation("MLP expects " + std::to_string(arch_.input) + " inputs, got " +
                            std::to_string(input.rows()));
  }
  if (cache) {
    cache->version = version_;
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (l == last) return z;
    a = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

MlpGrads Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                       Eigen::MatrixXd* input_grad) const {
  if (cache.version != version_ || cache.activations.size() != weights_.size()) {
    throw ContractViolation("forward cache does not belong to the current parameters");
  }
  if (output_grad.rows() != arch_.output ||
      output_grad.cols() != cache.activations.front().cols()) {
    throw ContractViolation("output gradient shape does not match the forward batch");
  }
  MlpGrads g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    g.weights[l] = delta * a_in.transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0 && !input_grad) break;
    Eigen::MatrixXd back = weights_[l].transpose() * delta;
    if (l == 0) {
      *input_grad = std::move(back);
      break;
    }
    delta = (back.array() * (1.0 - a_in.array().square())).matrix();
  }
  return g;
}

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.segment(k, weights_[l].size()) = weights_[l].reshaped();
    k += weights_[l].size();
    out.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return out;
}

void Mlp::set_flat(const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ContractViolation("flat parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = values.segment(k, weights_[l].size());
    k += weights_[l].size();
    biases_[l] = values.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
  version_ = next_version();
}

Eigen::VectorXd Mlp::flatten(const MlpGrads& grads) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.segment(k, grads.weights[l].size()) = grads.weights[l].reshaped();
    k += grads.weights[l].size();
    out.segment(k, grads.biases[l].size()) = grads.biases[l];
    k += grads.biases[l].size();
  }
  return out;
}

bool Mlp::operator==(const Mlp& o) const {
  if (!(arch_ == o.arch_)) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) return false;
  }
  return true;
}

Adam::Adam(std::size_t size, AdamConfig cfg)
    : cfg_(cfg),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

bool Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw ContractViolation("Adam state, parameters and gradient differ in length");
  }
  if (!grad.allFinite()) return false;
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  return true;
}

void Adam::restore(Eigen::VectorXd m, Eigen::VectorXd v, std::int64_t t) {
  if (m.size() != v.size() || t < 0) throw ContractViolation("inconsistent Adam state");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace marlta
