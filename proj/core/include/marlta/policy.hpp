#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marlta/mlp.hpp"
#include "marlta/network.hpp"

namespace marlta {

enum class HeadKind { kDirichlet, kSoftmaxGaussian };

std::string to_string(HeadKind head);
HeadKind head_kind_from_string(const std::string& text);

// The four strategy variants: softmax (S), softmax + pruning (SA),
// Dirichlet (D), Dirichlet + pruning (DA).
struct Variant {
  HeadKind head = HeadKind::kDirichlet;
  bool prune = true;
};

Variant variant_from_string(const std::string& name);
std::string variant_name(const Variant& v);

using RawAction = std::array<double, kMaxRoutes>;

// Shared policy and value networks for every agent, plus the state-free
// log standard deviation used by the softmax head.
struct ActorCritic {
  HeadKind head = HeadKind::kDirichlet;
  Mlp policy;
  Mlp value;
  Eigen::VectorXd log_std = Eigen::VectorXd::Zero(kMaxRoutes);

  ActorCritic() = default;
  ActorCritic(HeadKind head, const std::vector<int>& hidden, std::mt19937_64& init_rng);

  // [policy, log_std, value] in one vector, the layout Adam works on.
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& v);
  std::size_t parameter_count() const;

  bool operator==(const ActorCritic& o) const;
};

struct ActOutput {
  JointAction actions;               // on each agent's simplex, k_i entries
  std::vector<RawAction> raw;        // Dirichlet sample or Gaussian logits, zero padded
  std::vector<double> log_probs;     // 0 in deterministic mode
  std::vector<double> values;
};

// `obs` is row-major agent_count x kObsDim. A null rng selects the
// deterministic action (Dirichlet mean, softmax of the Gaussian mean).
ActOutput act(const ActorCritic& model, const std::vector<double>& obs, const RouteSet& rs,
              std::mt19937_64* rng);

}  // namespace marlta
