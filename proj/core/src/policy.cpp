#include "marlta/policy.hpp"

#include "marlta/env.hpp"
#include "marlta/error.hpp"
#include "marlta/policy_heads.hpp"

namespace marlta {

std::string to_string(HeadKind head) {
  return head == HeadKind::kDirichlet ? "dirichlet" : "softmax";
}

HeadKind head_kind_from_string(const std::string& text) {
  if (text == "dirichlet") return HeadKind::kDirichlet;
  if (text == "softmax") return HeadKind::kSoftmaxGaussian;
  throw ConfigError("unknown policy head '" + text + "' (expected dirichlet or softmax)");
}

Variant variant_from_string(const std::string& name) {
  if (name == "S") return {HeadKind::kSoftmaxGaussian, false};
  if (name == "SA") return {HeadKind::kSoftmaxGaussian, true};
  if (name == "D") return {HeadKind::kDirichlet, false};
  if (name == "DA") return {HeadKind::kDirichlet, true};
  throw ConfigError("unknown variant '" + name + "' (expected S, SA, D or DA)");
}

std::string variant_name(const Variant& v) {
  return std::string(v.head == HeadKind::kDirichlet ? "D" : "S") + (v.prune ? "A" : "");
}

ActorCritic::ActorCritic(HeadKind head_kind, const std::vector<int>& hidden,
                         std::mt19937_64& init_rng)
    : head(head_kind),
      policy(MlpArch{kObsDim, hidden, kMaxRoutes}),
      value(MlpArch{kObsDim, hidden, 1}) {
  policy.init_orthogonal(init_rng, 0.01);
  value.init_orthogonal(init_rng, 1.0);
}

std::size_t ActorCritic::parameter_count() const {
  return policy.parameter_count() + static_cast<std::size_t>(log_std.size()) +
         value.parameter_count();
}

Eigen::VectorXd ActorCritic::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  const auto np = static_cast<Eigen::Index>(policy.parameter_count());
  out.head(np) = policy.flat();
  out.segment(np, log_std.size()) = log_std;
  out.tail(static_cast<Eigen::Index>(value.parameter_count())) = value.flat();
  return out;
}

void ActorCritic::set_flat(const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ContractViolation("flat actor-critic vector has the wrong length");
  }
  const auto np = static_cast<Eigen::Index>(policy.parameter_count());
  policy.set_flat(v.head(np));
  log_std = v.segment(np, log_std.size());
  value.set_flat(v.tail(static_cast<Eigen::Index>(value.parameter_count())));
}

bool ActorCritic::operator==(const ActorCritic& o) const {
  return head == o.head && policy == o.policy && value == o.value && log_std == o.log_std;
}

ActOutput act(const ActorCritic& model, const std::vector<double>& obs, const RouteSet& rs,
              std::mt19937_64* rng) {
  const auto n = static_cast<Eigen::Index>(rs.agent_count());
  if (static_cast<Eigen::Index>(obs.size()) != n * kObsDim) {
    throw ContractViolation("observation batch does not match the agent count");
  }
  const Eigen::Map<const Eigen::MatrixXd> x(obs.data(), kObsDim, n);
  const Eigen::MatrixXd out = model.policy.forward(x);
  const Eigen::MatrixXd v = model.value.forward(x);

  ActOutput res;
  res.actions.resize(static_cast<std::size_t>(n));
  res.raw.assign(static_cast<std::size_t>(n), RawAction{});
  res.log_probs.assign(static_cast<std::size_t>(n), 0.0);
  res.values.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(j);
    const auto k = static_cast<std::size_t>(rs.route_count(i));
    res.values[i] = v(0, j);
    std::vector<double> head_out(k);
    for (std::size_t r = 0; r < k; ++r) head_out[r] = out(static_cast<Eigen::Index>(r), j);

    if (model.head == HeadKind::kDirichlet) {
      const std::vector<double> c = softplus_positive(head_out);
      if (rng) {
        res.actions[i] = dirichlet_sample(c, *rng);
        res.log_probs[i] = dirichlet_log_prob(c, res.actions[i]);
      } else {
        res.actions[i] = dirichlet_mean(c);
      }
      std::copy(res.actions[i].begin(), res.actions[i].end(), res.raw[i].begin());
    } else {
      const std::vector<double> ls(model.log_std.data(), model.log_std.data() + k);
      if (rng) {
        GaussianSample s = gaussian_softmax_sample(head_out, ls, *rng);
        res.actions[i] = std::move(s.action);
        res.log_probs[i] = s.log_prob;
        std::copy(s.logits.begin(), s.logits.end(), res.raw[i].begin());
      } else {
        res.actions[i] = softmax(head_out);
        std::copy(head_out.begin(), head_out.end(), res.raw[i].begin());
      }
    }
  }
  return res;
}

}  // namespace marlta
