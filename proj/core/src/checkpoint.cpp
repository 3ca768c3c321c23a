#include <charconv>
#include <sstream>

#include "marlta/error.hpp"
#include "marlta/io_util.hpp"
#include "marlta/ippo.hpp"
#include "marlta/mlp.hpp"

namespace marlta {
namespace {

std::string next_token(std::istream& in, const std::string& what) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("checkpoint truncated while reading " + what, 0);
  return tok;
}

void expect(std::istream& in, const std::string& tag) {
  const std::string tok = next_token(in, tag);
  if (tok != tag) throw ParseError("checkpoint expected '" + tag + "', found '" + tok + "'", 0);
}

double read_double(std::istream& in, const std::string& what) {
  const std::string tok = next_token(in, what);
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("checkpoint has a non-numeric " + what + " '" + tok + "'", 0);
  }
  return v;
}

long long read_int(std::istream& in, const std::string& what) {
  const std::string tok = next_token(in, what);
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("checkpoint has a non-integer " + what + " '" + tok + "'", 0);
  }
  return v;
}

int read_dim(std::istream& in, const std::string& what) {
  const long long v = read_int(in, what);
  if (v < 0 || v > 1'000'000) throw ParseError("checkpoint has an implausible " + what, 0);
  return static_cast<int>(v);
}

}  // namespace

void write_vector(std::string& out, const Eigen::VectorXd& v) {
  out += std::to_string(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += format_double(v(i));
  }
  out += '\n';
}

Eigen::VectorXd read_vector(std::istream& in, const std::string& tag) {
  expect(in, tag);
  const int n = read_dim(in, tag + " length");
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = read_double(in, tag);
  return v;
}

std::string serialize_mlp(const Mlp& mlp) {
  const MlpArch& a = mlp.arch();
  std::string out = "mlp " + std::to_string(kMlpFormatVersion) + "\n";
  out += "arch " + std::to_string(a.input) + ' ' + std::to_string(a.hidden.size());
  for (int h : a.hidden) out += ' ' + std::to_string(h);
  out += ' ' + std::to_string(a.output) + "\nactivation tanh\n";
  for (int l = 0; l < a.layer_count(); ++l) {
    const Eigen::MatrixXd& w = mlp.weight(l);
    out += "weight " + std::to_string(w.rows()) + ' ' + std::to_string(w.cols()) + '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (c) out += ' ';
        out += format_double(w(r, c));
      }
      out += '\n';
    }
    out += "bias ";
    write_vector(out, mlp.bias(l));
  }
  out += "end-mlp\n";
  return out;
}

Mlp parse_mlp(std::istream& in) {
  expect(in, "mlp");
  const long long version = read_int(in, "mlp version");
  if (version != kMlpFormatVersion) {
    throw VersionError("network block version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kMlpFormatVersion) + ")");
  }
  expect(in, "arch");
  MlpArch arch;
  arch.input = read_dim(in, "input size");
  const int hidden = read_dim(in, "hidden layer count");
  for (int i = 0; i < hidden; ++i) arch.hidden.push_back(read_dim(in, "hidden width"));
  arch.output = read_dim(in, "output size");
  expect(in, "activation");
  if (next_token(in, "activation") != "tanh") throw ParseError("unsupported activation", 0);

  Mlp mlp(arch);
  for (int l = 0; l < arch.layer_count(); ++l) {
    expect(in, "weight");
    const int rows = read_dim(in, "weight rows");
    const int cols = read_dim(in, "weight cols");
    Eigen::MatrixXd& w = mlp.mutable_weight(l);
    if (rows != w.rows() || cols != w.cols()) {
      throw ParseError("weight block shape does not match the architecture", 0);
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = read_double(in, "weight");
    }
    Eigen::VectorXd b = read_vector(in, "bias");
    if (b.size() != mlp.bias(l).size()) {
      throw ParseError("bias block shape does not match the architecture", 0);
    }
    mlp.mutable_bias(l) = std::move(b);
  }
  expect(in, "end-mlp");
  return mlp;
}

Mlp parse_mlp(const std::string& text) {
  std::istringstream in(text);
  return parse_mlp(in);
}

std::string serialize_checkpoint(const TrainState& s) {
  const TrainConfig& c = s.config;
  std::string out = "marlta-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += "head " + to_string(s.model.head) + "\n";
  auto kv = [&out](const char* key, const std::string& value) {
    out += std::string("config ") + key + ' ' + value + '\n';
  };
  kv("hidden_size", std::to_string(c.hidden_size));
  kv("layers", std::to_string(c.layers));
  kv("lr", format_double(c.lr));
  kv("clip", format_double(c.clip));
  kv("minibatch", std::to_string(c.minibatch));
  kv("gamma", format_double(c.gamma));
  kv("gae_lambda", format_double(c.gae_lambda));
  kv("epochs", std::to_string(c.epochs));
  kv("ent_coef", format_double(c.ent_coef));
  kv("vf_coef", format_double(c.vf_coef));
  kv("max_grad_norm", format_double(c.max_grad_norm));
  kv("workers", std::to_string(c.workers));
  kv("episodes_per_worker", std::to_string(c.episodes_per_worker));
  kv("iterations", std::to_string(c.iterations));
  kv("checkpoint_every", std::to_string(c.checkpoint_every));
  kv("seed", std::to_string(c.seed));
  kv("prune", c.prune ? "1" : "0");
  out += "iteration " + std::to_string(s.iteration) + "\n";
  out += "episodes " + std::to_string(s.episodes) + "\n";
  out += "history " + std::to_string(s.history.size()) + "\n";
  for (const IterationMetrics& m : s.history) {
    out += std::to_string(m.iter) + ' ' + std::to_string(m.episodes) + ' ' +
           format_double(m.mean_reward) + ' ' + format_double(m.min_gap) + ' ' +
           format_double(m.final_gap) + ' ' + format_double(m.seconds) + '\n';
  }
  out += "policy\n" + serialize_mlp(s.model.policy);
  out += "value\n" + serialize_mlp(s.model.value);
  write_vector(out += "log_std ", s.model.log_std);
  out += "adam " + std::to_string(s.optimizer.steps()) + ' ' +
         format_double(s.optimizer.config().beta1) + ' ' +
         format_double(s.optimizer.config().beta2) + ' ' +
         format_double(s.optimizer.config().eps) + '\n';
  write_vector(out += "m ", s.optimizer.first_moment());
  write_vector(out += "v ", s.optimizer.second_moment());
  out += "end\n";
  return out;
}

TrainState parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  expect(in, "marlta-checkpoint");
  const long long version = read_int(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  TrainState s;
  expect(in, "head");
  s.model.head = head_kind_from_string(next_token(in, "head"));
  TrainConfig& c = s.config;
  c.head = s.model.head;
  std::string tok = next_token(in, "config");
  while (tok == "config") {
    const std::string key = next_token(in, "config key");
    if (key == "hidden_size") c.hidden_size = static_cast<int>(read_int(in, key));
    else if (key == "layers") c.layers = static_cast<int>(read_int(in, key));
    else if (key == "lr") c.lr = read_double(in, key);
    else if (key == "clip") c.clip = read_double(in, key);
    else if (key == "minibatch") c.minibatch = static_cast<int>(read_int(in, key));
    else if (key == "gamma") c.gamma = read_double(in, key);
    else if (key == "gae_lambda") c.gae_lambda = read_double(in, key);
    else if (key == "epochs") c.epochs = static_cast<int>(read_int(in, key));
    else if (key == "ent_coef") c.ent_coef = read_double(in, key);
    else if (key == "vf_coef") c.vf_coef = read_double(in, key);
    else if (key == "max_grad_norm") c.max_grad_norm = read_double(in, key);
    else if (key == "workers") c.workers = static_cast<int>(read_int(in, key));
    else if (key == "episodes_per_worker") c.episodes_per_worker = static_cast<int>(read_int(in, key));
    else if (key == "iterations") c.iterations = static_cast<int>(read_int(in, key));
    else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(read_int(in, key));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(read_int(in, key));
    else if (key == "prune") c.prune = read_int(in, key) != 0;
    else throw ParseError("unknown checkpoint config key '" + key + "'", 0);
    tok = next_token(in, "config");
  }
  if (tok != "iteration") throw ParseError("checkpoint expected 'iteration', found '" + tok + "'", 0);
  s.iteration = static_cast<int>(read_int(in, "iteration"));
  expect(in, "episodes");
  s.episodes = static_cast<int>(read_int(in, "episodes"));
  expect(in, "history");
  const int rows = read_dim(in, "history length");
  for (int r = 0; r < rows; ++r) {
    IterationMetrics m;
    m.iter = static_cast<int>(read_int(in, "history iter"));
    m.episodes = static_cast<int>(read_int(in, "history episodes"));
    m.mean_reward = read_double(in, "history mean_reward");
    m.min_gap = read_double(in, "history min_gap");
    m.final_gap = read_double(in, "history final_gap");
    m.seconds = read_double(in, "history seconds");
    s.history.push_back(m);
  }
  expect(in, "policy");
  s.model.policy = parse_mlp(in);
  expect(in, "value");
  s.model.value = parse_mlp(in);
  s.model.log_std = read_vector(in, "log_std");
  if (s.model.log_std.size() != kMaxRoutes) throw ParseError("log_std has the wrong length", 0);
  expect(in, "adam");
  const long long steps = read_int(in, "adam steps");
  AdamConfig ac;
  ac.lr = c.lr;
  ac.beta1 = read_double(in, "adam beta1");
  ac.beta2 = read_double(in, "adam beta2");
  ac.eps = read_double(in, "adam eps");
  Eigen::VectorXd m = read_vector(in, "m");
  Eigen::VectorXd v = read_vector(in, "v");
  expect(in, "end");
  if (m.size() != static_cast<Eigen::Index>(s.model.parameter_count()) || v.size() != m.size()) {
    throw ParseError("optimizer state does not match the network size", 0);
  }
  if (s.model.policy.arch().hidden != c.hidden() || s.model.value.arch().hidden != c.hidden()) {
    throw ParseError("checkpoint networks disagree with its recorded architecture", 0);
  }
  s.optimizer = Adam(static_cast<std::size_t>(m.size()), ac);
  s.optimizer.restore(std::move(m), std::move(v), steps);
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  write_file_atomic(path, serialize_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace marlta
