#include "dgpg/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dgpg::policy {

namespace {

constexpr const char* kCheckpointTag = "dgpg-policy";
constexpr int kCheckpointVersion = 1;

NetSpec actor_spec(const PolicyConfig& c) {
  return {c.arch, c.prefix_dim, c.suffix_dim, c.act_dim, c.hidden, c.embed, c.id_scale};
}

NetSpec critic_spec(const PolicyConfig& c) {
  return {c.arch, c.critic_prefix_dim, c.suffix_dim, 1, c.hidden, c.embed, c.id_scale};
}

void check_obs(const PolicyParams& params, std::span<const double> obs) {
  if (obs.size() != params.obs_dim)
    throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " entries, policy expects " +
                                std::to_string(params.obs_dim));
  for (double v : obs)
    if (!std::isfinite(v)) throw std::invalid_argument("observation contains a non-finite value");
}

std::vector<double> probs_of(const PolicyParams& params, std::span<const double> obs, Workspace& ws) {
  check_obs(params, obs);
  params.actor.forward(obs, ws);
  std::vector<double> p(params.act_dim);
  softmax(ws.out, p);
  return p;
}

}  // namespace

PolicyParams make_policy(const PolicyConfig& config, std::uint64_t seed) {
  if (config.act_dim == 0) throw std::invalid_argument("make_policy: act_dim must be positive");
  if (config.critic_prefix_dim > config.prefix_dim)
    throw std::invalid_argument("make_policy: critic prefix longer than the observation prefix");
  PolicyParams p;
  p.arch = config.arch;
  p.obs_dim = config.prefix_dim + config.suffix_dim;
  p.act_dim = config.act_dim;
  p.prefix_dim = config.prefix_dim;
  p.critic_prefix_dim = config.critic_prefix_dim;
  p.actor = Network(actor_spec(config));
  p.critic = Network(critic_spec(config));
  Rng rng(derive_seed(seed, 0x9011c7));
  p.actor.init(rng);
  p.critic.init(rng);
  return p;
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    s += probs[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] /= s;
}

double entropy_of(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(0.0, h);
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double c = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    c += probs[i];
    if (u < c) return i;
  }
  // Rounding left u above the total: fall back to the last action with mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

std::size_t argmax(std::span<const double> probs) {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<double> critic_input(const PolicyParams& params, std::span<const double> obs) {
  std::vector<double> in(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(params.critic_prefix_dim));
  in.insert(in.end(), obs.begin() + static_cast<std::ptrdiff_t>(params.prefix_dim), obs.end());
  return in;
}

std::vector<double> actor_forward(const PolicyParams& params, std::span<const double> obs) {
  Workspace ws;
  return probs_of(params, obs, ws);
}

double critic_value(const PolicyParams& params, std::span<const double> obs) {
  check_obs(params, obs);
  return params.critic.forward(critic_input(params, obs))[0];
}

ActionSample sample_and_score(const PolicyParams& params, std::span<const double> obs, Rng& rng) {
  const auto p = actor_forward(params, obs);
  ActionSample s;
  s.action = sample_categorical(p, rng);
  s.log_prob = std::min(0.0, std::log(p[s.action]));
  s.entropy = entropy_of(p);
  s.value = critic_value(params, obs);
  return s;
}

double huber_loss(double err, double delta) noexcept {
  const double a = std::abs(err);
  return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

double huber_grad(double err, double delta) noexcept { return std::clamp(err, -delta, delta); }

double log_prob(const PolicyParams& params, std::span<const double> obs, std::size_t action) {
  check_obs(params, obs);
  const auto z = params.actor.forward(obs);
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return z.at(action) - m - std::log(s);
}

double policy_entropy(const PolicyParams& params, std::span<const double> obs) {
  return entropy_of(actor_forward(params, obs));
}

double value_loss(const PolicyParams& params, std::span<const double> obs, double target, double delta) {
  return huber_loss(critic_value(params, obs) - target, delta);
}

void grad_log_prob_logits(std::span<const double> probs, std::size_t action, std::span<double> out) {
  for (std::size_t k = 0; k < probs.size(); ++k) out[k] = (k == action ? 1.0 : 0.0) - probs[k];
}

void grad_entropy_logits(std::span<const double> probs, std::span<double> out) {
  const double h = entropy_of(probs);
  for (std::size_t k = 0; k < probs.size(); ++k)
    out[k] = probs[k] > 0.0 ? -probs[k] * (std::log(probs[k]) + h) : 0.0;
}

PolicyGradient grad_log_prob_and_value(const PolicyParams& params, std::span<const double> obs,
                                       std::size_t action, double target, double delta) {
  if (action >= params.act_dim) throw std::invalid_argument("grad_log_prob_and_value: invalid action");
  Workspace ws;
  const auto p = probs_of(params, obs, ws);
  std::vector<double> d(params.act_dim);
  grad_log_prob_logits(p, action, d);
  PolicyGradient g{std::vector<double>(params.actor.size(), 0.0), std::vector<double>(params.critic.size(), 0.0)};
  params.actor.backward(obs, ws, d.data(), g.actor.data());

  const auto cin = critic_input(params, obs);
  Workspace cws;
  params.critic.forward(cin, cws);
  const double dv = huber_grad(cws.out[0] - target, delta);
  params.critic.backward(cin, cws, &dv, g.critic.data());
  return g;
}

std::vector<double> grad_entropy(const PolicyParams& params, std::span<const double> obs) {
  Workspace ws;
  const auto p = probs_of(params, obs, ws);
  std::vector<double> d(params.act_dim);
  grad_entropy_logits(p, d);
  std::vector<double> g(params.actor.size(), 0.0);
  params.actor.backward(obs, ws, d.data(), g.data());
  return g;
}

std::string serialize(const PolicyParams& params) {
  const NetSpec& a = params.actor.spec();
  std::ostringstream out;
  out << kCheckpointTag << ' ' << kCheckpointVersion << '\n'
      << "arch " << (params.arch == Arch::Linear ? "linear" : "mlp") << '\n'
      << "obs_dim " << params.obs_dim << '\n'
      << "act_dim " << params.act_dim << '\n'
      << "prefix_dim " << params.prefix_dim << '\n'
      << "critic_prefix_dim " << params.critic_prefix_dim << '\n'
      << "suffix_dim " << a.suffix_dim << '\n'
      << "hidden " << a.hidden << '\n'
      << "embed " << a.embed << '\n'
      << "id_scale " << a.id_scale << '\n';
  char buf[64];
  auto dump = [&](const char* name, std::span<const double> w) {
    out << name << ' ' << w.size() << '\n';
    for (double v : w) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      out << buf;
    }
  };
  dump("actor", params.actor.params());
  dump("critic", params.critic.params());
  out << "end\n";
  return out.str();
}

PolicyParams deserialize(const std::string& text) {
  std::istringstream in(text);
  auto fail = [](const std::string& why) -> void { throw std::runtime_error("checkpoint: " + why); };
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != kCheckpointTag) fail("not a policy checkpoint");
  if (version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));

  auto field = [&](const char* name) {
    std::string key;
    std::size_t v = 0;
    if (!(in >> key >> v) || key != name) fail(std::string("expected field ") + name);
    return v;
  };
  std::string key, arch;
  in >> key >> arch;
  if (key != "arch" || (arch != "linear" && arch != "mlp")) fail("bad arch line");
  PolicyConfig c;
  c.arch = arch == "linear" ? Arch::Linear : Arch::Mlp;
  const std::size_t obs_dim = field("obs_dim");
  c.act_dim = field("act_dim");
  c.prefix_dim = field("prefix_dim");
  c.critic_prefix_dim = field("critic_prefix_dim");
  c.suffix_dim = field("suffix_dim");
  c.hidden = field("hidden");
  c.embed = field("embed");
  c.id_scale = field("id_scale");
  if (obs_dim != c.prefix_dim + c.suffix_dim) fail("inconsistent dimensions");

  PolicyParams p;
  p.arch = c.arch;
  p.obs_dim = obs_dim;
  p.act_dim = c.act_dim;
  p.prefix_dim = c.prefix_dim;
  p.critic_prefix_dim = c.critic_prefix_dim;
  p.actor = Network(actor_spec(c));
  p.critic = Network(critic_spec(c));

  auto read = [&](const char* name, std::span<double> w) {
    if (field(name) != w.size()) fail(std::string("wrong weight count for ") + name);
    std::string tok;
    for (double& v : w) {
      if (!(in >> tok)) fail("truncated weights");
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') fail("bad number " + tok);
    }
  };
  read("actor", p.actor.params());
  read("critic", p.critic.params());
  in >> key;
  if (key != "end") fail("missing end marker");
  return p;
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << serialize(params);
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace dgpg::policy
