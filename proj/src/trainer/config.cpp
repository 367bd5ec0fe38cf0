#include "dgpg/trainer/config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dgpg::trainer {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::DGPG: return "dgpg";
    case Algorithm::MAPPO: return "mappo";
    case Algorithm::IPPO: return "ippo";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "dgpg") return Algorithm::DGPG;
  if (s == "mappo") return Algorithm::MAPPO;
  if (s == "ippo") return Algorithm::IPPO;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

std::string_view to_string(policy::Arch a) { return a == policy::Arch::Linear ? "linear" : "mlp"; }

policy::Arch parse_arch(std::string_view s) {
  if (s == "linear") return policy::Arch::Linear;
  if (s == "mlp") return policy::Arch::Mlp;
  throw std::invalid_argument("unknown arch: " + std::string(s));
}

TrainConfig linear_preset(Algorithm algo) {
  TrainConfig c;
  c.algorithm = algo;
  c.arch = policy::Arch::Linear;
  c.lr = 1e-3;
  c.lr_decay = LrDecay::Linear;
  c.critic_epochs = 20;
  c.actor_epochs = 3;
  c.unified_epochs = false;
  c.minibatch_size = 10000;
  c.grad_clip_norm = 10.0;
  c.parallel_envs = 4;
  c.rollouts_per_episode = 24;
  if (algo == Algorithm::DGPG) {
    c.entropy_coef = 0.01;
    c.entropy_decay = EntropyDecay::Exponential;
    c.episodes = 200;
    c.return_normalization = false;
  } else {
    c.entropy_coef = 0.005;
    c.entropy_decay = EntropyDecay::Fixed;
    c.episodes = 500;
    c.return_normalization = true;
  }
  return c;
}

TrainConfig mlp_preset(Algorithm algo, const env::ScaleConfig& scale) {
  struct Row {
    std::size_t n, hidden, minibatch;
    int rollouts, envs;
    double eps;
  };
  static const Row rows[] = {{5, 128, 256, 12, 4, 0.2},    {10, 128, 512, 12, 4, 0.2},
                             {20, 128, 512, 12, 4, 0.2},   {50, 256, 1024, 8, 4, 0.4},
                             {100, 512, 2048, 6, 2, 0.4},  {200, 1024, 2048, 4, 1, 0.4}};
  const Row* row = &rows[0];
  for (const auto& r : rows)
    if (r.n <= scale.n_servers) row = &r;

  TrainConfig c;
  c.algorithm = algo;
  c.arch = policy::Arch::Mlp;
  c.hidden = row->hidden;
  c.minibatch_size = row->minibatch;
  c.rollouts_per_episode = row->rollouts;
  c.parallel_envs = row->envs;
  c.clip_eps = row->eps;
  c.lr = 3e-4;
  c.lr_decay = LrDecay::Exponential;
  c.critic_epochs = 4;
  c.actor_epochs = 4;
  c.unified_epochs = true;
  c.grad_clip_norm = 0.5;
  c.episodes = 200;
  if (algo == Algorithm::DGPG) {
    c.entropy_coef = 0.02;
    c.entropy_decay = EntropyDecay::Exponential;
    c.return_normalization = false;
  } else {
    c.entropy_coef = 0.005;
    c.entropy_decay = EntropyDecay::Fixed;
    c.return_normalization = true;
  }
  return c;
}

TrainConfig preset(Algorithm algo, policy::Arch arch, const env::ScaleConfig& scale) {
  return arch == policy::Arch::Linear ? linear_preset(algo) : mlp_preset(algo, scale);
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

template <class T>
Setter int_field(T TrainConfig::*m, long lo) {
  return [m, lo](TrainConfig& c, const std::string& k, const std::string& v) {
    const long x = parse_long(k, v);
    if (x < lo) throw std::invalid_argument("key " + k + ": must be >= " + std::to_string(lo));
    c.*m = static_cast<T>(x);
  };
}

Setter real_field(double TrainConfig::*m, double lo, double hi) {
  return [m, lo, hi](TrainConfig& c, const std::string& k, const std::string& v) {
    const double x = parse_double(k, v);
    if (!(x >= lo && x <= hi))
      throw std::invalid_argument("key " + k + ": out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    c.*m = x;
  };
}

Setter bool_field(bool TrainConfig::*m) {
  return [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"algorithm", [](TrainConfig& c, const std::string&, const std::string& v) { c.algorithm = parse_algorithm(v); }},
      {"arch", [](TrainConfig& c, const std::string&, const std::string& v) { c.arch = parse_arch(v); }},
      {"hidden", int_field(&TrainConfig::hidden, 0)},
      {"gamma", real_field(&TrainConfig::gamma, 0.0, 1.0)},
      {"gae_lambda", real_field(&TrainConfig::gae_lambda, 0.0, 1.0)},
      {"clip_eps", real_field(&TrainConfig::clip_eps, 0.0, 10.0)},
      {"lr", real_field(&TrainConfig::lr, 0.0, 1.0)},
      {"lr_decay",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "constant") c.lr_decay = LrDecay::Constant;
         else if (v == "linear") c.lr_decay = LrDecay::Linear;
         else if (v == "exponential") c.lr_decay = LrDecay::Exponential;
         else throw std::invalid_argument("key " + k + ": expected constant, linear or exponential");
       }},
      {"lr_final_frac", real_field(&TrainConfig::lr_final_frac, 1e-12, 1.0)},
      {"lr_decay_end", real_field(&TrainConfig::lr_decay_end, 1e-6, 1.0)},
      {"entropy_coef", real_field(&TrainConfig::entropy_coef, 0.0, 10.0)},
      {"entropy_decay",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "fixed") c.entropy_decay = EntropyDecay::Fixed;
         else if (v == "exponential") c.entropy_decay = EntropyDecay::Exponential;
         else throw std::invalid_argument("key " + k + ": expected fixed or exponential");
       }},
      {"entropy_final", real_field(&TrainConfig::entropy_final, 1e-12, 10.0)},
      {"critic_epochs", int_field(&TrainConfig::critic_epochs, 0)},
      {"actor_epochs", int_field(&TrainConfig::actor_epochs, 0)},
      {"unified_epochs", bool_field(&TrainConfig::unified_epochs)},
      {"minibatch_size", int_field(&TrainConfig::minibatch_size, 1)},
      {"rollouts_per_episode", int_field(&TrainConfig::rollouts_per_episode, 1)},
      {"parallel_envs", int_field(&TrainConfig::parallel_envs, 1)},
      {"episodes", int_field(&TrainConfig::episodes, 1)},
      {"alpha_schedule",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "dynamic") c.alpha_mode = AlphaMode::Dynamic;
         else if (v == "constant") c.alpha_mode = AlphaMode::Constant;
         else throw std::invalid_argument("key " + k + ": expected dynamic or constant");
       }},
      {"alpha_value", real_field(&TrainConfig::alpha_value, 0.0, 1.0)},
      {"guidance_basis",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "pressure") c.guidance_basis = guidance::LoadBasis::Pressure;
         else if (v == "running") c.guidance_basis = guidance::LoadBasis::Running;
         else throw std::invalid_argument("key " + k + ": expected pressure or running");
       }},
      {"huber_delta", real_field(&TrainConfig::huber_delta, 1e-9, 1e12)},
      {"grad_clip_norm", real_field(&TrainConfig::grad_clip_norm, 1e-12, 1e12)},
      {"return_normalization", bool_field(&TrainConfig::return_normalization)},
      {"eval_every", int_field(&TrainConfig::eval_every, 0)},
      {"eval_scenarios", int_field(&TrainConfig::eval_scenarios, 0)},
  };
  return table;
}

}  // namespace

void apply_entries(TrainConfig& cfg, const KvSection& section) {
  for (const auto& e : section.entries) {
    const auto it = setters().find(e.key);
    if (it == setters().end())
      throw std::invalid_argument("line " + std::to_string(e.line) + ": unknown key " + e.key);
    try {
      it->second(cfg, e.key, e.value);
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("line " + std::to_string(e.line) + ": " + ex.what());
    }
  }
}

void apply_document(TrainConfig& cfg, const KvDocument& doc, std::initializer_list<std::string_view> ignored) {
  const std::string algo(to_string(cfg.algorithm));
  const std::string arch(to_string(cfg.arch));
  const std::string names[] = {"train", algo, algo + "." + arch};
  for (const auto& s : doc.sections()) {
    bool known = std::find(std::begin(ignored), std::end(ignored), s.name) != std::end(ignored);
    for (const char* a : {"dgpg", "mappo", "ippo"}) {
      if (s.name == a) known = true;
      for (const char* r : {"linear", "mlp"})
        if (s.name == std::string(a) + "." + r) known = true;
    }
    if (s.name == "train") known = true;
    if (!known) throw std::invalid_argument(doc.source() + ": unknown section [" + s.name + "]");
  }
  for (const auto& n : names)
    if (const auto* s = doc.find(n)) {
      apply_entries(cfg, *s);
      // A section may not switch the run to a different algorithm or model.
      if (cfg.algorithm != parse_algorithm(algo) || cfg.arch != parse_arch(arch))
        throw std::invalid_argument(doc.source() + ": section [" + n + "] changes algorithm or arch");
    }
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[train]\n"
    << "algorithm = " << to_string(c.algorithm) << '\n'
    << "arch = " << to_string(c.arch) << '\n'
    << "hidden = " << c.hidden << '\n'
    << "gamma = " << c.gamma << '\n'
    << "gae_lambda = " << c.gae_lambda << '\n'
    << "clip_eps = " << c.clip_eps << '\n'
    << "lr = " << c.lr << '\n'
    << "lr_decay = "
    << (c.lr_decay == LrDecay::Constant ? "constant" : c.lr_decay == LrDecay::Linear ? "linear" : "exponential")
    << '\n'
    << "lr_final_frac = " << c.lr_final_frac << '\n'
    << "lr_decay_end = " << c.lr_decay_end << '\n'
    << "entropy_coef = " << c.entropy_coef << '\n'
    << "entropy_decay = " << (c.entropy_decay == EntropyDecay::Fixed ? "fixed" : "exponential") << '\n'
    << "entropy_final = " << c.entropy_final << '\n'
    << "critic_epochs = " << c.critic_epochs << '\n'
    << "actor_epochs = " << c.actor_epochs << '\n'
    << "unified_epochs = " << (c.unified_epochs ? "true" : "false") << '\n'
    << "minibatch_size = " << c.minibatch_size << '\n'
    << "rollouts_per_episode = " << c.rollouts_per_episode << '\n'
    << "parallel_envs = " << c.parallel_envs << '\n'
    << "episodes = " << c.episodes << '\n'
    << "alpha_schedule = " << (c.alpha_mode == AlphaMode::Dynamic ? "dynamic" : "constant") << '\n'
    << "alpha_value = " << c.alpha_value << '\n'
    << "guidance_basis = " << (c.guidance_basis == guidance::LoadBasis::Pressure ? "pressure" : "running") << '\n'
    << "huber_delta = " << c.huber_delta << '\n'
    << "grad_clip_norm = " << c.grad_clip_norm << '\n'
    << "return_normalization = " << (c.return_normalization ? "true" : "false") << '\n'
    << "eval_every = " << c.eval_every << '\n'
    << "eval_scenarios = " << c.eval_scenarios << '\n';
  return o.str();
}

}  // namespace dgpg::trainer
