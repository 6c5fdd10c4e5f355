#include "dnh/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dnh/errors.hpp"
#include "dnh/optim.hpp"
#include "json.hpp"

namespace dnh {

using json = nlohmann::ordered_json;

const char* run_mode_name(RunMode m) {
  return m == RunMode::dnh ? "dnh" : "static";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "dnh") return RunMode::dnh;
  if (name == "static") return RunMode::static_baseline;
  fail(ErrorKind::config, "unknown mode '" + name + "'");
}

const char* optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::eadam ? "eadam" : "proximal_momentum";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "eadam") return OptimizerKind::eadam;
  if (name == "proximal_momentum") return OptimizerKind::proximal_momentum;
  fail(ErrorKind::config, "unknown optimizer kind '" + name + "'");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

long effective_steps(const ExperimentConfig& cfg) {
  return cfg.total_steps > 0 ? cfg.total_steps
                             : cfg.stream.segment_len * cfg.stream.num_segments;
}

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  require(j.is_object(), ErrorKind::config, "config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& a : allowed)
      if (key == a) ok = true;
    require(ok, ErrorKind::config, "config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config: bad value for " + where + "." + key + ": " + e.what());
  }
}

void read_stream(const json& j, StreamSpec& s) {
  check_keys(j, {"kind", "dim", "segment_len", "num_segments", "shift_magnitude", "noise_std",
                 "seed"},
             "stream");
  std::string kind = stream_kind_name(s.kind);
  read(j, "kind", kind, "stream");
  s.kind = parse_stream_kind(kind);
  read(j, "dim", s.dim, "stream");
  read(j, "segment_len", s.segment_len, "stream");
  read(j, "num_segments", s.num_segments, "stream");
  read(j, "shift_magnitude", s.shift_magnitude, "stream");
  read(j, "noise_std", s.noise_std, "stream");
  read(j, "seed", s.seed, "stream");
}

void read_meta(const json& j, MetaParams& p) {
  check_keys(j, {"tau", "epsilon", "gamma", "eta_f", "beta_momentum", "lambda", "mu",
                 "delta_threshold", "f_min", "f_max", "rollout_k", "fd_h", "cooldown",
                 "hebbian_alpha", "fd_every", "shift_window", "h_floor", "eta_phi", "freq_rule"},
             "meta");
  read(j, "tau", p.tau, "meta");
  read(j, "epsilon", p.epsilon, "meta");
  read(j, "gamma", p.gamma, "meta");
  read(j, "eta_f", p.eta_f, "meta");
  read(j, "beta_momentum", p.beta_momentum, "meta");
  read(j, "lambda", p.lambda, "meta");
  read(j, "mu", p.mu, "meta");
  read(j, "delta_threshold", p.delta_threshold, "meta");
  read(j, "f_min", p.f_min, "meta");
  read(j, "f_max", p.f_max, "meta");
  read(j, "rollout_k", p.rollout_k, "meta");
  read(j, "fd_h", p.fd_h, "meta");
  read(j, "cooldown", p.cooldown, "meta");
  read(j, "hebbian_alpha", p.hebbian_alpha, "meta");
  read(j, "fd_every", p.fd_every, "meta");
  read(j, "shift_window", p.shift_window, "meta");
  read(j, "h_floor", p.h_floor, "meta");
  read(j, "eta_phi", p.eta_phi, "meta");
  std::string rule = freq_rule_name(p.freq_rule);
  read(j, "freq_rule", rule, "meta");
  p.freq_rule = parse_freq_rule(rule);
}

void read_optimizer(const json& j, OptimizerConfig& o) {
  check_keys(j, {"kind", "lr", "beta1", "beta2", "eps", "bias_correction", "eta_beta",
                 "sigma2_init", "momentum_decay"},
             "optimizer");
  std::string kind = optimizer_kind_name(o.kind);
  read(j, "kind", kind, "optimizer");
  o.kind = parse_optimizer_kind(kind);
  read(j, "lr", o.lr, "optimizer");
  read(j, "beta1", o.beta1, "optimizer");
  read(j, "beta2", o.beta2, "optimizer");
  read(j, "eps", o.eps, "optimizer");
  read(j, "bias_correction", o.bias_correction, "optimizer");
  read(j, "eta_beta", o.eta_beta, "optimizer");
  read(j, "sigma2_init", o.sigma2_init, "optimizer");
  read(j, "momentum_decay", o.momentum_decay, "optimizer");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config: parse error: ") + e.what());
  }
  check_keys(j, {"mode", "seed", "total_steps", "log_every", "l0", "l_max", "init_freqs",
                 "learn_phi", "stream", "meta", "optimizer"},
             "top level");
  ExperimentConfig cfg;
  std::string mode = run_mode_name(cfg.mode);
  read(j, "mode", mode, "top level");
  cfg.mode = parse_run_mode(mode);
  read(j, "seed", cfg.seed, "top level");
  read(j, "total_steps", cfg.total_steps, "top level");
  read(j, "log_every", cfg.log_every, "top level");
  read(j, "l0", cfg.l0, "top level");
  read(j, "l_max", cfg.l_max, "top level");
  read(j, "init_freqs", cfg.init_freqs, "top level");
  read(j, "learn_phi", cfg.learn_phi, "top level");
  if (j.contains("stream")) read_stream(j.at("stream"), cfg.stream);
  if (j.contains("meta")) read_meta(j.at("meta"), cfg.meta);
  if (j.contains("optimizer")) read_optimizer(j.at("optimizer"), cfg.optimizer);
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::config, "config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = run_mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  j["total_steps"] = cfg.total_steps;
  j["log_every"] = cfg.log_every;
  j["l0"] = cfg.l0;
  j["l_max"] = cfg.l_max;
  j["init_freqs"] = cfg.init_freqs;
  j["learn_phi"] = cfg.learn_phi;
  json s;
  s["kind"] = stream_kind_name(cfg.stream.kind);
  s["dim"] = cfg.stream.dim;
  s["segment_len"] = cfg.stream.segment_len;
  s["num_segments"] = cfg.stream.num_segments;
  s["shift_magnitude"] = cfg.stream.shift_magnitude;
  s["noise_std"] = cfg.stream.noise_std;
  s["seed"] = cfg.stream.seed;
  j["stream"] = s;
  const MetaParams& p = cfg.meta;
  json m;
  m["tau"] = p.tau;
  m["epsilon"] = p.epsilon;
  m["gamma"] = p.gamma;
  m["eta_f"] = p.eta_f;
  m["beta_momentum"] = p.beta_momentum;
  m["lambda"] = p.lambda;
  m["mu"] = p.mu;
  m["delta_threshold"] = p.delta_threshold;
  m["f_min"] = p.f_min;
  m["f_max"] = p.f_max;
  m["rollout_k"] = p.rollout_k;
  m["fd_h"] = p.fd_h;
  m["cooldown"] = p.cooldown;
  m["hebbian_alpha"] = p.hebbian_alpha;
  m["fd_every"] = p.fd_every;
  m["shift_window"] = p.shift_window;
  m["h_floor"] = p.h_floor;
  m["eta_phi"] = p.eta_phi;
  m["freq_rule"] = freq_rule_name(p.freq_rule);
  j["meta"] = m;
  const OptimizerConfig& o = cfg.optimizer;
  json q;
  q["kind"] = optimizer_kind_name(o.kind);
  q["lr"] = o.lr;
  q["beta1"] = o.beta1;
  q["beta2"] = o.beta2;
  q["eps"] = o.eps;
  q["bias_correction"] = o.bias_correction;
  q["eta_beta"] = o.eta_beta;
  q["sigma2_init"] = o.sigma2_init;
  q["momentum_decay"] = o.momentum_decay;
  j["optimizer"] = q;
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& cfg) {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorKind::config, "config: " + what);
  };
  // Stream fields are validated by the Stream constructor; run them now so a
  // bad config fails at load time rather than mid-setup.
  Stream probe(cfg.stream);
  validate_meta_params(cfg.meta);
  check(cfg.l0 >= 1, "l0 must be >= 1");
  check(cfg.l_max >= cfg.l0, "need l0 <= l_max");
  check(static_cast<int>(cfg.init_freqs.size()) == cfg.l0,
        "init_freqs must list one frequency per initial level");
  for (double f : cfg.init_freqs)
    check(std::isfinite(f) && f >= cfg.meta.f_min && f <= cfg.meta.f_max,
          "init_freqs entries must lie in [f_min, f_max]");
  check(cfg.total_steps >= 0, "total_steps must be >= 0");
  check(cfg.total_steps <= probe.total(), "total_steps exceeds the stream length");
  check(cfg.log_every >= 1, "log_every must be >= 1");
  const OptimizerConfig& o = cfg.optimizer;
  check(std::isfinite(o.lr) && o.lr > 0.0, "optimizer.lr must be > 0");
  check(o.beta1 >= 0.0 && o.beta1 <= kBetaMax, "optimizer.beta1 outside [0, 1-1e-6]");
  check(o.beta2 >= 0.0 && o.beta2 <= kBetaMax, "optimizer.beta2 outside [0, 1-1e-6]");
  check(std::isfinite(o.eps) && o.eps > 0.0, "optimizer.eps must be > 0");
  check(std::isfinite(o.eta_beta) && o.eta_beta >= 0.0, "optimizer.eta_beta must be >= 0");
  check(std::isfinite(o.sigma2_init) && o.sigma2_init >= 0.0,
        "optimizer.sigma2_init must be >= 0");
  check(o.momentum_decay >= 0.0 && o.momentum_decay < 1.0,
        "optimizer.momentum_decay must be in [0,1)");
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(config_to_text(cfg)); }

uint64_t replica_key(const ExperimentConfig& cfg) {
  ExperimentConfig scrubbed = cfg;
  scrubbed.seed = 0;
  scrubbed.stream.seed = 0;
  return fnv1a(config_to_text(scrubbed));
}

std::string hash_hex(uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dnh
