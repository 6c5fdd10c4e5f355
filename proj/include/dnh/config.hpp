#pragma once

// Experiment configuration: JSON schema with strict unknown-key rejection,
// defaults, validation, and the two run identifiers (config_hash covers
// everything including seeds; replica_key covers everything except seeds, so
// replicas of one experiment share it).

#include <cstdint>
#include <string>
#include <vector>

#include "dnh/meta.hpp"
#include "dnh/streams.hpp"

namespace dnh {

enum class RunMode { dnh, static_baseline };
const char* run_mode_name(RunMode m);  // "dnh" / "static"
RunMode parse_run_mode(const std::string& name);

enum class OptimizerKind { eadam, proximal_momentum };
const char* optimizer_kind_name(OptimizerKind k);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::proximal_momentum;
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool bias_correction = true;
  double eta_beta = 0.0;     // beta drift step; 0 disables evolution
  double sigma2_init = 0.0;  // initial exploration variance on the betas
  double momentum_decay = 0.9;  // proximal_momentum only
};

struct ExperimentConfig {
  StreamSpec stream;
  MetaParams meta;
  RunMode mode = RunMode::dnh;
  int l0 = 2;
  int l_max = 5;
  std::vector<double> init_freqs{2.0, 1.0};
  OptimizerConfig optimizer;
  uint64_t seed = 42;
  long total_steps = 0;  // 0 = the full stream
  long log_every = 50;
  bool learn_phi = false;  // rollout-estimated updates of gamma and the gate
};

// Effective step count: total_steps, or the stream length when 0.
long effective_steps(const ExperimentConfig& cfg);

ExperimentConfig default_config();

// Strict parse: unknown keys anywhere are a config error, as are wrong types
// and invalid values. Absent keys take defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical echo (fixed key order, all fields explicit). parse(echo(c)) == c.
std::string config_to_text(const ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

uint64_t fnv1a(const std::string& bytes);
uint64_t config_hash(const ExperimentConfig& cfg);  // includes both seeds
uint64_t replica_key(const ExperimentConfig& cfg);  // seeds zeroed out
std::string hash_hex(uint64_t h);

}  // namespace dnh
