#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "replab/aug.hpp"
#include "replab/aux.hpp"
#include "replab/env.hpp"

namespace replab {

struct EnvConfig {
  std::string task = "pointmass";
  int episode_length = 50;  // decision steps per episode
  EmissionConfig emission;
};

struct AgentConfig {
  int latent = 16;
  int filters = 8;
  int hidden = 256;
  int n_layers = 3;
  double gamma = 0.99;
  double tau = 0.005;
  double init_alpha = 0.1;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double alpha_lr = 1e-4;
  int batch_size = 64;
  int init_steps = 1000;       // random-policy decision steps before updates
  int target_update_freq = 2;  // actor / temperature / EMA cadence
  int64_t buffer_capacity = 20000;
};

struct AuxSection {
  AuxOptions options;
  double lr = 1e-3;
  int trans_hidden = 64;
  int trans_layers = 4;
  int reward_hidden = 128;
  int reward_layers = 3;
  int proj_dim = 16;
};

struct RunConfig {
  // Step counts are environment steps; with action repeat k one decision
  // step consumes k of them.
  int64_t total_steps = 20000;
  int64_t eval_every = 4000;
  int eval_episodes = 10;
  uint64_t seed = 1;
  std::string out_dir;
  std::string preset = "desk";
  std::string method;  // RunRecord label; defaults to the aux objective name
};

struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  AuxSection aux;
  std::vector<AugmentationSpec> augmentations;
  RunConfig run;
};

// preset: "desk" (64x64, latent 16, batch 64, 20k buffer) or "paper"
// (84x84, latent 50, batch 128, 100k buffer).
ExperimentConfig default_config(const std::string& preset = "desk");

// Strict parse over the preset's defaults: unknown keys and type mismatches
// raise ConfigError naming the key and line; values are range-checked.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& preset = "desk");
ExperimentConfig load_config(const std::string& path,
                             const std::string& preset = "desk");
void validate_config(const ExperimentConfig& c);

// Full canonical form (every field, sorted keys); the hash is over this
// serialization, so key order and defaulted-vs-explicit never matter.
std::string config_to_canonical_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// Encoder geometry implied by the config: the spatial size the encoder sees
// is the crop output when a crop augmentation is configured.
EncoderSpec encoder_spec_from(const ExperimentConfig& c);

// Four-deconv chain landing exactly on out x out (kernel/seed search);
// ConfigError when no chain reaches the requested size.
DecoderSpec decoder_spec_for(int out, int channels, int latent, int filters);

}  // namespace replab
