#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "replab/agent.hpp"
#include "replab/aux.hpp"
#include "replab/bench.hpp"
#include "replab/buffer.hpp"
#include "replab/config.hpp"

namespace replab {

// Training runs in single precision; the gradient tests cover the same
// operations at double.
using Tf = float;

struct StepLog {
  int64_t env_steps = 0;
  int64_t decision_steps = 0;
  bool updated = false;
  bool actor_updated = false;
  double critic = 0;
  double actor = 0;
  double temperature = 0;
  AuxLossReport aux;
};

struct TrainCounters {
  int64_t env_steps = 0;
  int64_t decision_steps = 0;
  int64_t episodes = 0;
  int64_t critic_updates = 0;
  int64_t actor_updates = 0;
  int64_t ema_updates = 0;
  int64_t aux_updates = 0;
};

struct TrainCallbacks {
  std::function<void(const StepLog&)> on_update;
  std::function<void(const RunRecord&)> on_record;
};

struct EvalSummary {
  std::vector<double> returns;
  std::vector<double> normalized;
  double mean_return = 0;
  double mean_normalized = 0;
};

// Everything a run owns: agent, auxiliary modules, optimizers, buffer, env.
// All random draws are derived statelessly from (run seed, stream tag, step
// counter), so a restored checkpoint continues the exact trajectory.
class TrainState {
 public:
  explicit TrainState(const ExperimentConfig& config);

  void run(const TrainCallbacks& cb = {});
  // One decision step: act, push, and (past the initial steps) one gradient
  // phase.  Exposed so tests can drive the loop directly.
  StepLog step(const TrainCallbacks& cb = {});

  EvalSummary evaluate(int episodes, uint64_t seed);

  void save_checkpoint(const std::string& dir);

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& config_hash() const { return hash_; }
  std::string run_id() const;
  std::string method() const;
  const TrainCounters& counters() const { return n_; }
  const std::vector<RunRecord>& records() const { return records_; }
  const StepLog& last_log() const { return last_; }
  SacAgent<Tf>& agent() { return agent_; }
  AuxModules<Tf>& aux_modules() { return aux_; }
  ReplayBuffer& buffer() { return buffer_; }
  EnvAdapter& env() { return *env_; }

  friend std::unique_ptr<TrainState> load_checkpoint(const std::string& dir);

 private:
  void reset_env();
  void gradient_phase(StepLog& log);
  void maybe_eval(int64_t steps_before, const TrainCallbacks& cb);
  Mat<Tf> policy_input(const PixelObservation& obs) const;
  void check_finite(const char* what, double v, const Mat<Tf>& obs,
                    const Mat<Tf>& actions, const Mat<Tf>& rewards) const;
  std::vector<Param<Tf>*> critic_group();
  std::vector<Param<Tf>*> aux_group();
  std::vector<Param<Tf>*> all_param_list();

  ExperimentConfig cfg_;
  std::string hash_;
  int crop_out_ = 0;  // 0 = no crop augmentation configured
  SacAgent<Tf> agent_;
  AuxModules<Tf> aux_;
  std::unique_ptr<EnvAdapter> env_;
  ReplayBuffer buffer_;
  std::unique_ptr<Adam<Tf>> critic_opt_, actor_opt_, alpha_opt_, aux_opt_;
  TrainCounters n_;
  std::vector<RunRecord> records_;
  PixelObservation obs_;
  std::vector<std::shared_ptr<const Image8>> mask_stack_;
  bool record_masks_ = false;
  StepLog last_;
};

// Runs the configured number of env steps; records land in
// out_dir/records.jsonl when run.out_dir is set.
std::unique_ptr<TrainState> train(const ExperimentConfig& config,
                                  const TrainCallbacks& cb = {});

std::unique_ptr<TrainState> load_checkpoint(const std::string& dir);
EvalSummary evaluate_checkpoint(const std::string& dir, int episodes,
                                uint64_t seed);

}  // namespace replab
