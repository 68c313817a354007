#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plstm/model.hpp"
#include "plstm/tasks.hpp"

namespace plstm {

enum class OptimizerKind { adam, rmsprop };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.001;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam; eps sits outside the sqrt
  double rho = 0.9, delta = 1e-8;                 // rmsprop; delta sits inside the sqrt
  std::optional<double> clip_norm;                // global-norm gradient clip
};

// Moment buffers for one parameter tensor; m2 stays empty under rmsprop.
struct OptimSlot {
  std::string name;
  std::vector<double> m1, m2;
};

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, Model& model);
  void step(Model& model, GradientSet& grads);

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t updates() const { return updates_; }
  void set_updates(std::size_t n) { updates_ = n; }
  std::vector<OptimSlot>& slots() { return slots_; }
  const std::vector<OptimSlot>& slots() const { return slots_; }

 private:
  OptimizerConfig cfg_;
  std::size_t updates_ = 0;
  std::vector<OptimSlot> slots_;  // aligned with named_tensors order
};

struct TrainConfig {
  OptimizerConfig opt;
  std::size_t batch_size = 32;
  std::size_t max_updates = 1000;
  std::size_t eval_every = 200;       // also the train-row logging cadence
  std::size_t updates_per_epoch = 0;  // 0: the epoch column stays 0
  std::uint64_t seed = 1;
  // Early stop: quit once the validation metric clears stop_metric on
  // stop_patience consecutive evals.
  std::optional<double> stop_metric;
  std::size_t stop_patience = 1;
  bool restore_best = false;  // put the best-validation parameters back at the end
};

struct MetricRow {
  std::size_t update_index = 0, epoch = 0;
  std::string split;  // "train" | "valid"
  double loss = 0.0;
  std::string metric_name;
  double metric_value = 0.0;
  double wallclock_s = 0.0;
};

struct RunRecord {
  std::vector<MetricRow> rows;
  std::size_t updates_done = 0;
  bool stopped_early = false;
  double best_metric = 0.0;
  std::size_t best_update = 0;
  // Early-stop outcome: updates_to_stop is the update index of the first eval
  // in the streak that satisfied the rule, meaningful only when threshold_met.
  bool threshold_met = false;
  std::size_t updates_to_stop = 0;
  std::vector<double> best_params;  // flat snapshot, named_tensors order
};

struct EvalOutcome {
  double loss = 0.0;    // target-weighted mean over the split
  double metric = 0.0;
  double num = 0.0, den = 0.0;
};

// ablation_mask (length hidden, 0/1) silences the marked units for the whole
// eval when given.
EvalOutcome eval_model(const Model& model, const Task& task,
                       const std::vector<SequenceBatch>& split,
                       const Vector* ablation_mask = nullptr);

// Seeded loop: one validation eval before the first update, then train/valid
// rows every eval_every updates. A non-finite loss aborts with the first
// offending tensor named.
RunRecord train(Model& model, const Task& task, const TrainConfig& cfg);

// Continuation form: uses the given optimizer and data stream as-is (cfg.seed
// and cfg.opt are ignored), so a restored checkpoint resumes the original
// trajectory. update_base shifts the reported update indices.
RunRecord train(Model& model, const Task& task, const TrainConfig& cfg,
                Optimizer& opt, SeededRng& rng, std::size_t update_base = 0);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

}  // namespace plstm
