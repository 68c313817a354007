#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "plstm/analysis.hpp"
#include "plstm/checkpoint.hpp"

namespace plstm {

// Flat run description. Every field has a working default; 0 (or an empty
// string) means "unset" for the fields documented as optional. File values are
// overridden by CLI flags key by key.
struct ExperimentConfig {
  // What to run. task: copy, copy-var, freq, mnist, charlm, decay-sim,
  // gradcheck, ablate, trace, sweep-p, sweep-T.
  std::string task = "copy";
  std::string model = "plstm";  // lstm, lstm-chrono, plstm, plstm-dt
  std::size_t seed = 1;
  std::string out;  // artifact directory; empty: nothing written

  // Model shape.
  std::size_t hidden = 64;
  double eps = 0.001;
  double fixed_p = 0.0;      // > 0: freeze the decay exponent at this value
  double chrono_tmax = 0.0;  // lstm-chrono; 0: use the task horizon
  std::string input_gate = "coupled";  // coupled, separate
  bool include_time = false;           // freq only: echo t as an input feature

  // Copy task.
  std::size_t copy_alphabet = 8, copy_payload = 10;
  std::size_t T = 100, T_max = 0;  // delay; copy-var draws from {T..T_max}

  // Frequency task.
  std::string freq_sampling = "sync_1";  // sync_1, sync_01, async

  // Sequential MNIST.
  std::string mnist_images, mnist_labels;
  bool mnist_permute = false;
  std::size_t mnist_perm_seed = 0;
  std::size_t mnist_train = 0;  // 0: everything not held out
  std::size_t mnist_valid = 1000;

  // Character LM. Empty path: a deterministic synthetic corpus.
  std::string charlm_path;
  std::size_t charlm_bytes = 1000000;
  std::size_t charlm_window = 150;

  // Training.
  std::string optimizer;  // adam, rmsprop; empty: task default (copy: rmsprop)
  double lr = 0.001;
  double clip_norm = 0.0;  // 0: no clipping
  std::size_t batch_size = 32;
  std::size_t max_updates = 1000;
  std::size_t eval_every = 200;
  std::size_t epochs = 0;  // > 0: overrides max_updates via the epoch size
  std::size_t epoch_sequences = 100000;  // synthetic-task epoch size
  double stop_metric = 0.0;  // 0: no early stop
  std::size_t stop_patience = 2;
  bool restore_best = false;
  std::size_t val_sequences = 0;  // synthetic validation size; 0: task default

  // Persistence.
  std::string checkpoint;  // extra save path; out/checkpoint.json is automatic
  std::string resume;      // checkpoint to continue from

  // Gradient check (small by construction; `hidden` is deliberately ignored).
  std::size_t gradcheck_hidden = 5;
  std::size_t gradcheck_len = 8;
  double gradcheck_fd_step = 1e-5;
  double gradcheck_tol = 1e-4;

  // Ablation.
  std::size_t ablate_group = 5, ablate_total = 100;

  // Sweeps: comma-separated value lists.
  std::string sweep_ps = "0.2,0.5,0.9,2.0";
  std::string sweep_Ts = "50,100,200,500,1000";

  // Idealized decay curves.
  std::string decay_kind = "power";  // power, exponential
  double decay_param = 0.5;
  std::size_t decay_steps = 200;
};

// Flat JSON object; unknown or mistyped keys are refused by name.
ExperimentConfig load_config(const std::string& path);

// One key=value override using the config key names; values parse per the
// field's type.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Canonical JSON echo of the effective config (sorted keys).
std::string config_json(const ExperimentConfig& cfg);

std::unique_ptr<Task> make_task(const ExperimentConfig& cfg);
ModelSpec make_model_spec(const ExperimentConfig& cfg, const Task& task);
TrainConfig make_train_config(const ExperimentConfig& cfg, const Task& task);

// Dispatches on cfg.task, writes artifacts under cfg.out when set, and
// returns the summary JSON (also written to out/summary.json). command "run"
// trains (or simulates, checks, sweeps, per cfg.task); command "eval" skips
// training and scores the configured or resumed model on the validation split.
std::string run_experiment(const ExperimentConfig& cfg,
                           const std::string& command = "run");

}  // namespace plstm
