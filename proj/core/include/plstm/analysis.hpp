#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plstm/optim.hpp"

namespace plstm {

// ---- idealized memory decay ---------------------------------------------------

enum class DecayKind { power, exponential };

struct DecayCurve {
  DecayKind kind = DecayKind::power;
  double param = 0.0;  // exponent p, or per-step retention f0
  std::vector<double> values;  // values[s] = retained fraction after s steps
};

// power: values[s] = s^-p (values[0] = 1). exponential: values[s] = f0^s,
// f0 in (0,1). Length steps+1.
DecayCurve simulate_decay(DecayKind kind, double param, std::size_t steps);

void write_decay_csv(const std::string& path, const DecayCurve& curve);

// ---- reference-time traces ------------------------------------------------------

// k_t for every unit of a single probe sequence: k(unit, step).
struct ResetTrace {
  std::size_t hidden = 0, steps = 0;
  Matrix k;
};

ResetTrace trace_reference_times(const Model& model, const SequenceBatch& probe);

void write_trace_csv(const std::string& path, const ResetTrace& trace);

// Units still referencing the payload window at the end of the delay: at step
// payload+delay-1 (0-based), k <= payload + frac*delay. These carry the
// memory across the gap.
std::vector<std::size_t> find_later_reset_units(const ResetTrace& trace,
                                                std::size_t payload,
                                                std::size_t delay,
                                                double frac = 0.1);

// ---- unit ablation ---------------------------------------------------------------

enum class AblationPolicy { random, later_reset_first };

std::string policy_name(AblationPolicy policy);

struct AblationRow {
  std::size_t n_ablated = 0;
  double accuracy = 0.0;
};

struct AblationReport {
  AblationPolicy policy = AblationPolicy::random;
  std::vector<AblationRow> rows;  // n_ablated = 0, group, 2*group, ..., total
};

// Silences units in growing groups and re-evaluates on the task's validation
// split. random draws the order from rng; later_reset_first takes
// priority_units first, then random fill. total must divide into groups and
// fit inside the hidden size.
AblationReport ablate_and_eval(const Model& model, const Task& task,
                               AblationPolicy policy,
                               const std::vector<std::size_t>& priority_units,
                               std::size_t group, std::size_t total,
                               SeededRng& rng);

struct AblationCsvRow {
  std::size_t n_ablated = 0;
  std::string policy;
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationCsvRow>& rows);

// ---- decay-exponent distribution --------------------------------------------------

struct PStats {
  double mean = 0.0;
  std::vector<std::size_t> histogram;  // equal bins over [0, 1); p >= 1 lands in the last
  double later_reset_mean = 0.0;       // mean over the given unit subset
  std::size_t later_reset_count = 0;
};

PStats p_distribution_stats(const Model& model,
                            const std::vector<std::size_t>& later_units,
                            std::size_t bins = 10);

// ---- sweeps -----------------------------------------------------------------------

// Eval-only accuracy of one trained model across copy delays.
std::vector<std::pair<std::size_t, double>> generalization_sweep(
    const Model& model, const CopyTaskConfig& base,
    const std::vector<std::size_t>& delays, std::size_t val_sequences,
    std::uint64_t data_seed);

struct FixedPResult {
  double p = 0.0;
  bool reached = false;             // early-stop threshold sustained in budget
  std::size_t updates_to_threshold = 0;
  double best_metric = 0.0;
};

// Trains one frozen-exponent model per p value under the same budget and data
// seed; spec.fixed_p is overridden per run.
std::vector<FixedPResult> fixed_p_sweep(const ModelSpec& base, const Task& task,
                                        const TrainConfig& tcfg,
                                        const std::vector<double>& ps,
                                        std::uint64_t model_seed);

// Two-column sweep table, e.g. ("T", "accuracy") or ("p", "updates").
void write_sweep_csv(const std::string& path, const std::string& key_name,
                     const std::string& value_name,
                     const std::vector<std::pair<double, double>>& rows);

}  // namespace plstm
