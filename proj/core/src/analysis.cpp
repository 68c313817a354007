#include "plstm/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "plstm/backprop.hpp"
#include "plstm/errors.hpp"
#include "plstm/io.hpp"

namespace plstm {

DecayCurve simulate_decay(DecayKind kind, double param, std::size_t steps) {
  DecayCurve curve;
  curve.kind = kind;
  curve.param = param;
  curve.values.resize(steps + 1);
  curve.values[0] = 1.0;
  if (kind == DecayKind::power) {
    if (param <= 0) throw ArgumentError("decay exponent must be positive");
    for (std::size_t s = 1; s <= steps; ++s)
      curve.values[s] = std::pow(double(s), -param);
  } else {
    if (param <= 0 || param >= 1)
      throw ArgumentError("retention factor must lie in (0,1)");
    for (std::size_t s = 1; s <= steps; ++s)
      curve.values[s] = curve.values[s - 1] * param;
  }
  return curve;
}

void write_decay_csv(const std::string& path, const DecayCurve& curve) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(curve.values.size());
  for (std::size_t s = 0; s < curve.values.size(); ++s)
    cells.push_back({std::to_string(s), fmt_double(curve.values[s])});
  write_csv(path, {"step", "value"}, cells);
}

ResetTrace trace_reference_times(const Model& model, const SequenceBatch& probe) {
  if (model.kind != CellKind::plstm)
    throw ArgumentError("reference-time traces need a power-law cell");
  if (probe.batch != 1)
    throw ArgumentError(detail::cat("probe batch must be 1, got ", probe.batch));
  std::vector<Matrix> per_step;
  BpttOptions opts;
  opts.want_grads = false;
  opts.k_trace = &per_step;
  run_bptt(model, probe, opts);

  ResetTrace trace;
  trace.hidden = model.hidden();
  trace.steps = probe.steps;
  trace.k = Matrix(trace.hidden, trace.steps);
  for (std::size_t t = 0; t < trace.steps; ++t)
    for (std::size_t u = 0; u < trace.hidden; ++u)
      trace.k(u, t) = per_step[t](0, u);
  return trace;
}

void write_trace_csv(const std::string& path, const ResetTrace& trace) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(trace.hidden * trace.steps);
  for (std::size_t u = 0; u < trace.hidden; ++u)
    for (std::size_t t = 0; t < trace.steps; ++t)
      cells.push_back({std::to_string(u), std::to_string(t),
                       fmt_double(trace.k(u, t))});
  write_csv(path, {"unit", "step", "k"}, cells);
}

std::vector<std::size_t> find_later_reset_units(const ResetTrace& trace,
                                                std::size_t payload,
                                                std::size_t delay,
                                                double frac) {
  if (payload == 0 || delay == 0)
    throw ArgumentError("payload and delay must be positive");
  const std::size_t column = payload + delay - 1;
  if (column >= trace.steps)
    throw ArgumentError(detail::cat("trace has ", trace.steps,
                                    " steps, need column ", column));
  const double threshold = double(payload) + frac * double(delay);
  std::vector<std::size_t> units;
  for (std::size_t u = 0; u < trace.hidden; ++u)
    if (trace.k(u, column) <= threshold) units.push_back(u);
  return units;
}

std::string policy_name(AblationPolicy policy) {
  return policy == AblationPolicy::random ? "random" : "later_reset_first";
}

AblationReport ablate_and_eval(const Model& model, const Task& task,
                               AblationPolicy policy,
                               const std::vector<std::size_t>& priority_units,
                               std::size_t group, std::size_t total,
                               SeededRng& rng) {
  const std::size_t hidden = model.hidden();
  if (group == 0) throw ArgumentError("ablation group must be positive");
  if (total == 0 || total % group != 0)
    throw ArgumentError(detail::cat("ablation total ", total,
                                    " must be a positive multiple of ", group));
  if (total > hidden)
    throw ArgumentError(detail::cat("cannot ablate ", total, " of ", hidden,
                                    " units"));
  for (std::size_t u : priority_units)
    if (u >= hidden)
      throw ArgumentError(detail::cat("priority unit ", u, " out of range"));

  std::vector<std::size_t> order;
  order.reserve(total);
  std::vector<std::uint8_t> taken(hidden, 0);
  if (policy == AblationPolicy::later_reset_first) {
    for (std::size_t u : priority_units) {
      if (taken[u] || order.size() == total) continue;
      taken[u] = 1;
      order.push_back(u);
    }
  }
  for (std::size_t u : rng.permutation(hidden)) {
    if (order.size() == total) break;
    if (taken[u]) continue;
    taken[u] = 1;
    order.push_back(u);
  }

  AblationReport report;
  report.policy = policy;
  Vector keep(hidden);
  for (std::size_t n = 0; n <= total; n += group) {
    for (std::size_t u = 0; u < hidden; ++u) keep[u] = 1.0;
    for (std::size_t i = 0; i < n; ++i) keep[order[i]] = 0.0;
    const EvalOutcome ev = eval_model(model, task, task.validation(), &keep);
    report.rows.push_back({n, ev.metric});
  }
  return report;
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationCsvRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const AblationCsvRow& r : rows)
    cells.push_back({std::to_string(r.n_ablated), r.policy,
                     fmt_double(r.accuracy), std::to_string(r.seed)});
  write_csv(path, {"n_ablated", "policy", "accuracy", "seed"}, cells);
}

PStats p_distribution_stats(const Model& model,
                            const std::vector<std::size_t>& later_units,
                            std::size_t bins) {
  if (model.kind != CellKind::plstm)
    throw ArgumentError("decay-exponent stats need a power-law cell");
  if (bins == 0) throw ArgumentError("histogram needs at least one bin");
  const Vector p = model.plstm.p();
  PStats stats;
  stats.histogram.assign(bins, 0);
  for (std::size_t u = 0; u < p.len(); ++u) {
    stats.mean += p[u];
    const auto bin = std::min(bins - 1,
                              std::size_t(std::max(0.0, p[u]) * double(bins)));
    ++stats.histogram[bin];
  }
  if (p.len()) stats.mean /= double(p.len());
  for (std::size_t u : later_units) {
    if (u >= p.len())
      throw ArgumentError(detail::cat("unit ", u, " out of range"));
    stats.later_reset_mean += p[u];
    ++stats.later_reset_count;
  }
  if (stats.later_reset_count)
    stats.later_reset_mean /= double(stats.later_reset_count);
  return stats;
}

std::vector<std::pair<std::size_t, double>> generalization_sweep(
    const Model& model, const CopyTaskConfig& base,
    const std::vector<std::size_t>& delays, std::size_t val_sequences,
    std::uint64_t data_seed) {
  std::vector<std::pair<std::size_t, double>> rows;
  rows.reserve(delays.size());
  for (std::size_t T : delays) {
    CopyTaskConfig cfg = base;
    cfg.delay = T;
    cfg.delay_max = 0;
    const CopyTask task(cfg, data_seed, val_sequences);
    const EvalOutcome ev = eval_model(model, task, task.validation());
    rows.emplace_back(T, ev.metric);
  }
  return rows;
}

std::vector<FixedPResult> fixed_p_sweep(const ModelSpec& base, const Task& task,
                                        const TrainConfig& tcfg,
                                        const std::vector<double>& ps,
                                        std::uint64_t model_seed) {
  std::vector<FixedPResult> results;
  results.reserve(ps.size());
  for (double p : ps) {
    ModelSpec spec = base;
    spec.fixed_p = p;
    SeededRng rng(model_seed);
    Model model = build_model(spec, rng);
    const RunRecord rec = train(model, task, tcfg);
    FixedPResult r;
    r.p = p;
    r.reached = rec.threshold_met;
    r.updates_to_threshold = rec.updates_to_stop;
    r.best_metric = rec.best_metric;
    results.push_back(r);
  }
  return results;
}

void write_sweep_csv(const std::string& path, const std::string& key_name,
                     const std::string& value_name,
                     const std::vector<std::pair<double, double>>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& [key, value] : rows)
    cells.push_back({fmt_double(key), fmt_double(value)});
  write_csv(path, {key_name, value_name}, cells);
}

}  // namespace plstm
