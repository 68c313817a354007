#include "plstm/optim.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>

#include "plstm/backprop.hpp"
#include "plstm/errors.hpp"
#include "plstm/io.hpp"

namespace plstm {

Optimizer::Optimizer(const OptimizerConfig& cfg, Model& model) : cfg_(cfg) {
  if (cfg_.lr <= 0) throw ArgumentError("learning rate must be positive");
  if (cfg_.clip_norm && *cfg_.clip_norm <= 0)
    throw ArgumentError("clip norm must be positive");
  for (const TensorRef& p : named_tensors(model)) {
    OptimSlot slot;
    slot.name = p.name;
    slot.m1.assign(p.size, 0.0);
    if (cfg_.kind == OptimizerKind::adam) slot.m2.assign(p.size, 0.0);
    slots_.push_back(std::move(slot));
  }
}

void Optimizer::step(Model& model, GradientSet& grads) {
  auto ps = named_tensors(model);
  auto gs = named_tensors(grads);
  if (ps.size() != slots_.size() || gs.size() != slots_.size())
    throw ShapeError("optimizer slots do not match the model");

  if (cfg_.clip_norm) {
    double sq = 0;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (!ps[i].learnable) continue;
      for (std::size_t j = 0; j < gs[i].size; ++j)
        sq += gs[i].data[j] * gs[i].data[j];
    }
    const double norm = std::sqrt(sq);
    if (norm > *cfg_.clip_norm) {
      const double scale = *cfg_.clip_norm / norm;
      for (std::size_t i = 0; i < gs.size(); ++i)
        for (std::size_t j = 0; j < gs[i].size; ++j) gs[i].data[j] *= scale;
    }
  }

  ++updates_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(updates_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(updates_));

  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].learnable) continue;
    if (ps[i].size != slots_[i].m1.size() || ps[i].size != gs[i].size)
      throw ShapeError(detail::cat("slot size mismatch for ", ps[i].name));
    double* p = ps[i].data;
    const double* g = gs[i].data;
    OptimSlot& slot = slots_[i];
    if (cfg_.kind == OptimizerKind::adam) {
      for (std::size_t j = 0; j < ps[i].size; ++j) {
        slot.m1[j] = cfg_.beta1 * slot.m1[j] + (1.0 - cfg_.beta1) * g[j];
        slot.m2[j] = cfg_.beta2 * slot.m2[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = slot.m1[j] / bc1, vhat = slot.m2[j] / bc2;
        p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    } else {
      for (std::size_t j = 0; j < ps[i].size; ++j) {
        slot.m1[j] = cfg_.rho * slot.m1[j] + (1.0 - cfg_.rho) * g[j] * g[j];
        p[j] -= cfg_.lr * g[j] / std::sqrt(slot.m1[j] + cfg_.delta);
      }
    }
  }
}

EvalOutcome eval_model(const Model& model, const Task& task,
                       const std::vector<SequenceBatch>& split,
                       const Vector* ablation_mask) {
  EvalOutcome out;
  double loss_sum = 0;
  std::size_t n = 0;
  BpttOptions opts;
  opts.want_grads = false;
  opts.want_predictions = task.needs_predictions();
  opts.ablation_mask = ablation_mask;
  for (const SequenceBatch& batch : split) {
    const BpttResult res = run_bptt(model, batch, opts);
    loss_sum += res.loss * double(res.n_targets);
    n += res.n_targets;
    if (opts.want_predictions) {
      const auto [num, den] = task.score(batch, res.preds);
      out.num += num;
      out.den += den;
    }
  }
  out.loss = n ? loss_sum / double(n) : 0.0;
  out.metric = task.metric_value(out.loss, out.num, out.den);
  return out;
}

namespace {

// Name of the first non-finite tensor across parameters then gradients.
std::string first_nonfinite(Model& model, GradientSet& grads) {
  for (const TensorRef& t : named_tensors(model))
    for (std::size_t j = 0; j < t.size; ++j)
      if (!std::isfinite(t.data[j])) return t.name;
  for (const TensorRef& t : named_tensors(grads))
    for (std::size_t j = 0; j < t.size; ++j)
      if (!std::isfinite(t.data[j])) return detail::cat("grad ", t.name);
  return "loss only";
}

std::vector<double> snapshot_params(Model& model) {
  std::vector<double> flat;
  for (const TensorRef& t : named_tensors(model))
    flat.insert(flat.end(), t.data, t.data + t.size);
  return flat;
}

void restore_params(Model& model, const std::vector<double>& flat) {
  std::size_t off = 0;
  for (const TensorRef& t : named_tensors(model)) {
    if (off + t.size > flat.size())
      throw ShapeError("parameter snapshot shorter than the model");
    std::copy(flat.begin() + off, flat.begin() + off + t.size, t.data);
    off += t.size;
  }
  if (off != flat.size())
    throw ShapeError("parameter snapshot longer than the model");
}

}  // namespace

RunRecord train(Model& model, const Task& task, const TrainConfig& cfg) {
  SeededRng rng(cfg.seed);
  Optimizer opt(cfg.opt, model);
  return train(model, task, cfg, opt, rng);
}

RunRecord train(Model& model, const Task& task, const TrainConfig& cfg,
                Optimizer& opt, SeededRng& rng, std::size_t update_base) {
  if (cfg.batch_size == 0) throw ArgumentError("batch size must be positive");
  if (cfg.eval_every == 0) throw ArgumentError("eval cadence must be positive");
  if (cfg.stop_patience == 0) throw ArgumentError("stop patience must be positive");
  if (model.input() != task.features())
    throw ShapeError(detail::cat("model input ", model.input(),
                                 " vs task features ", task.features()));
  if (model.outputs() != task.classes())
    throw ShapeError(detail::cat("model outputs ", model.outputs(),
                                 " vs task classes ", task.classes()));

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  const bool higher = task.higher_is_better();

  RunRecord rec;
  rec.best_metric = higher ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
  std::size_t streak = 0, streak_start = 0;
  const auto epoch_of = [&cfg](std::size_t u) {
    return (cfg.updates_per_epoch && u) ? (u - 1) / cfg.updates_per_epoch
                                        : std::size_t{0};
  };

  // Returns true once the stop rule is satisfied.
  const auto run_eval = [&](std::size_t update) {
    const EvalOutcome ev = eval_model(model, task, task.validation());
    rec.rows.push_back({update, epoch_of(update), "valid", ev.loss,
                        task.metric_name(), ev.metric, elapsed()});
    const bool better = higher ? ev.metric > rec.best_metric
                               : ev.metric < rec.best_metric;
    if (better) {
      rec.best_metric = ev.metric;
      rec.best_update = update;
      if (cfg.restore_best) rec.best_params = snapshot_params(model);
    }
    if (!cfg.stop_metric) return false;
    const bool clears = higher ? ev.metric >= *cfg.stop_metric
                               : ev.metric <= *cfg.stop_metric;
    if (!clears) {
      streak = 0;
      return false;
    }
    if (streak++ == 0) streak_start = update;
    if (streak < cfg.stop_patience) return false;
    if (!rec.threshold_met) {
      rec.threshold_met = true;
      rec.updates_to_stop = streak_start;
    }
    return true;
  };

  bool stop = run_eval(update_base);
  rec.updates_done = update_base;
  BpttOptions opts;
  opts.want_predictions = task.needs_predictions();
  for (std::size_t u = 1; u <= cfg.max_updates && !stop; ++u) {
    const std::size_t at = update_base + u;
    const SequenceBatch batch = task.train_batch(cfg.batch_size, rng);
    BpttResult res = run_bptt(model, batch, opts);
    if (!std::isfinite(res.loss))
      throw NumericError(detail::cat("non-finite loss at update ", at,
                                     "; first non-finite tensor: ",
                                     first_nonfinite(model, res.grads)));
    opt.step(model, res.grads);
    rec.updates_done = at;
    if (u % cfg.eval_every == 0 || u == cfg.max_updates) {
      double num = 0, den = 0;
      if (opts.want_predictions) std::tie(num, den) = task.score(batch, res.preds);
      rec.rows.push_back({at, epoch_of(at), "train", res.loss, task.metric_name(),
                          task.metric_value(res.loss, num, den), elapsed()});
      stop = run_eval(at);
    }
  }
  rec.stopped_early = stop && rec.updates_done < update_base + cfg.max_updates;
  if (cfg.restore_best && !rec.best_params.empty())
    restore_params(model, rec.best_params);
  return rec;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const MetricRow& r : rows)
    cells.push_back({std::to_string(r.update_index), std::to_string(r.epoch),
                     r.split, fmt_double(r.loss), r.metric_name,
                     fmt_double(r.metric_value), fmt_double(r.wallclock_s)});
  write_csv(path,
            {"update_index", "epoch", "split", "loss", "metric_name",
             "metric_value", "wallclock_s"},
            cells);
}

}  // namespace plstm
