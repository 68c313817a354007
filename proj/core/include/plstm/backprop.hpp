#pragma once

#include <string>
#include <vector>

#include "plstm/model.hpp"
#include "plstm/sequence.hpp"

namespace plstm {

// Full forward record for one batched unroll. data points at the batch the
// tape was built from; it must outlive the tape.
struct UnrollTape {
  CellKind kind = CellKind::lstm;
  bool dt_mode = false;
  std::size_t batch = 0, steps = 0;
  const SequenceBatch* data = nullptr;
  std::vector<StepCache> step;
};

// Forward with full caching; no loss head. ablation_mask (len hidden, 0/1)
// zeroes the marked units' h, c, and k after every step.
UnrollTape unroll_forward(const Model& model, const SequenceBatch& batch,
                          const Vector* ablation_mask = nullptr);

// Cell-level reverse passes: gradients of sum_t <d_outputs[t], h_t> summed
// over the batch. d_outputs holds one batch x hidden matrix per step.
GradientSet lstm_backward(const LstmParams& params, const UnrollTape& tape,
                          const std::vector<Matrix>& d_outputs);
GradientSet plstm_backward(const PlstmParams& params, const UnrollTape& tape,
                           const std::vector<Matrix>& d_outputs);

struct BpttOptions {
  bool want_grads = true;
  bool want_predictions = false;
  const Vector* ablation_mask = nullptr;
  std::vector<Matrix>* k_trace = nullptr;  // eval-only: per-step reference times
};

struct BpttResult {
  double loss = 0.0;       // mean over masked targets (reported metric)
  double objective = 0.0;  // summed masked loss / batch (the differentiated scalar)
  std::size_t n_targets = 0;
  GradientSet grads;
  Predictions preds;
  Matrix final_h, final_c, final_k;
};

// Full unroll with the readout head: loss at every masked position, gradients
// averaged over the batch. Without want_grads the unroll is streamed and no
// tape is kept.
BpttResult run_bptt(const Model& model, const SequenceBatch& batch,
                    const BpttOptions& opts = {});

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central differences with the given step on every learnable scalar, against
// the analytic gradients of run_bptt's objective. Relative error per scalar is
// |a-n| / max(|a|, |n|, 1e-8); the report keeps the per-tensor maximum.
// Sequences longer than 32 steps are refused (cost guard).
GradCheckReport grad_check(Model& model, const SequenceBatch& batch,
                           double fd_step = 1e-5);

}  // namespace plstm
