#include "plstm/backprop.hpp"

#include <algorithm>
#include <cmath>

#include "plstm/errors.hpp"
#include "plstm/math.hpp"

namespace plstm {

namespace {

void step_clocks(const SequenceBatch& batch, bool dt_mode, std::size_t t,
                 Vector& t_prev, Vector& t_now) {
  const std::size_t B = batch.batch;
  if (!dt_mode) {
    t_prev = Vector(B, static_cast<double>(t));
    t_now = Vector(B, static_cast<double>(t + 1));
    return;
  }
  t_now = batch.times[t];
  t_prev = t == 0 ? Vector(B, 0.0) : batch.times[t - 1];
}

void apply_ablation(StepCache& cache, const Vector& mask) {
  for (std::size_t r = 0; r < cache.h.rows; ++r) {
    double* h = cache.h.row(r);
    double* c = cache.c.row(r);
    double* tc = cache.tanh_c.row(r);
    double* k = cache.k.rows ? cache.k.row(r) : nullptr;
    for (std::size_t j = 0; j < cache.h.cols; ++j) {
      h[j] *= mask[j];
      c[j] *= mask[j];
      tc[j] *= mask[j];
      if (k) k[j] *= mask[j];
    }
  }
}

void check_model_batch(const Model& model, const SequenceBatch& batch,
                       const char* what) {
  if (batch.batch == 0)
    throw ArgumentError(detail::cat(what, ": empty batch"));
  if (model.input() != batch.features)
    throw ShapeError(detail::cat(what, ": model input dim ", model.input(),
                                 " but batch features ", batch.features));
  if (model.dt_mode && !batch.has_times())
    throw ArgumentError(detail::cat(
        what, ": model consumes timestamps but the batch carries none"));
}

// Shared state of one reverse sweep.
struct BackCtx {
  CellKind kind = CellKind::lstm;
  bool dt_mode = false;
  InputGateMode mode = InputGateMode::coupled;
  double eps = 0.001;
  std::size_t gates = 4, hidden = 0, input = 0;
  const Matrix* wh_stack = nullptr;
  Vector p;                             // pLSTM decay exponents
  const ReadoutParams* head = nullptr;  // optional loss-head path
};

BackCtx make_ctx(const Model& model) {
  BackCtx ctx;
  ctx.kind = model.kind;
  ctx.dt_mode = model.dt_mode;
  ctx.hidden = model.hidden();
  ctx.input = model.input();
  if (model.kind == CellKind::plstm) {
    ctx.mode = model.plstm.mode;
    ctx.eps = model.plstm.eps;
    ctx.gates = model.plstm.mode == InputGateMode::separate ? 4 : 3;
    ctx.p = model.plstm.p();
  }
  return ctx;
}

// Maps gate blocks of the packed gradient buffers back onto the named tensors.
void scatter_gate(const Matrix& dwx, const Matrix& dwh, const Vector& db,
                  std::size_t block, Matrix& dU, Matrix& dW, Vector& db_g) {
  const std::size_t H = dU.rows, I = dU.cols;
  for (std::size_t j = 0; j < H; ++j) {
    for (std::size_t i = 0; i < I; ++i) dU(j, i) = dwx(i, block * H + j);
    for (std::size_t h = 0; h < H; ++h) dW(j, h) = dwh(h, block * H + j);
    db_g[j] = db[block * H + j];
  }
}

// One reverse sweep over the tape. d_out (optional) is an upstream gradient
// on h per step; dlogits (optional) is the loss-head upstream per step, with
// empty matrices where no position was masked. Both arrive pre-scaled.
void backward_pass(const BackCtx& ctx, const UnrollTape& tape,
                   const std::vector<Matrix>* d_out,
                   const std::vector<Matrix>* dlogits, GradientSet& g) {
  const SequenceBatch& data = *tape.data;
  const std::size_t B = tape.batch, H = ctx.hidden, GH = ctx.gates * H;

  Matrix dwx(ctx.input, GH), dwh(H, GH);
  Vector db(GH), dp(H);
  Matrix dH(B, H), dC(B, H), dK(B, H);
  Matrix zeros(B, H);
  const bool coupled =
      ctx.kind == CellKind::plstm && ctx.mode == InputGateMode::coupled;
  const bool plstm = ctx.kind == CellKind::plstm;

  for (std::size_t t = tape.steps; t-- > 0;) {
    const StepCache& cache = tape.step[t];
    const Matrix& c_prev = t > 0 ? tape.step[t - 1].c : zeros;
    const Matrix& k_prev = t > 0 ? tape.step[t - 1].k : zeros;

    if (d_out) {
      const Matrix& extra = (*d_out)[t];
      for (std::size_t i = 0; i < dH.size(); ++i) dH.data[i] += extra.data[i];
    }
    if (dlogits && !(*dlogits)[t].data.empty()) {
      const Matrix& dl = (*dlogits)[t];
      gemm_tn_acc(g.head.V, dl, cache.h);
      col_sum_acc(g.head.b, dl);
      gemm_nn_acc(dH, dl, ctx.head->V);
    }

    Matrix dPre(B, GH);
    for (std::size_t row = 0; row < B; ++row) {
      const double* f = cache.f.row(row);
      const double* o = cache.o.row(row);
      const double* gc = cache.g.row(row);
      const double* tc = cache.tanh_c.row(row);
      const double* cp = c_prev.row(row);
      const double* dh = dH.row(row);
      double* dc_carry = dC.row(row);
      double* pre = dPre.row(row);

      if (!plstm) {
        const double* i = cache.i.row(row);
        for (std::size_t j = 0; j < H; ++j) {
          const double dov = dh[j] * tc[j];
          const double dc = dh[j] * o[j] * (1.0 - tc[j] * tc[j]) + dc_carry[j];
          const double df = dc * cp[j];
          const double di = dc * gc[j];
          const double dg = dc * i[j];
          pre[0 * H + j] = df * f[j] * (1.0 - f[j]);
          pre[1 * H + j] = di * i[j] * (1.0 - i[j]);
          pre[2 * H + j] = dov * o[j] * (1.0 - o[j]);
          pre[3 * H + j] = dg * (1.0 - gc[j] * gc[j]);
          dc_carry[j] = dc * f[j];
        }
        continue;
      }

      const double* r = cache.r.row(row);
      const double* k = cache.k.row(row);
      const double* kp = k_prev.row(row);
      const double* iv = coupled ? nullptr : cache.i.row(row);
      double* dk_carry = dK.row(row);
      const double t1 = cache.t_now[row];
      const double t0 = cache.t_prev[row];
      const std::size_t ob = coupled ? 1 : 2;  // output-gate block index
      for (std::size_t j = 0; j < H; ++j) {
        const double dov = dh[j] * tc[j];
        const double dc = dh[j] * o[j] * (1.0 - tc[j] * tc[j]) + dc_carry[j];
        double df, dg;
        if (coupled) {
          df = dc * (cp[j] - gc[j]);
          dg = dc * (1.0 - f[j]);
        } else {
          df = dc * cp[j];
          const double di = dc * gc[j];
          pre[1 * H + j] = di * iv[j] * (1.0 - iv[j]);
          dg = dc * iv[j];
        }
        const double pj = ctx.p[j];
        double dk_tot, dr, dk_prev_v;
        if (!ctx.dt_mode) {
          const double a = t1 - k[j];
          const double A = a + 1.0;
          const double D = a + ctx.eps;
          dp[j] += df * f[j] * (std::log(D) - std::log(A));
          dk_tot = dk_carry[j] - df * pj * f[j] * (1.0 - ctx.eps) / (D * A);
          dr = dk_tot * (t1 - kp[j]);
          dk_prev_v = dk_tot * (1.0 - r[j]);
        } else {
          const double A = t1 - k[j] + 1.0;
          const double D = cache.D(row, j);
          const double ktil = cache.ktil(row, j);
          const double D_raw = t0 - ktil + 1.0 + ctx.eps;
          dp[j] += df * f[j] * (std::log(D) - std::log(A));
          dk_tot = dk_carry[j] + df * pj * f[j] / A;
          const double dktil =
              D_raw >= ctx.eps ? -df * pj * f[j] / D : 0.0;  // clamp cuts the path
          dr = dk_tot * (t1 - kp[j]) + dktil * (t0 + 1.0 - kp[j]);
          dk_prev_v = (dk_tot + dktil) * (1.0 - r[j]);
        }
        pre[0 * H + j] = dr * r[j] * (1.0 - r[j]);
        pre[ob * H + j] = dov * o[j] * (1.0 - o[j]);
        pre[(ob + 1) * H + j] = dg * (1.0 - gc[j] * gc[j]);
        dc_carry[j] = dc * f[j];
        dk_carry[j] = dk_prev_v;
      }
    }

    col_sum_acc(db, dPre);
    gemm_tn_acc(dwx, data.x[t], dPre);
    if (t > 0) {
      gemm_tn_acc(dwh, tape.step[t - 1].h, dPre);
      dH.zero();
      gemm_nn_acc(dH, dPre, *ctx.wh_stack);
    }
  }

  if (!plstm) {
    scatter_gate(dwx, dwh, db, 0, g.lstm.U_f, g.lstm.W_f, g.lstm.b_f);
    scatter_gate(dwx, dwh, db, 1, g.lstm.U_i, g.lstm.W_i, g.lstm.b_i);
    scatter_gate(dwx, dwh, db, 2, g.lstm.U_o, g.lstm.W_o, g.lstm.b_o);
    scatter_gate(dwx, dwh, db, 3, g.lstm.U_c, g.lstm.W_c, g.lstm.b_c);
  } else {
    std::size_t block = 0;
    scatter_gate(dwx, dwh, db, block++, g.plstm.U_r, g.plstm.W_r, g.plstm.b_r);
    if (ctx.gates == 4)
      scatter_gate(dwx, dwh, db, block++, g.plstm.U_i, g.plstm.W_i, g.plstm.b_i);
    scatter_gate(dwx, dwh, db, block++, g.plstm.U_o, g.plstm.W_o, g.plstm.b_o);
    scatter_gate(dwx, dwh, db, block++, g.plstm.U_c, g.plstm.W_c, g.plstm.b_c);
    if (g.plstm.p_learnable) {
      for (std::size_t j = 0; j < H; ++j) {
        const double pj = ctx.p[j];
        g.plstm.p_hat[j] =
            g.plstm.p_direct ? dp[j] : dp[j] * pj * (1.0 - pj);
      }
    }
  }
}

void check_tape(const UnrollTape& tape, CellKind kind, std::size_t hidden,
                const std::vector<Matrix>& d_outputs, const char* what) {
  if (tape.kind != kind)
    throw ArgumentError(detail::cat(what, ": tape cell kind does not match"
                                          " the given parameters"));
  if (!tape.data)
    throw ArgumentError(detail::cat(what, ": tape has no input reference"));
  if (d_outputs.size() != tape.steps)
    throw ShapeError(detail::cat(what, ": ", d_outputs.size(),
                                 " upstream matrices for ", tape.steps,
                                 " steps"));
  for (const Matrix& m : d_outputs)
    if (m.rows != tape.batch || m.cols != hidden)
      throw ShapeError(detail::cat(what, ": upstream gradient is ", m.rows,
                                   "x", m.cols, ", want ", tape.batch, "x",
                                   hidden));
}

}  // namespace

UnrollTape unroll_forward(const Model& model, const SequenceBatch& batch,
                          const Vector* ablation_mask) {
  batch.validate();
  check_model_batch(model, batch, "unroll_forward");
  if (ablation_mask && ablation_mask->len() != model.hidden())
    throw ShapeError(detail::cat("unroll_forward: ablation mask len ",
                                 ablation_mask->len(), " but hidden is ",
                                 model.hidden()));
  UnrollTape tape;
  tape.kind = model.kind;
  tape.dt_mode = model.dt_mode;
  tape.batch = batch.batch;
  tape.steps = batch.steps;
  tape.data = &batch;
  tape.step.resize(batch.steps);

  const std::size_t B = batch.batch, H = model.hidden();
  const Matrix zero(B, H);
  Vector t_prev, t_now;
  if (model.kind == CellKind::lstm) {
    PackedLstm pk = pack(model.lstm);
    for (std::size_t t = 0; t < batch.steps; ++t) {
      step_clocks(batch, false, t, t_prev, t_now);
      const Matrix& h_prev = t > 0 ? tape.step[t - 1].h : zero;
      const Matrix& c_prev = t > 0 ? tape.step[t - 1].c : zero;
      lstm_step_batch(pk, batch.x[t], h_prev, c_prev, t_prev, t_now,
                      tape.step[t]);
      if (ablation_mask) apply_ablation(tape.step[t], *ablation_mask);
    }
  } else {
    PackedPlstm pk = pack(model.plstm);
    for (std::size_t t = 0; t < batch.steps; ++t) {
      step_clocks(batch, model.dt_mode, t, t_prev, t_now);
      const Matrix& h_prev = t > 0 ? tape.step[t - 1].h : zero;
      const Matrix& c_prev = t > 0 ? tape.step[t - 1].c : zero;
      const Matrix& k_prev = t > 0 ? tape.step[t - 1].k : zero;
      plstm_step_batch(pk, model.dt_mode, batch.x[t], h_prev, c_prev, k_prev,
                       t_prev, t_now, tape.step[t]);
      if (ablation_mask) apply_ablation(tape.step[t], *ablation_mask);
    }
  }
  return tape;
}

GradientSet lstm_backward(const LstmParams& params, const UnrollTape& tape,
                          const std::vector<Matrix>& d_outputs) {
  check_tape(tape, CellKind::lstm, params.hidden, d_outputs, "lstm_backward");
  Model shell;
  shell.kind = CellKind::lstm;
  shell.lstm = params;
  GradientSet g = zero_gradients(shell);
  BackCtx ctx = make_ctx(shell);
  PackedLstm pk = pack(params);
  ctx.wh_stack = &pk.wh_stack;
  backward_pass(ctx, tape, &d_outputs, nullptr, g);
  return g;
}

GradientSet plstm_backward(const PlstmParams& params, const UnrollTape& tape,
                           const std::vector<Matrix>& d_outputs) {
  check_tape(tape, CellKind::plstm, params.hidden, d_outputs, "plstm_backward");
  Model shell;
  shell.kind = CellKind::plstm;
  shell.dt_mode = tape.dt_mode;
  shell.plstm = params;
  GradientSet g = zero_gradients(shell);
  BackCtx ctx = make_ctx(shell);
  PackedPlstm pk = pack(params);
  ctx.wh_stack = &pk.wh_stack;
  backward_pass(ctx, tape, &d_outputs, nullptr, g);
  return g;
}

BpttResult run_bptt(const Model& model, const SequenceBatch& batch,
                    const BpttOptions& opts) {
  batch.validate();
  check_model_batch(model, batch, "run_bptt");
  if (model.outputs() != batch.classes)
    throw ShapeError(detail::cat("run_bptt: model has ", model.outputs(),
                                 " outputs but batch declares ", batch.classes,
                                 " classes"));
  const std::size_t B = batch.batch, H = model.hidden(),
                    O = model.outputs();
  BpttResult res;
  if (opts.want_predictions)
    res.preds.assign(batch.steps, std::vector<int>(B, -1));

  Matrix Vt = transposed(model.head.V);
  double loss_sum = 0.0;
  std::size_t n_targets = 0;

  auto head_step = [&](std::size_t t, const Matrix& h, Matrix* dlog) {
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) any = any || batch.mask[t][b];
    if (!any) return;
    Matrix logits(B, O);
    add_row_broadcast(logits, model.head.b);
    gemm_nn_acc(logits, h, Vt);
    if (dlog) *dlog = Matrix(B, O);
    Vector scratch(O);
    for (std::size_t b = 0; b < B; ++b) {
      if (!batch.mask[t][b]) continue;
      const int target = batch.targets[t][b];
      double* gout = dlog ? dlog->row(b) : scratch.data.data();
      loss_sum += softmax_xent_row(logits.row(b), O,
                                   static_cast<std::size_t>(target), gout);
      ++n_targets;
      if (opts.want_predictions)
        res.preds[t][b] = static_cast<int>(argmax_row(logits.row(b), O));
    }
  };

  if (opts.want_grads) {
    UnrollTape tape = unroll_forward(model, batch, opts.ablation_mask);
    std::vector<Matrix> dlogits(batch.steps);
    for (std::size_t t = 0; t < batch.steps; ++t)
      head_step(t, tape.step[t].h, &dlogits[t]);
    const double scale = 1.0 / static_cast<double>(B);
    for (Matrix& m : dlogits)
      for (double& v : m.data) v *= scale;

    res.grads = zero_gradients(model);
    BackCtx ctx = make_ctx(model);
    ctx.head = &model.head;
    PackedLstm pkl;
    PackedPlstm pkp;
    if (model.kind == CellKind::lstm) {
      pkl = pack(model.lstm);
      ctx.wh_stack = &pkl.wh_stack;
    } else {
      pkp = pack(model.plstm);
      ctx.wh_stack = &pkp.wh_stack;
    }
    backward_pass(ctx, tape, nullptr, &dlogits, res.grads);
    const StepCache& last = tape.step.back();
    res.final_h = last.h;
    res.final_c = last.c;
    res.final_k = last.k;
  } else {
    // Streamed evaluation: only two step caches live at a time.
    const Matrix zero(B, H);
    StepCache a, b;
    PackedLstm pkl;
    PackedPlstm pkp;
    if (model.kind == CellKind::lstm)
      pkl = pack(model.lstm);
    else
      pkp = pack(model.plstm);
    Vector t_prev, t_now;
    for (std::size_t t = 0; t < batch.steps; ++t) {
      StepCache& cur = (t % 2 == 0) ? a : b;
      const StepCache& prev = (t % 2 == 0) ? b : a;
      const Matrix& h_prev = t > 0 ? prev.h : zero;
      const Matrix& c_prev = t > 0 ? prev.c : zero;
      step_clocks(batch, model.dt_mode, t, t_prev, t_now);
      if (model.kind == CellKind::lstm) {
        lstm_step_batch(pkl, batch.x[t], h_prev, c_prev, t_prev, t_now, cur);
      } else {
        const Matrix& k_prev = t > 0 ? prev.k : zero;
        plstm_step_batch(pkp, model.dt_mode, batch.x[t], h_prev, c_prev,
                         k_prev, t_prev, t_now, cur);
      }
      if (opts.ablation_mask) apply_ablation(cur, *opts.ablation_mask);
      if (opts.k_trace) opts.k_trace->push_back(cur.k);
      head_step(t, cur.h, nullptr);
    }
    const StepCache& last = (batch.steps % 2 == 1) ? a : b;
    res.final_h = last.h;
    res.final_c = last.c;
    res.final_k = last.k;
  }

  res.n_targets = n_targets;
  res.loss = n_targets > 0 ? loss_sum / static_cast<double>(n_targets) : 0.0;
  res.objective = loss_sum / static_cast<double>(B);
  return res;
}

GradCheckReport grad_check(Model& model, const SequenceBatch& batch,
                           double fd_step) {
  if (batch.steps > 32)
    throw ArgumentError(detail::cat("grad_check: sequence length ", batch.steps,
                                    " exceeds the cost guard of 32"));
  BpttOptions go;
  BpttResult base = run_bptt(model, batch, go);
  BpttOptions eo;
  eo.want_grads = false;

  std::vector<TensorRef> prefs = named_tensors(model);
  std::vector<TensorRef> grefs = named_tensors(base.grads);
  GradCheckReport report;
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    if (!prefs[i].learnable) continue;
    GradCheckEntry entry{prefs[i].name, 0.0};
    for (std::size_t s = 0; s < prefs[i].size; ++s) {
      double& theta = prefs[i].data[s];
      const double saved = theta;
      theta = saved + fd_step;
      const double lp = run_bptt(model, batch, eo).objective;
      theta = saved - fd_step;
      const double lm = run_bptt(model, batch, eo).objective;
      theta = saved;
      const double numeric = (lp - lm) / (2.0 * fd_step);
      const double analytic = grefs[i].data[s];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

}  // namespace plstm
