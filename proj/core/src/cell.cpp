#include "plstm/cell.hpp"

#include <cmath>

#include "plstm/errors.hpp"
#include "plstm/math.hpp"

namespace plstm {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double scale,
                      SeededRng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-scale, scale);
  return m;
}

void check_batch_dims(const char* what, std::size_t input, std::size_t hidden,
                      const Matrix& x, const Matrix& h_prev,
                      const Matrix& c_prev) {
  if (x.cols != input)
    throw ShapeError(detail::cat(what, ": x has ", x.cols,
                                 " features but cell input is ", input));
  if (h_prev.rows != x.rows || h_prev.cols != hidden)
    throw ShapeError(detail::cat(what, ": h_prev is ", h_prev.rows, "x",
                                 h_prev.cols, ", want ", x.rows, "x", hidden));
  if (c_prev.rows != x.rows || c_prev.cols != hidden)
    throw ShapeError(detail::cat(what, ": c_prev is ", c_prev.rows, "x",
                                 c_prev.cols, ", want ", x.rows, "x", hidden));
}

// pre = x*wx + h_prev*wh + b, rows broadcast.
Matrix gate_preactivations(const Matrix& x, const Matrix& h_prev,
                           const Matrix& wx, const Matrix& wh,
                           const Vector& b) {
  Matrix pre(x.rows, b.len());
  add_row_broadcast(pre, b);
  gemm_nn_acc(pre, x, wx);
  gemm_nn_acc(pre, h_prev, wh);
  return pre;
}

enum class Act { sig, tanh_ };

Matrix activate_block(const Matrix& pre, std::size_t block, std::size_t hidden,
                      Act act) {
  Matrix out(pre.rows, hidden);
  for (std::size_t r = 0; r < pre.rows; ++r) {
    const double* src = pre.row(r) + block * hidden;
    double* dst = out.row(r);
    if (act == Act::sig)
      for (std::size_t j = 0; j < hidden; ++j) dst[j] = sigmoid(src[j]);
    else
      for (std::size_t j = 0; j < hidden; ++j) dst[j] = std::tanh(src[j]);
  }
  return out;
}

void pack_gate(Matrix& wx, Matrix& wh, Matrix& wh_stack, Vector& b,
               std::size_t block, const Matrix& U, const Matrix& W,
               const Vector& bias) {
  const std::size_t hidden = U.rows, input = U.cols;
  for (std::size_t j = 0; j < hidden; ++j) {
    for (std::size_t i = 0; i < input; ++i) wx(i, block * hidden + j) = U(j, i);
    for (std::size_t h = 0; h < hidden; ++h) {
      wh(h, block * hidden + j) = W(j, h);
      wh_stack(block * hidden + j, h) = W(j, h);
    }
    b[block * hidden + j] = bias[j];
  }
}

void check_reference_times(const Matrix& k_prev, const Vector& t_now) {
  for (std::size_t r = 0; r < k_prev.rows; ++r) {
    const double* row = k_prev.row(r);
    for (std::size_t j = 0; j < k_prev.cols; ++j)
      if (row[j] > t_now[r])
        throw StateError(detail::cat("reference time k=", row[j], " of unit ",
                                     j, " (sequence ", r,
                                     ") exceeds current time t=", t_now[r]));
  }
}

}  // namespace

Vector PlstmParams::p() const {
  if (p_direct) return p_hat;
  return sigmoid(p_hat);
}

CellState initial_lstm_state(std::size_t hidden) {
  CellState s;
  s.h = Vector(hidden);
  s.c = Vector(hidden);
  s.t = 0.0;
  return s;
}

CellState initial_plstm_state(std::size_t hidden) {
  CellState s = initial_lstm_state(hidden);
  s.k = Vector(hidden);  // reference time starts at 0
  return s;
}

LstmParams lstm_init(std::size_t input, std::size_t hidden, SeededRng& rng,
                     std::optional<double> chrono_Tmax) {
  if (hidden < 1) throw ArgumentError("lstm_init: hidden must be >= 1");
  if (chrono_Tmax && !(*chrono_Tmax > 2.0))
    throw ArgumentError(detail::cat("lstm_init: chrono_Tmax=", *chrono_Tmax,
                                    " must be > 2 (sample interval [1, Tmax-1]"
                                    " is empty)"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.U_f = uniform_matrix(hidden, input, scale, rng);
  p.U_i = uniform_matrix(hidden, input, scale, rng);
  p.U_o = uniform_matrix(hidden, input, scale, rng);
  p.U_c = uniform_matrix(hidden, input, scale, rng);
  p.W_f = uniform_matrix(hidden, hidden, scale, rng);
  p.W_i = uniform_matrix(hidden, hidden, scale, rng);
  p.W_o = uniform_matrix(hidden, hidden, scale, rng);
  p.W_c = uniform_matrix(hidden, hidden, scale, rng);
  p.b_f = Vector(hidden, 1.0);
  p.b_i = Vector(hidden);
  p.b_o = Vector(hidden);
  p.b_c = Vector(hidden);
  if (chrono_Tmax) {
    for (std::size_t j = 0; j < hidden; ++j) {
      p.b_f[j] = std::log(rng.uniform(1.0, *chrono_Tmax - 1.0));
      p.b_i[j] = -p.b_f[j];
    }
  }
  return p;
}

PInit init_p(std::size_t hidden, SeededRng& rng,
             std::optional<double> fixed_p) {
  PInit out;
  out.p_hat = Vector(hidden);
  if (!fixed_p) {
    const double delta = 1e-4;  // keeps logit finite at the range edges
    for (std::size_t j = 0; j < hidden; ++j)
      out.p_hat[j] = logit(rng.uniform(delta, 1.0 - delta));
    return out;
  }
  if (!(*fixed_p > 0.0))
    throw ArgumentError(
        detail::cat("init_p: fixed_p=", *fixed_p, " must be positive"));
  out.learnable = false;
  if (*fixed_p < 1.0) {
    out.p_hat.fill(logit(*fixed_p));
  } else {
    out.direct = true;  // sigmoid cannot reach p >= 1
    out.p_hat.fill(*fixed_p);
  }
  return out;
}

PlstmParams plstm_init(std::size_t input, std::size_t hidden, SeededRng& rng,
                       InputGateMode mode, std::optional<double> fixed_p,
                       double eps) {
  if (hidden < 1) throw ArgumentError("plstm_init: hidden must be >= 1");
  if (!(eps > 0.0 && eps < 1.0))
    throw ArgumentError(detail::cat("plstm_init: eps=", eps,
                                    " outside (0,1)"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  PlstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.mode = mode;
  p.eps = eps;
  p.U_r = uniform_matrix(hidden, input, scale, rng);
  p.U_o = uniform_matrix(hidden, input, scale, rng);
  p.U_c = uniform_matrix(hidden, input, scale, rng);
  p.W_r = uniform_matrix(hidden, hidden, scale, rng);
  p.W_o = uniform_matrix(hidden, hidden, scale, rng);
  p.W_c = uniform_matrix(hidden, hidden, scale, rng);
  p.b_r = Vector(hidden);
  p.b_o = Vector(hidden);
  p.b_c = Vector(hidden);
  if (mode == InputGateMode::separate) {
    p.U_i = uniform_matrix(hidden, input, scale, rng);
    p.W_i = uniform_matrix(hidden, hidden, scale, rng);
    p.b_i = Vector(hidden);
  }
  PInit pi = init_p(hidden, rng, fixed_p);
  p.p_hat = std::move(pi.p_hat);
  p.p_learnable = pi.learnable;
  p.p_direct = pi.direct;
  return p;
}

Vector power_forget_gate(double t, const Vector& k, const Vector& p,
                         double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw ArgumentError(
        detail::cat("power_forget_gate: eps=", eps, " outside (0,1)"));
  if (k.len() != p.len())
    throw ShapeError(detail::cat("power_forget_gate: k has len ", k.len(),
                                 " but p has len ", p.len()));
  Vector f(k.len());
  for (std::size_t j = 0; j < k.len(); ++j) {
    if (!(p[j] > 0.0))
      throw ArgumentError(
          detail::cat("power_forget_gate: p[", j, "]=", p[j], " must be > 0"));
    if (k[j] > t)
      throw StateError(detail::cat("power_forget_gate: k[", j, "]=", k[j],
                                   " exceeds t=", t));
    const double a = t - k[j];
    f[j] = std::pow((a + eps) / (a + 1.0), p[j]);
  }
  return f;
}

PackedLstm pack(const LstmParams& params) {
  const std::size_t H = params.hidden, I = params.input;
  PackedLstm pk;
  pk.input = I;
  pk.hidden = H;
  pk.wx = Matrix(I, 4 * H);
  pk.wh = Matrix(H, 4 * H);
  pk.wh_stack = Matrix(4 * H, H);
  pk.b = Vector(4 * H);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, 0, params.U_f, params.W_f, params.b_f);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, 1, params.U_i, params.W_i, params.b_i);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, 2, params.U_o, params.W_o, params.b_o);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, 3, params.U_c, params.W_c, params.b_c);
  return pk;
}

PackedPlstm pack(const PlstmParams& params) {
  const std::size_t H = params.hidden, I = params.input;
  PackedPlstm pk;
  pk.input = I;
  pk.hidden = H;
  pk.mode = params.mode;
  pk.eps = params.eps;
  pk.gates = params.mode == InputGateMode::separate ? 4 : 3;
  pk.wx = Matrix(I, pk.gates * H);
  pk.wh = Matrix(H, pk.gates * H);
  pk.wh_stack = Matrix(pk.gates * H, H);
  pk.b = Vector(pk.gates * H);
  std::size_t block = 0;
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, block++, params.U_r, params.W_r, params.b_r);
  if (pk.gates == 4)
    pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, block++, params.U_i, params.W_i, params.b_i);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, block++, params.U_o, params.W_o, params.b_o);
  pack_gate(pk.wx, pk.wh, pk.wh_stack, pk.b, block++, params.U_c, params.W_c, params.b_c);
  pk.p = params.p();
  return pk;
}

void lstm_step_batch(const PackedLstm& pk, const Matrix& x,
                     const Matrix& h_prev, const Matrix& c_prev,
                     const Vector& t_prev, const Vector& t_now,
                     StepCache& cache) {
  check_batch_dims("lstm_step", pk.input, pk.hidden, x, h_prev, c_prev);
  const std::size_t B = x.rows, H = pk.hidden;
  Matrix pre = gate_preactivations(x, h_prev, pk.wx, pk.wh, pk.b);
  cache.f = activate_block(pre, 0, H, Act::sig);
  cache.i = activate_block(pre, 1, H, Act::sig);
  cache.o = activate_block(pre, 2, H, Act::sig);
  cache.g = activate_block(pre, 3, H, Act::tanh_);
  cache.c = Matrix(B, H);
  cache.tanh_c = Matrix(B, H);
  cache.h = Matrix(B, H);
  for (std::size_t r = 0; r < B; ++r) {
    const double* f = cache.f.row(r);
    const double* i = cache.i.row(r);
    const double* o = cache.o.row(r);
    const double* g = cache.g.row(r);
    const double* cp = c_prev.row(r);
    double* c = cache.c.row(r);
    double* tc = cache.tanh_c.row(r);
    double* h = cache.h.row(r);
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = f[j] * cp[j] + i[j] * g[j];
      tc[j] = std::tanh(c[j]);
      h[j] = o[j] * tc[j];
    }
  }
  cache.t_prev = t_prev;
  cache.t_now = t_now;
}

void plstm_step_batch(const PackedPlstm& pk, bool dt_mode, const Matrix& x,
                      const Matrix& h_prev, const Matrix& c_prev,
                      const Matrix& k_prev, const Vector& t_prev,
                      const Vector& t_now, StepCache& cache) {
  check_batch_dims("plstm_step", pk.input, pk.hidden, x, h_prev, c_prev);
  const std::size_t B = x.rows, H = pk.hidden;
  if (k_prev.rows != B || k_prev.cols != H)
    throw ShapeError(detail::cat("plstm_step: k_prev is ", k_prev.rows, "x",
                                 k_prev.cols, ", want ", B, "x", H));
  if (dt_mode)
    for (std::size_t r = 0; r < B; ++r)
      if (!(t_now[r] > t_prev[r]))
        throw StateError(detail::cat("plstm_step_dt: t_now=", t_now[r],
                                     " must exceed previous t=", t_prev[r],
                                     " (sequence ", r, ")"));
  check_reference_times(k_prev, t_now);

  Matrix pre = gate_preactivations(x, h_prev, pk.wx, pk.wh, pk.b);
  std::size_t block = 0;
  cache.r = activate_block(pre, block++, H, Act::sig);
  const bool separate = pk.gates == 4;
  if (separate) cache.i = activate_block(pre, block++, H, Act::sig);
  cache.o = activate_block(pre, block++, H, Act::sig);
  cache.g = activate_block(pre, block++, H, Act::tanh_);

  cache.k = Matrix(B, H);
  cache.f = Matrix(B, H);
  if (dt_mode) {
    cache.ktil = Matrix(B, H);
    cache.D = Matrix(B, H);
  }
  for (std::size_t row = 0; row < B; ++row) {
    const double t1 = t_now[row];
    const double t0 = t_prev[row];
    const double* r = cache.r.row(row);
    const double* kp = k_prev.row(row);
    double* k = cache.k.row(row);
    double* f = cache.f.row(row);
    for (std::size_t j = 0; j < H; ++j) {
      // k = r*t + (1-r)*k_prev, written so k can never move backwards or past
      // t under rounding.
      k[j] = std::min(kp[j] + r[j] * (t1 - kp[j]), t1);
      if (!dt_mode) {
        const double a = t1 - k[j];
        f[j] = std::pow((a + pk.eps) / (a + 1.0), pk.p[j]);
      } else {
        // Shifted reference: the denominator is evaluated at the previous
        // sample time, so the decay law is invariant to the sampling grid.
        const double kt = std::min(kp[j] + r[j] * (t0 + 1.0 - kp[j]), t0 + 1.0);
        double D = t0 - kt + 1.0 + pk.eps;
        if (D < pk.eps) D = pk.eps;  // guards saturated-reset rounding
        const double A = t1 - k[j] + 1.0;
        cache.ktil(row, j) = kt;
        cache.D(row, j) = D;
        f[j] = std::pow(D / A, pk.p[j]);
      }
    }
  }

  cache.c = Matrix(B, H);
  cache.tanh_c = Matrix(B, H);
  cache.h = Matrix(B, H);
  for (std::size_t row = 0; row < B; ++row) {
    const double* f = cache.f.row(row);
    const double* o = cache.o.row(row);
    const double* g = cache.g.row(row);
    const double* cp = c_prev.row(row);
    const double* i = separate ? cache.i.row(row) : nullptr;
    double* c = cache.c.row(row);
    double* tc = cache.tanh_c.row(row);
    double* h = cache.h.row(row);
    for (std::size_t j = 0; j < H; ++j) {
      const double in = separate ? i[j] : 1.0 - f[j];
      c[j] = f[j] * cp[j] + in * g[j];
      tc[j] = std::tanh(c[j]);
      h[j] = o[j] * tc[j];
    }
  }
  cache.t_prev = t_prev;
  cache.t_now = t_now;
}

namespace {

Matrix row_matrix(const Vector& v) {
  Matrix m(1, v.len());
  for (std::size_t j = 0; j < v.len(); ++j) m(0, j) = v[j];
  return m;
}

Vector first_row(const Matrix& m) {
  Vector v(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) v[j] = m(0, j);
  return v;
}

}  // namespace

std::pair<CellState, StepCache> lstm_step(const LstmParams& params,
                                          const CellState& s, const Vector& x) {
  PackedLstm pk = pack(params);
  StepCache cache;
  Vector t_prev{s.t}, t_now{s.t + 1.0};
  lstm_step_batch(pk, row_matrix(x), row_matrix(s.h), row_matrix(s.c), t_prev,
                  t_now, cache);
  CellState out;
  out.h = first_row(cache.h);
  out.c = first_row(cache.c);
  out.t = t_now[0];
  return {std::move(out), std::move(cache)};
}

namespace {

std::pair<CellState, StepCache> plstm_step_at(const PlstmParams& params,
                                              const CellState& s,
                                              const Vector& x, double t_now_v,
                                              bool dt_mode) {
  PackedPlstm pk = pack(params);
  StepCache cache;
  Vector t_prev{s.t}, t_now{t_now_v};
  plstm_step_batch(pk, dt_mode, row_matrix(x), row_matrix(s.h), row_matrix(s.c),
                   row_matrix(s.k), t_prev, t_now, cache);
  CellState out;
  out.h = first_row(cache.h);
  out.c = first_row(cache.c);
  out.k = first_row(cache.k);
  out.t = t_now_v;
  return {std::move(out), std::move(cache)};
}

}  // namespace

std::pair<CellState, StepCache> plstm_step(const PlstmParams& params,
                                           const CellState& s, const Vector& x) {
  return plstm_step_at(params, s, x, s.t + 1.0, false);
}

std::pair<CellState, StepCache> plstm_step_dt(const PlstmParams& params,
                                              const CellState& s,
                                              const Vector& x, double t_now) {
  if (!(t_now > s.t))
    throw StateError(detail::cat("plstm_step_dt: t_now=", t_now,
                                 " must exceed state time t=", s.t));
  return plstm_step_at(params, s, x, t_now, true);
}

}  // namespace plstm
