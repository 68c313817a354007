#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "plstm/rng.hpp"
#include "plstm/tensor.hpp"

namespace plstm {

// coupled: the input gate is the forget complement, i = 1 - f.
enum class InputGateMode { coupled, separate };

struct LstmParams {
  std::size_t input = 0, hidden = 0;
  Matrix U_f, U_i, U_o, U_c;  // hidden x input
  Matrix W_f, W_i, W_o, W_c;  // hidden x hidden
  Vector b_f, b_i, b_o, b_c;  // hidden
};

struct PlstmParams {
  std::size_t input = 0, hidden = 0;
  InputGateMode mode = InputGateMode::coupled;
  double eps = 0.001;  // forget-gate denominator stabilizer, in (0,1)
  Matrix U_r, U_o, U_c;  // hidden x input
  Matrix W_r, W_o, W_c;  // hidden x hidden
  Vector b_r, b_o, b_c;
  // Decay exponent parameter. Normally p = sigmoid(p_hat); when p_direct is
  // set, p_hat stores p itself (fixed p >= 1, outside sigmoid range).
  Vector p_hat;
  bool p_learnable = true;
  bool p_direct = false;
  // Present only in separate mode.
  Matrix U_i, W_i;
  Vector b_i;

  Vector p() const;
};

// Recurrent state for one sequence. k is empty for LSTM; t is the wall time
// of this state (0 before the first step; unit-step sequences use t = 1,2,...).
struct CellState {
  Vector h, c, k;
  double t = 0.0;
};

CellState initial_lstm_state(std::size_t hidden);
CellState initial_plstm_state(std::size_t hidden);

// Everything backward needs from one forward step, batched (rows = sequences).
// Post-activations only; pre-activations are recoverable from these and are
// never needed (sigmoid' and tanh' are functions of the outputs).
struct StepCache {
  Matrix f, i, o, g;  // gate activations; i is empty in coupled mode; g = cell candidate
  Matrix r, k;        // reset gate and updated reference time (empty for LSTM)
  Matrix ktil, D;     // variable-step path only: shifted reference and clamped denominator
  Matrix c, tanh_c, h;
  Vector t_prev, t_now;  // per-sequence clocks
};

// Weight initialization: every matrix entry ~ U(-1/sqrt(hidden), 1/sqrt(hidden)),
// sampled row-major in the declared field order, so a seed pins the model.
// Without chrono_Tmax: b_f = 1, other biases 0. With chrono_Tmax: every
// b_f[j] = ln(u), u ~ U(1, Tmax-1), and b_i = -b_f.
LstmParams lstm_init(std::size_t input, std::size_t hidden, SeededRng& rng,
                     std::optional<double> chrono_Tmax = {});

struct PInit {
  Vector p_hat;
  bool learnable = true;
  bool direct = false;
};

// Default: p = sigmoid(p_hat) uniform on (delta, 1-delta), delta = 1e-4.
// fixed_p in (0,1): p_hat = logit(fixed_p), frozen. fixed_p >= 1: p stored
// directly without the sigmoid reparameterization, frozen.
PInit init_p(std::size_t hidden, SeededRng& rng,
             std::optional<double> fixed_p = {});

PlstmParams plstm_init(std::size_t input, std::size_t hidden, SeededRng& rng,
                       InputGateMode mode = InputGateMode::coupled,
                       std::optional<double> fixed_p = {}, double eps = 0.001);

// f = ((t-k+1)/(t-k+eps))^(-p), elementwise; output in (0,1) for k <= t,
// eps in (0,1), p > 0.
Vector power_forget_gate(double t, const Vector& k, const Vector& p, double eps);

// Single-sequence steps (the batched kernels below do the work; these wrap a
// batch of one).
std::pair<CellState, StepCache> lstm_step(const LstmParams& params,
                                          const CellState& s, const Vector& x);
std::pair<CellState, StepCache> plstm_step(const PlstmParams& params,
                                           const CellState& s, const Vector& x);
// Variable-step variant: the reference time used in the forget-gate
// denominator is shifted back by the elapsed dt, so irregular sampling keeps
// the same decay law. Requires t_now > s.t.
std::pair<CellState, StepCache> plstm_step_dt(const PlstmParams& params,
                                              const CellState& s,
                                              const Vector& x, double t_now);

// ---- batched kernels -------------------------------------------------------
// Gate weights packed transposed and column-concatenated so one GEMM feeds all
// gates: pre = x * wx + h_prev * wh + b. wh_stack holds the untransposed gate
// blocks stacked vertically for the reverse product d_h = d_pre * wh_stack.
// Built once per unroll; read-only while any step or backward uses it.

struct PackedLstm {
  std::size_t input = 0, hidden = 0;
  Matrix wx;        // input x 4H, gate column order [f i o c]
  Matrix wh;        // hidden x 4H
  Matrix wh_stack;  // 4H x hidden
  Vector b;         // 4H
};

struct PackedPlstm {
  std::size_t input = 0, hidden = 0;
  InputGateMode mode = InputGateMode::coupled;
  double eps = 0.001;
  std::size_t gates = 3;  // 3 coupled [r o c], 4 separate [r i o c]
  Matrix wx, wh, wh_stack;
  Vector b;
  Vector p;  // materialized decay exponents
};

PackedLstm pack(const LstmParams& params);
PackedPlstm pack(const PlstmParams& params);

// One batched step. x: batch x input; h_prev/c_prev/k_prev: batch x hidden;
// t_prev/t_now: per-sequence clocks. Writes every cache field it owns.
void lstm_step_batch(const PackedLstm& pk, const Matrix& x,
                     const Matrix& h_prev, const Matrix& c_prev,
                     const Vector& t_prev, const Vector& t_now,
                     StepCache& cache);

// dt_mode false requires t_now = t_prev + 1 elementwise (unit steps).
void plstm_step_batch(const PackedPlstm& pk, bool dt_mode, const Matrix& x,
                      const Matrix& h_prev, const Matrix& c_prev,
                      const Matrix& k_prev, const Vector& t_prev,
                      const Vector& t_now, StepCache& cache);

}  // namespace plstm
