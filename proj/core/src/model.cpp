#include "plstm/model.hpp"

#include <cmath>

#include "plstm/errors.hpp"

namespace plstm {

Model build_model(const ModelSpec& spec, SeededRng& rng) {
  Model m;
  m.kind = spec.kind;
  m.dt_mode = spec.dt_mode;
  if (spec.kind == CellKind::lstm) {
    if (spec.dt_mode)
      throw ArgumentError("build_model: dt_mode requires a plstm cell");
    m.lstm = lstm_init(spec.input, spec.hidden, rng, spec.chrono_Tmax);
  } else {
    m.plstm = plstm_init(spec.input, spec.hidden, rng, spec.mode, spec.fixed_p,
                         spec.eps);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  m.head.V = Matrix(spec.outputs, spec.hidden);
  for (double& v : m.head.V.data) v = rng.uniform(-scale, scale);
  m.head.b = Vector(spec.outputs);
  return m;
}

GradientSet zero_gradients(const Model& model) {
  GradientSet g;
  g.kind = model.kind;
  if (model.kind == CellKind::lstm) {
    const LstmParams& p = model.lstm;
    g.lstm.input = p.input;
    g.lstm.hidden = p.hidden;
    g.lstm.U_f = Matrix(p.hidden, p.input);
    g.lstm.U_i = Matrix(p.hidden, p.input);
    g.lstm.U_o = Matrix(p.hidden, p.input);
    g.lstm.U_c = Matrix(p.hidden, p.input);
    g.lstm.W_f = Matrix(p.hidden, p.hidden);
    g.lstm.W_i = Matrix(p.hidden, p.hidden);
    g.lstm.W_o = Matrix(p.hidden, p.hidden);
    g.lstm.W_c = Matrix(p.hidden, p.hidden);
    g.lstm.b_f = Vector(p.hidden);
    g.lstm.b_i = Vector(p.hidden);
    g.lstm.b_o = Vector(p.hidden);
    g.lstm.b_c = Vector(p.hidden);
  } else {
    const PlstmParams& p = model.plstm;
    g.plstm.input = p.input;
    g.plstm.hidden = p.hidden;
    g.plstm.mode = p.mode;
    g.plstm.eps = p.eps;
    g.plstm.p_learnable = p.p_learnable;
    g.plstm.p_direct = p.p_direct;
    g.plstm.U_r = Matrix(p.hidden, p.input);
    g.plstm.U_o = Matrix(p.hidden, p.input);
    g.plstm.U_c = Matrix(p.hidden, p.input);
    g.plstm.W_r = Matrix(p.hidden, p.hidden);
    g.plstm.W_o = Matrix(p.hidden, p.hidden);
    g.plstm.W_c = Matrix(p.hidden, p.hidden);
    g.plstm.b_r = Vector(p.hidden);
    g.plstm.b_o = Vector(p.hidden);
    g.plstm.b_c = Vector(p.hidden);
    g.plstm.p_hat = Vector(p.hidden);
    if (p.mode == InputGateMode::separate) {
      g.plstm.U_i = Matrix(p.hidden, p.input);
      g.plstm.W_i = Matrix(p.hidden, p.hidden);
      g.plstm.b_i = Vector(p.hidden);
    }
  }
  g.head.V = Matrix(model.head.V.rows, model.head.V.cols);
  g.head.b = Vector(model.head.b.len());
  return g;
}

namespace {

void push(std::vector<TensorRef>& out, const char* name, Matrix& m,
          bool learnable = true) {
  out.push_back({name, m.data.data(), m.size(), learnable});
}

void push(std::vector<TensorRef>& out, const char* name, Vector& v,
          bool learnable = true) {
  out.push_back({name, v.data.data(), v.len(), learnable});
}

std::vector<TensorRef> collect(CellKind kind, LstmParams& l, PlstmParams& p,
                               ReadoutParams& head) {
  std::vector<TensorRef> out;
  if (kind == CellKind::lstm) {
    push(out, "U_f", l.U_f);
    push(out, "U_i", l.U_i);
    push(out, "U_o", l.U_o);
    push(out, "U_c", l.U_c);
    push(out, "W_f", l.W_f);
    push(out, "W_i", l.W_i);
    push(out, "W_o", l.W_o);
    push(out, "W_c", l.W_c);
    push(out, "b_f", l.b_f);
    push(out, "b_i", l.b_i);
    push(out, "b_o", l.b_o);
    push(out, "b_c", l.b_c);
  } else {
    const bool separate = p.mode == InputGateMode::separate;
    push(out, "U_r", p.U_r);
    if (separate) push(out, "U_i", p.U_i);
    push(out, "U_o", p.U_o);
    push(out, "U_c", p.U_c);
    push(out, "W_r", p.W_r);
    if (separate) push(out, "W_i", p.W_i);
    push(out, "W_o", p.W_o);
    push(out, "W_c", p.W_c);
    push(out, "b_r", p.b_r);
    if (separate) push(out, "b_i", p.b_i);
    push(out, "b_o", p.b_o);
    push(out, "b_c", p.b_c);
    push(out, "p_hat", p.p_hat, p.p_learnable);
  }
  push(out, "V", head.V);
  push(out, "b_out", head.b);
  return out;
}

}  // namespace

std::vector<TensorRef> named_tensors(Model& model) {
  return collect(model.kind, model.lstm, model.plstm, model.head);
}

std::vector<TensorRef> named_tensors(GradientSet& grads) {
  return collect(grads.kind, grads.lstm, grads.plstm, grads.head);
}

std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  for (const TensorRef& t : named_tensors(const_cast<Model&>(model)))
    n += t.size;
  return n;
}

}  // namespace plstm
