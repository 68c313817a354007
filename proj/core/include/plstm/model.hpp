#pragma once

#include <string>
#include <vector>

#include "plstm/cell.hpp"

namespace plstm {

enum class CellKind { lstm, plstm };

// Linear readout: logits = V*h + b, applied wherever the loss mask is true.
struct ReadoutParams {
  Matrix V;  // outputs x hidden
  Vector b;  // outputs
};

// One recurrent cell plus a readout head. Exactly one of lstm/plstm is live,
// selected by kind; the other stays empty.
struct Model {
  CellKind kind = CellKind::lstm;
  bool dt_mode = false;  // pLSTM consumes per-step timestamps when set
  LstmParams lstm;
  PlstmParams plstm;
  ReadoutParams head;

  std::size_t input() const { return kind == CellKind::lstm ? lstm.input : plstm.input; }
  std::size_t hidden() const { return kind == CellKind::lstm ? lstm.hidden : plstm.hidden; }
  std::size_t outputs() const { return head.V.rows; }
};

struct ModelSpec {
  CellKind kind = CellKind::plstm;
  bool dt_mode = false;
  std::size_t input = 1, hidden = 64, outputs = 2;
  InputGateMode mode = InputGateMode::coupled;
  double eps = 0.001;
  std::optional<double> chrono_Tmax;  // LSTM only
  std::optional<double> fixed_p;      // pLSTM only
};

Model build_model(const ModelSpec& spec, SeededRng& rng);

// Gradient holder: parameter-shaped tensors, zero-initialized, in the same
// field layout as the model.
struct GradientSet {
  CellKind kind = CellKind::lstm;
  LstmParams lstm;
  PlstmParams plstm;
  ReadoutParams head;
};

GradientSet zero_gradients(const Model& model);

// Flat view over one named parameter (or gradient) tensor.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  bool learnable = true;
};

// Stable traversal order shared by optimizers, checkpoints, and the
// finite-difference harness; gradients enumerate identically.
std::vector<TensorRef> named_tensors(Model& model);
std::vector<TensorRef> named_tensors(GradientSet& grads);

std::size_t parameter_count(const Model& model);

}  // namespace plstm
