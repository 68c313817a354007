#pragma once

#include <cstdint>
#include <vector>

#include "plstm/tensor.hpp"

namespace plstm {

// A rectangular batch of sequences. Loss is charged only where mask is true;
// a true mask entry implies a valid target. times, when present, carries one
// strictly increasing positive clock per sequence (consumed by the
// variable-step cell and optionally echoed as an input feature by tasks).
struct SequenceBatch {
  std::size_t batch = 0, steps = 0, features = 0, classes = 0;
  std::vector<Matrix> x;                        // [step], each batch x features
  std::vector<std::vector<int>> targets;        // [step][seq]; -1 where unused
  std::vector<std::vector<std::uint8_t>> mask;  // [step][seq]
  std::vector<Vector> times;                    // [step], each len batch; empty = unit steps

  bool has_times() const { return !times.empty(); }
  void validate() const;  // throws on any broken invariant
};

// Per-step argmax predictions, same layout as targets; -1 where unmasked.
using Predictions = std::vector<std::vector<int>>;

}  // namespace plstm
