#include "plstm/sequence.hpp"

#include "plstm/errors.hpp"

namespace plstm {

void SequenceBatch::validate() const {
  if (steps == 0) throw ArgumentError("SequenceBatch: zero steps");
  if (x.size() != steps || targets.size() != steps || mask.size() != steps)
    throw ShapeError(detail::cat("SequenceBatch: declared ", steps,
                                 " steps but holds x=", x.size(),
                                 " targets=", targets.size(),
                                 " mask=", mask.size()));
  for (std::size_t t = 0; t < steps; ++t) {
    if (x[t].rows != batch || x[t].cols != features)
      throw ShapeError(detail::cat("SequenceBatch: x[", t, "] is ", x[t].rows,
                                   "x", x[t].cols, ", want ", batch, "x",
                                   features));
    if (targets[t].size() != batch || mask[t].size() != batch)
      throw ShapeError(detail::cat("SequenceBatch: step ", t,
                                   " target/mask rows do not match batch ",
                                   batch));
    for (std::size_t b = 0; b < batch; ++b)
      if (mask[t][b] &&
          (targets[t][b] < 0 || static_cast<std::size_t>(targets[t][b]) >= classes))
        throw ArgumentError(detail::cat("SequenceBatch: masked target ",
                                        targets[t][b], " at step ", t,
                                        " sequence ", b, " outside [0,",
                                        classes, ")"));
  }
  if (!times.empty()) {
    if (times.size() != steps)
      throw ShapeError(detail::cat("SequenceBatch: ", times.size(),
                                   " timestamp rows for ", steps, " steps"));
    for (std::size_t t = 0; t < steps; ++t) {
      if (times[t].len() != batch)
        throw ShapeError(detail::cat("SequenceBatch: times[", t, "] has len ",
                                     times[t].len(), ", want ", batch));
      for (std::size_t b = 0; b < batch; ++b) {
        const double prev = t == 0 ? 0.0 : times[t - 1][b];
        if (!(times[t][b] > prev))
          throw ArgumentError(detail::cat(
              "SequenceBatch: timestamps of sequence ", b,
              " not strictly increasing at step ", t, " (", prev, " -> ",
              times[t][b], ")"));
      }
    }
  }
}

}  // namespace plstm
