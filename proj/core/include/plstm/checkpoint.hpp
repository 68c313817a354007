#pragma once

#include <optional>
#include <string>

#include "plstm/model.hpp"
#include "plstm/optim.hpp"

namespace plstm {

// Everything a resumed run needs. Parameters (and moment buffers) round-trip
// bit-exactly: each binary64 is stored as its 16-hex-digit bit pattern.
struct LoadedCheckpoint {
  ModelSpec spec;
  Model model;
  std::optional<OptimizerConfig> opt_config;  // present when saved with an optimizer
  std::size_t opt_updates = 0;
  std::vector<OptimSlot> opt_slots;
  std::string rng_state;    // empty when not saved
  std::string config_json;  // caller's config echo, verbatim
};

// Atomic save: the file appears complete or not at all. opt, rng_state, and
// config_json are optional extras.
void save_checkpoint(const std::string& path, Model& model,
                     const ModelSpec& spec, const Optimizer* opt = nullptr,
                     const std::string& rng_state = "",
                     const std::string& config_json = "");

// Rebuilds the model from the stored spec, then overwrites every tensor with
// the stored bits. Any version, name, or size mismatch is refused.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Restores moment buffers and the step counter saved alongside the model.
// The optimizer must have been built for the same model.
void restore_optimizer(Optimizer& opt, const LoadedCheckpoint& loaded);

}  // namespace plstm
