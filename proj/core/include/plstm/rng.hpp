#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "plstm/tensor.hpp"

namespace plstm {

// Deterministic PRNG: std::mt19937_64 core with hand-rolled output mappings.
// The std:: distribution adaptors are implementation-defined, so uniform and
// integer draws are mapped here directly; identical seed gives an identical
// stream on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  // Uniform in [lo, hi); lo >= hi is an argument error.
  double uniform(double lo, double hi);

  // Uniform integer in [0, n); unbiased via rejection. n = 0 is an error.
  std::uint64_t integer(std::uint64_t n);

  // Fisher-Yates permutation of {0..n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  // Independent stream derived from the construction seed; children with
  // distinct ids never share state with the parent or each other.
  SeededRng child(std::uint64_t stream_id) const;

  // Engine state round-trip for checkpointing (textual mt19937_64 state).
  std::string state_string() const;
  void set_state(const std::string& s);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// n i.i.d. samples uniform in [lo, hi).
Vector sample_uniform(SeededRng& rng, double lo, double hi, std::size_t n);

}  // namespace plstm
