#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plstm/rng.hpp"
#include "plstm/sequence.hpp"

namespace plstm {

// A task is a seeded batch stream plus a fixed validation split and the rule
// for scoring predictions into one scalar metric.
class Task {
 public:
  virtual ~Task() = default;
  virtual std::string name() const = 0;
  virtual std::size_t features() const = 0;
  virtual std::size_t classes() const = 0;
  virtual std::string metric_name() const { return "accuracy"; }
  virtual bool higher_is_better() const { return true; }
  virtual bool needs_predictions() const { return true; }
  virtual SequenceBatch train_batch(std::size_t size, SeededRng& rng) const = 0;
  virtual const std::vector<SequenceBatch>& validation() const = 0;
  // Training-set size in sequences; 0 for generative tasks with no fixed set.
  virtual std::size_t train_sequences() const { return 0; }
  // Metric contribution of one batch as (numerator, denominator). The default
  // counts argmax hits over every masked position.
  virtual std::pair<double, double> score(const SequenceBatch& batch,
                                          const Predictions& preds) const;
  // Scalar metric from the aggregated loss and score sums.
  virtual double metric_value(double mean_loss, double num, double den) const;
};

// ---- copy memory -----------------------------------------------------------
// Input alphabet: symbols 0..alphabet-1 carry the payload, symbol `alphabet`
// is the dummy, symbol `alphabet`+1 the go signal. The readout never emits the
// signal, so it has one class fewer than the input.

struct CopyTaskConfig {
  std::size_t alphabet = 8;  // payload symbol count
  std::size_t payload = 10;  // symbols to memorize
  std::size_t delay = 100;
  std::size_t delay_max = 0;  // when > delay: per-sequence delay U{delay..delay_max}
};

// Fixed delay: steps = 2*payload + delay. Variable: padded to the max delay
// with the dummy symbol and a false mask tail.
SequenceBatch gen_copy_batch(const CopyTaskConfig& cfg, std::size_t batch,
                             SeededRng& rng);

// Fraction of correctly reconstructed payload symbols (dummy-target positions
// do not count, matching the reported copy metric).
double copy_accuracy(const Predictions& preds, const SequenceBatch& batch);

class CopyTask : public Task {
 public:
  CopyTask(CopyTaskConfig cfg, std::uint64_t seed,
           std::size_t val_sequences = 320, std::size_t val_batch = 32);
  std::string name() const override { return cfg_.delay_max ? "copy-var" : "copy"; }
  std::size_t features() const override { return cfg_.alphabet + 2; }
  std::size_t classes() const override { return cfg_.alphabet + 1; }
  SequenceBatch train_batch(std::size_t size, SeededRng& rng) const override;
  const std::vector<SequenceBatch>& validation() const override { return val_; }
  std::pair<double, double> score(const SequenceBatch& batch,
                                  const Predictions& preds) const override;
  const CopyTaskConfig& config() const { return cfg_; }

 private:
  CopyTaskConfig cfg_;
  std::vector<SequenceBatch> val_;
};

// ---- frequency discrimination ----------------------------------------------
// Binary question asked at the last sample of a sine wave: is the period
// inside (5,6)? Class B draws its period from (1,5) u (6,100) with
// length-proportional weight. Timestamps always populate batch.times; the
// include_time flag additionally appends the raw time as an input feature.

enum class FreqSampling { sync_1, sync_01, async };

struct FreqTaskConfig {
  FreqSampling sampling = FreqSampling::sync_1;
  bool include_time = false;
};

SequenceBatch gen_freq_batch(const FreqTaskConfig& cfg, std::size_t batch,
                             SeededRng& rng);

class FreqTask : public Task {
 public:
  FreqTask(FreqTaskConfig cfg, std::uint64_t seed,
           std::size_t val_sequences = 500, std::size_t val_batch = 50);
  std::string name() const override { return "freq"; }
  std::size_t features() const override { return cfg_.include_time ? 2 : 1; }
  std::size_t classes() const override { return 2; }
  SequenceBatch train_batch(std::size_t size, SeededRng& rng) const override;
  const std::vector<SequenceBatch>& validation() const override { return val_; }
  const FreqTaskConfig& config() const { return cfg_; }

 private:
  FreqTaskConfig cfg_;
  std::vector<SequenceBatch> val_;
};

// ---- sequential MNIST -------------------------------------------------------

struct MnistData {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
  std::vector<std::uint8_t> labels;  // count
};

// IDX pair loader (big-endian magic 0x803 images / 0x801 labels). Malformed
// content fails with the byte offset of the problem.
MnistData load_mnist_idx(const std::string& image_path,
                         const std::string& label_path);

// Images as pixel sequences (row-major scan, intensity / 255), class at the
// final step. An optional permutation seed fixes one shared shuffling of the
// pixel positions across every split.
class MnistTask : public Task {
 public:
  MnistTask(MnistData data, std::optional<std::uint64_t> permutation_seed,
            std::size_t train_count, std::size_t valid_count,
            std::uint64_t seed, std::size_t val_batch = 50);
  std::string name() const override { return "mnist"; }
  std::size_t features() const override { return 1; }
  std::size_t classes() const override { return 10; }
  SequenceBatch train_batch(std::size_t size, SeededRng& rng) const override;
  const std::vector<SequenceBatch>& validation() const override { return val_; }
  std::size_t train_sequences() const override { return train_count_; }
  std::size_t sequence_length() const { return data_.rows * data_.cols; }
  std::size_t train_count() const { return train_count_; }

 private:
  SequenceBatch build(const std::vector<std::size_t>& indices) const;

  MnistData data_;
  std::vector<std::size_t> perm_;
  std::size_t train_count_ = 0;
  std::vector<SequenceBatch> val_;
};

// ---- character-level language modeling --------------------------------------

struct CharCorpus {
  std::vector<std::uint8_t> stream;  // symbol ids
  std::vector<std::uint8_t> vocab;   // id -> byte
  std::size_t train_end = 0, valid_end = 0;  // contiguous split offsets

  std::size_t vocab_size() const { return vocab.size(); }
};

CharCorpus char_corpus(const std::string& text, double train_frac = 0.8,
                       double valid_frac = 0.1);

// nats per symbol -> bits per character.
double bpc(double loss_nats);

// Deterministic ~`bytes`-long lowercase text (a-z and space) with a Zipfian
// word distribution; stands in for a natural corpus where none ships.
std::string make_synthetic_corpus(std::size_t bytes, std::uint64_t seed);

// Non-overlapping windows of `window` symbols; each yields window-1 next-char
// predictions with state reset at the window start.
class CharLmTask : public Task {
 public:
  CharLmTask(CharCorpus corpus, std::size_t window, std::uint64_t seed,
             std::size_t val_batch = 32, std::size_t max_val_windows = 64);
  std::string name() const override { return "charlm"; }
  std::size_t features() const override { return corpus_.vocab_size(); }
  std::size_t classes() const override { return corpus_.vocab_size(); }
  std::string metric_name() const override { return "bpc"; }
  bool higher_is_better() const override { return false; }
  bool needs_predictions() const override { return false; }
  SequenceBatch train_batch(std::size_t size, SeededRng& rng) const override;
  const std::vector<SequenceBatch>& validation() const override { return val_; }
  std::size_t train_sequences() const override { return train_windows_; }
  std::pair<double, double> score(const SequenceBatch&,
                                  const Predictions&) const override {
    return {0.0, 0.0};
  }
  double metric_value(double mean_loss, double, double) const override {
    return bpc(mean_loss);
  }
  std::size_t train_windows() const { return train_windows_; }
  std::size_t window() const { return window_; }

 private:
  SequenceBatch build(const std::vector<std::size_t>& windows) const;

  CharCorpus corpus_;
  std::size_t window_ = 150;
  std::size_t train_windows_ = 0;
  std::vector<SequenceBatch> val_;
};

}  // namespace plstm
