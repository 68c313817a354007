#include "plstm/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "plstm/errors.hpp"

namespace plstm {

std::pair<double, double> Task::score(const SequenceBatch& batch,
                                      const Predictions& preds) const {
  double num = 0, den = 0;
  for (std::size_t t = 0; t < batch.steps; ++t) {
    for (std::size_t b = 0; b < batch.batch; ++b) {
      if (!batch.mask[t][b]) continue;
      den += 1;
      if (preds[t][b] == batch.targets[t][b]) num += 1;
    }
  }
  return {num, den};
}

double Task::metric_value(double, double num, double den) const {
  return den > 0 ? num / den : 0.0;
}

// ---- copy memory -----------------------------------------------------------

namespace {

void check_copy_config(const CopyTaskConfig& cfg) {
  if (cfg.alphabet < 2) throw ArgumentError("copy alphabet must be >= 2");
  if (cfg.payload == 0) throw ArgumentError("copy payload must be >= 1");
  if (cfg.delay == 0) throw ArgumentError("copy delay must be >= 1");
  if (cfg.delay_max != 0 && cfg.delay_max <= cfg.delay)
    throw ArgumentError(detail::cat("copy delay_max ", cfg.delay_max,
                                    " must exceed delay ", cfg.delay));
}

}  // namespace

SequenceBatch gen_copy_batch(const CopyTaskConfig& cfg, std::size_t batch,
                             SeededRng& rng) {
  check_copy_config(cfg);
  if (batch == 0) throw ArgumentError("batch size must be positive");

  const std::size_t n = cfg.payload;
  const std::size_t max_delay = cfg.delay_max ? cfg.delay_max : cfg.delay;
  const std::size_t steps = 2 * n + max_delay;
  const std::size_t dummy = cfg.alphabet, signal = cfg.alphabet + 1;

  SequenceBatch out;
  out.batch = batch;
  out.steps = steps;
  out.features = cfg.alphabet + 2;
  out.classes = cfg.alphabet + 1;
  out.x.assign(steps, Matrix(batch, out.features));
  out.targets.assign(steps, std::vector<int>(batch, -1));
  out.mask.assign(steps, std::vector<std::uint8_t>(batch, 0));

  std::vector<std::size_t> payload(n);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t delay =
        cfg.delay_max ? cfg.delay + rng.integer(cfg.delay_max - cfg.delay + 1)
                      : cfg.delay;
    for (std::size_t i = 0; i < n; ++i) payload[i] = rng.integer(cfg.alphabet);
    const std::size_t len = 2 * n + delay;
    for (std::size_t t = 0; t < steps; ++t) {
      std::size_t sym = dummy;
      if (t < n) sym = payload[t];
      else if (t == n + delay) sym = signal;
      out.x[t](b, sym) = 1.0;
      if (t >= len) continue;  // variable-delay padding stays unmasked
      out.mask[t][b] = 1;
      out.targets[t][b] = t < n + delay
                              ? static_cast<int>(dummy)
                              : static_cast<int>(payload[t - n - delay]);
    }
  }
  out.validate();
  return out;
}

double copy_accuracy(const Predictions& preds, const SequenceBatch& batch) {
  const int dummy = static_cast<int>(batch.classes) - 1;
  double num = 0, den = 0;
  for (std::size_t t = 0; t < batch.steps; ++t) {
    for (std::size_t b = 0; b < batch.batch; ++b) {
      if (!batch.mask[t][b] || batch.targets[t][b] == dummy) continue;
      den += 1;
      if (preds[t][b] == batch.targets[t][b]) num += 1;
    }
  }
  return den > 0 ? num / den : 0.0;
}

CopyTask::CopyTask(CopyTaskConfig cfg, std::uint64_t seed,
                   std::size_t val_sequences, std::size_t val_batch)
    : cfg_(cfg) {
  check_copy_config(cfg_);
  SeededRng rng(seed);
  for (std::size_t done = 0; done < val_sequences; done += val_batch) {
    const std::size_t b = std::min(val_batch, val_sequences - done);
    val_.push_back(gen_copy_batch(cfg_, b, rng));
  }
}

SequenceBatch CopyTask::train_batch(std::size_t size, SeededRng& rng) const {
  return gen_copy_batch(cfg_, size, rng);
}

std::pair<double, double> CopyTask::score(const SequenceBatch& batch,
                                          const Predictions& preds) const {
  const int dummy = static_cast<int>(cfg_.alphabet);
  double num = 0, den = 0;
  for (std::size_t t = 0; t < batch.steps; ++t) {
    for (std::size_t b = 0; b < batch.batch; ++b) {
      if (!batch.mask[t][b] || batch.targets[t][b] == dummy) continue;
      den += 1;
      if (preds[t][b] == batch.targets[t][b]) num += 1;
    }
  }
  return {num, den};
}

// ---- frequency discrimination ----------------------------------------------

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Class A lives in (5,6); class B draws from (1,5) u (6,100) with mass
// proportional to interval length (4 : 94).
double draw_period(bool class_a, SeededRng& rng) {
  if (class_a) return 5.0 + rng.uniform();
  const double u = rng.uniform(0.0, 98.0);
  return u < 4.0 ? 1.0 + u : 6.0 + (u - 4.0);
}

}  // namespace

SequenceBatch gen_freq_batch(const FreqTaskConfig& cfg, std::size_t batch,
                             SeededRng& rng) {
  if (batch == 0) throw ArgumentError("batch size must be positive");

  // Exact per-batch class balance; an odd batch's extra label is random.
  std::vector<int> labels(batch, 0);
  std::size_t n_a = batch / 2;
  if (batch % 2 && rng.integer(2) == 1) ++n_a;
  for (std::size_t i = 0; i < n_a; ++i) labels[i] = 1;
  const std::vector<std::size_t> order = rng.permutation(batch);
  std::vector<int> shuffled(batch);
  for (std::size_t i = 0; i < batch; ++i) shuffled[order[i]] = labels[i];
  labels.swap(shuffled);

  std::vector<double> periods(batch), phases(batch);
  std::vector<std::vector<double>> clocks(batch);
  std::size_t steps = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    periods[b] = draw_period(labels[b] == 1, rng);
    phases[b] = rng.uniform(0.0, kTwoPi);
    auto& tb = clocks[b];
    switch (cfg.sampling) {
      case FreqSampling::sync_1:
        tb.resize(100);
        for (std::size_t i = 0; i < 100; ++i) tb[i] = double(i + 1);
        break;
      case FreqSampling::sync_01:
        tb.resize(100);
        for (std::size_t i = 0; i < 100; ++i) tb[i] = double(i + 1) * 0.1;
        break;
      case FreqSampling::async: {
        const double duration = rng.uniform(15.0, 125.0);
        tb.resize(15 + rng.integer(111));
        for (auto& t : tb) t = rng.uniform(0.0, duration);
        std::sort(tb.begin(), tb.end());
        // Nudge ties so the clock is strictly increasing and positive.
        tb[0] = std::max(tb[0], 1e-9);
        for (std::size_t i = 1; i < tb.size(); ++i)
          tb[i] = std::max(tb[i], tb[i - 1] + 1e-9);
        break;
      }
    }
    steps = std::max(steps, tb.size());
  }

  SequenceBatch out;
  out.batch = batch;
  out.steps = steps;
  out.features = cfg.include_time ? 2 : 1;
  out.classes = 2;
  out.x.assign(steps, Matrix(batch, out.features));
  out.targets.assign(steps, std::vector<int>(batch, -1));
  out.mask.assign(steps, std::vector<std::uint8_t>(batch, 0));
  out.times.assign(steps, Vector(batch));

  for (std::size_t b = 0; b < batch; ++b) {
    const auto& tb = clocks[b];
    for (std::size_t t = 0; t < steps; ++t) {
      // Padding beyond a sequence's last sample keeps the clock ticking on a
      // silent input; only the true last sample is scored.
      const double clock =
          t < tb.size() ? tb[t] : tb.back() + double(t - tb.size() + 1);
      out.times[t][b] = clock;
      if (t < tb.size())
        out.x[t](b, 0) = std::sin(kTwoPi * tb[t] / periods[b] + phases[b]);
      if (cfg.include_time) out.x[t](b, 1) = clock;
    }
    out.targets[tb.size() - 1][b] = labels[b];
    out.mask[tb.size() - 1][b] = 1;
  }
  out.validate();
  return out;
}

FreqTask::FreqTask(FreqTaskConfig cfg, std::uint64_t seed,
                   std::size_t val_sequences, std::size_t val_batch)
    : cfg_(cfg) {
  SeededRng rng(seed);
  for (std::size_t done = 0; done < val_sequences; done += val_batch) {
    const std::size_t b = std::min(val_batch, val_sequences - done);
    val_.push_back(gen_freq_batch(cfg_, b, rng));
  }
}

SequenceBatch FreqTask::train_batch(std::size_t size, SeededRng& rng) const {
  return gen_freq_batch(cfg_, size, rng);
}

// ---- sequential MNIST -------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError(detail::cat("cannot open ", path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t be32(const std::vector<std::uint8_t>& bytes, std::size_t off,
                   const std::string& path) {
  if (off + 4 > bytes.size())
    throw FormatError(detail::cat(path, ": truncated at byte offset ",
                                  bytes.size(), ", expected a 32-bit field at ",
                                  off));
  return (std::uint32_t(bytes[off]) << 24) | (std::uint32_t(bytes[off + 1]) << 16) |
         (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]);
}

}  // namespace

MnistData load_mnist_idx(const std::string& image_path,
                         const std::string& label_path) {
  const auto img = read_binary(image_path);
  const std::uint32_t img_magic = be32(img, 0, image_path);
  if (img_magic != 0x00000803u) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "%08x", img_magic);
    throw FormatError(detail::cat(image_path, ": bad image magic 0x", hex,
                                  " at byte offset 0"));
  }
  MnistData data;
  data.count = be32(img, 4, image_path);
  data.rows = be32(img, 8, image_path);
  data.cols = be32(img, 12, image_path);
  const std::size_t want = 16 + data.count * data.rows * data.cols;
  if (img.size() != want)
    throw FormatError(detail::cat(image_path, ": expected ", want,
                                  " bytes, file ends at byte offset ",
                                  img.size()));
  data.pixels.assign(img.begin() + 16, img.end());

  const auto lab = read_binary(label_path);
  const std::uint32_t lab_magic = be32(lab, 0, label_path);
  if (lab_magic != 0x00000801u) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "%08x", lab_magic);
    throw FormatError(detail::cat(label_path, ": bad label magic 0x", hex,
                                  " at byte offset 0"));
  }
  const std::size_t lab_count = be32(lab, 4, label_path);
  if (lab.size() != 8 + lab_count)
    throw FormatError(detail::cat(label_path, ": expected ", 8 + lab_count,
                                  " bytes, file ends at byte offset ",
                                  lab.size()));
  if (lab_count != data.count)
    throw FormatError(detail::cat(label_path, ": ", lab_count,
                                  " labels for ", data.count, " images"));
  data.labels.assign(lab.begin() + 8, lab.end());
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (data.labels[i] > 9)
      throw FormatError(detail::cat(label_path, ": label ", int(data.labels[i]),
                                    " out of range at byte offset ", 8 + i));
  return data;
}

MnistTask::MnistTask(MnistData data, std::optional<std::uint64_t> permutation_seed,
                     std::size_t train_count, std::size_t valid_count,
                     std::uint64_t seed, std::size_t val_batch)
    : data_(std::move(data)), train_count_(train_count) {
  if (train_count == 0 || valid_count == 0)
    throw ArgumentError("mnist split sizes must be positive");
  if (train_count + valid_count > data_.count)
    throw ArgumentError(detail::cat("mnist splits need ",
                                    train_count + valid_count, " images, have ",
                                    data_.count));
  const std::size_t n = data_.rows * data_.cols;
  if (permutation_seed) {
    SeededRng prng(*permutation_seed);
    perm_ = prng.permutation(n);
  } else {
    perm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  }
  (void)seed;  // train sampling uses the caller's stream
  std::vector<std::size_t> idx;
  for (std::size_t done = 0; done < valid_count; done += val_batch) {
    const std::size_t b = std::min(val_batch, valid_count - done);
    idx.resize(b);
    for (std::size_t i = 0; i < b; ++i) idx[i] = train_count + done + i;
    val_.push_back(build(idx));
  }
}

SequenceBatch MnistTask::build(const std::vector<std::size_t>& indices) const {
  const std::size_t steps = data_.rows * data_.cols, batch = indices.size();
  SequenceBatch out;
  out.batch = batch;
  out.steps = steps;
  out.features = 1;
  out.classes = 10;
  out.x.assign(steps, Matrix(batch, 1));
  out.targets.assign(steps, std::vector<int>(batch, -1));
  out.mask.assign(steps, std::vector<std::uint8_t>(batch, 0));
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* img = data_.pixels.data() + indices[b] * steps;
    for (std::size_t t = 0; t < steps; ++t)
      out.x[t](b, 0) = img[perm_[t]] / 255.0;
    out.targets[steps - 1][b] = data_.labels[indices[b]];
    out.mask[steps - 1][b] = 1;
  }
  out.validate();
  return out;
}

SequenceBatch MnistTask::train_batch(std::size_t size, SeededRng& rng) const {
  if (size == 0) throw ArgumentError("batch size must be positive");
  std::vector<std::size_t> idx(size);
  for (auto& i : idx) i = rng.integer(train_count_);  // with replacement
  return build(idx);
}

// ---- character-level language modeling --------------------------------------

CharCorpus char_corpus(const std::string& text, double train_frac,
                       double valid_frac) {
  if (text.empty()) throw ArgumentError("corpus text is empty");
  if (train_frac <= 0 || valid_frac <= 0 || train_frac + valid_frac > 1.0)
    throw ArgumentError(detail::cat("bad corpus split fractions ", train_frac,
                                    "/", valid_frac));
  bool seen[256] = {};
  for (unsigned char c : text) seen[c] = true;
  CharCorpus corpus;
  std::uint8_t id_of[256] = {};
  for (std::size_t c = 0; c < 256; ++c) {
    if (!seen[c]) continue;
    id_of[c] = static_cast<std::uint8_t>(corpus.vocab.size());
    corpus.vocab.push_back(static_cast<std::uint8_t>(c));
  }
  corpus.stream.reserve(text.size());
  for (unsigned char c : text) corpus.stream.push_back(id_of[c]);
  corpus.train_end = static_cast<std::size_t>(text.size() * train_frac);
  corpus.valid_end =
      corpus.train_end + static_cast<std::size_t>(text.size() * valid_frac);
  if (corpus.train_end == 0 || corpus.valid_end <= corpus.train_end)
    throw ArgumentError("corpus too short to split");
  return corpus;
}

double bpc(double loss_nats) { return loss_nats / std::log(2.0); }

std::string make_synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
  static const char* const kWords[] = {
      "the",     "of",      "and",      "to",       "in",      "that",
      "it",      "was",     "for",      "on",       "with",    "as",
      "his",     "they",    "be",       "at",       "one",     "have",
      "this",    "from",    "or",       "had",      "by",      "hot",
      "word",    "but",     "what",     "some",     "we",      "can",
      "out",     "other",   "were",     "all",      "there",   "when",
      "up",      "use",     "your",     "how",      "said",    "an",
      "each",    "she",     "which",    "do",       "their",   "time",
      "if",      "will",    "way",      "about",    "many",    "then",
      "them",    "write",   "would",    "like",     "so",      "these",
      "her",     "long",    "make",     "thing",    "see",     "him",
      "two",     "has",     "look",     "more",     "day",     "could",
      "go",      "come",    "did",      "number",   "sound",   "no",
      "most",    "people",  "my",       "over",     "know",    "water",
      "than",    "call",    "first",    "who",      "may",     "down",
      "side",    "been",    "now",      "find",     "any",     "new",
      "work",    "part",    "take",     "get",      "place",   "made",
      "live",    "where",   "after",    "back",     "little",  "only",
      "round",   "man",     "year",     "came",     "show",    "every",
      "good",    "under",   "name",     "very",     "through", "just",
      "form",    "sentence", "great",   "think",    "say",     "help",
      "low",     "line",    "differ",   "turn",     "cause",   "much",
  };
  constexpr std::size_t kCount = sizeof kWords / sizeof kWords[0];
  // Zipfian weights 1/rank over the list order.
  double total = 0;
  double weights[kCount];
  for (std::size_t i = 0; i < kCount; ++i) {
    weights[i] = 1.0 / double(i + 1);
    total += weights[i];
  }
  SeededRng rng(seed);
  std::string text;
  text.reserve(bytes + 16);
  while (text.size() < bytes) {
    double u = rng.uniform(0.0, total);
    std::size_t pick = 0;
    while (pick + 1 < kCount && u >= weights[pick]) u -= weights[pick], ++pick;
    if (!text.empty()) text.push_back(' ');
    text += kWords[pick];
  }
  text.resize(bytes);
  return text;
}

CharLmTask::CharLmTask(CharCorpus corpus, std::size_t window,
                       std::uint64_t seed, std::size_t val_batch,
                       std::size_t max_val_windows)
    : corpus_(std::move(corpus)), window_(window) {
  if (window_ < 2) throw ArgumentError("charlm window must be >= 2");
  train_windows_ = corpus_.train_end / window_;
  if (train_windows_ == 0)
    throw ArgumentError(detail::cat("train split holds no full window of ",
                                    window_, " symbols"));
  const std::size_t val_span = corpus_.valid_end - corpus_.train_end;
  std::size_t n_val = std::min(val_span / window_, max_val_windows);
  if (n_val == 0)
    throw ArgumentError(detail::cat("validation split holds no full window of ",
                                    window_, " symbols"));
  (void)seed;
  std::vector<std::size_t> starts;
  for (std::size_t done = 0; done < n_val; done += val_batch) {
    const std::size_t b = std::min(val_batch, n_val - done);
    starts.resize(b);
    for (std::size_t i = 0; i < b; ++i)
      starts[i] = corpus_.train_end + (done + i) * window_;
    val_.push_back(build(starts));
  }
}

SequenceBatch CharLmTask::build(const std::vector<std::size_t>& starts) const {
  const std::size_t batch = starts.size(), steps = window_ - 1;
  const std::size_t vocab = corpus_.vocab_size();
  SequenceBatch out;
  out.batch = batch;
  out.steps = steps;
  out.features = vocab;
  out.classes = vocab;
  out.x.assign(steps, Matrix(batch, vocab));
  out.targets.assign(steps, std::vector<int>(batch, -1));
  out.mask.assign(steps, std::vector<std::uint8_t>(batch, 1));
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t s = starts[b];
    for (std::size_t t = 0; t < steps; ++t) {
      out.x[t](b, corpus_.stream[s + t]) = 1.0;
      out.targets[t][b] = corpus_.stream[s + t + 1];
    }
  }
  out.validate();
  return out;
}

SequenceBatch CharLmTask::train_batch(std::size_t size, SeededRng& rng) const {
  if (size == 0) throw ArgumentError("batch size must be positive");
  std::vector<std::size_t> starts(size);
  for (auto& s : starts) s = rng.integer(train_windows_) * window_;
  return build(starts);
}

}  // namespace plstm
