#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "plstm/errors.hpp"
#include "plstm/tasks.hpp"

using namespace plstm;

namespace {

std::size_t onehot_index(const Matrix& x, std::size_t row) {
  std::size_t idx = x.cols;
  for (std::size_t c = 0; c < x.cols; ++c) {
    if (x(row, c) == 0.0) continue;
    REQUIRE(x(row, c) == 1.0);
    REQUIRE(idx == x.cols);  // at most one hot column
    idx = c;
  }
  REQUIRE(idx < x.cols);
  return idx;
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

void push_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(std::uint8_t(x >> 24));
  v.push_back(std::uint8_t(x >> 16));
  v.push_back(std::uint8_t(x >> 8));
  v.push_back(std::uint8_t(x));
}

// Minimal valid IDX pair: `count` images of rows x cols with given pixels.
void write_idx_pair(const std::string& img_path, const std::string& lab_path,
                    std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                    const std::vector<std::uint8_t>& pixels,
                    const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> img;
  push_be32(img, 0x803);
  push_be32(img, count);
  push_be32(img, rows);
  push_be32(img, cols);
  img.insert(img.end(), pixels.begin(), pixels.end());
  write_bytes(img_path, img);
  std::vector<std::uint8_t> lab;
  push_be32(lab, 0x801);
  push_be32(lab, std::uint32_t(labels.size()));
  lab.insert(lab.end(), labels.begin(), labels.end());
  write_bytes(lab_path, lab);
}

}  // namespace

// ---- copy -------------------------------------------------------------------

TEST_CASE("copy batch lays out payload, delay, signal, and echo") {
  CopyTaskConfig cfg;
  cfg.alphabet = 4;
  cfg.payload = 3;
  cfg.delay = 5;
  SeededRng rng(11);
  const SequenceBatch b = gen_copy_batch(cfg, 6, rng);

  CHECK(b.steps == 2 * 3 + 5);
  CHECK(b.features == 6);   // payload symbols + dummy + signal
  CHECK(b.classes == 5);    // payload symbols + dummy
  CHECK(!b.has_times());
  const std::size_t dummy = 4, signal = 5;
  for (std::size_t s = 0; s < b.batch; ++s) {
    std::vector<std::size_t> payload;
    for (std::size_t t = 0; t < b.steps; ++t) {
      const std::size_t sym = onehot_index(b.x[t], s);
      CHECK(b.mask[t][s] == 1);
      if (t < 3) {
        CHECK(sym < 4);
        payload.push_back(sym);
        CHECK(b.targets[t][s] == int(dummy));
      } else if (t == 3 + 5) {
        CHECK(sym == signal);
        CHECK(b.targets[t][s] == int(payload[0]));
      } else if (t > 3 + 5) {
        CHECK(sym == dummy);
        CHECK(b.targets[t][s] == int(payload[t - 3 - 5]));
      } else {
        CHECK(sym == dummy);
        CHECK(b.targets[t][s] == int(dummy));
      }
    }
  }
}

TEST_CASE("copy generation is seed-deterministic") {
  CopyTaskConfig cfg;
  cfg.payload = 4;
  cfg.delay = 6;
  SeededRng a(5), b(5), c(6);
  const SequenceBatch ba = gen_copy_batch(cfg, 4, a);
  const SequenceBatch bb = gen_copy_batch(cfg, 4, b);
  const SequenceBatch bc = gen_copy_batch(cfg, 4, c);
  bool same_ab = true, same_ac = true;
  for (std::size_t t = 0; t < ba.steps; ++t) {
    same_ab = same_ab && ba.targets[t] == bb.targets[t];
    same_ac = same_ac && ba.targets[t] == bc.targets[t];
  }
  CHECK(same_ab);
  CHECK(!same_ac);
}

TEST_CASE("variable-delay copy pads to the longest episode") {
  CopyTaskConfig cfg;
  cfg.alphabet = 8;
  cfg.payload = 2;
  cfg.delay = 3;
  cfg.delay_max = 9;
  SeededRng rng(3);
  const SequenceBatch b = gen_copy_batch(cfg, 32, rng);
  CHECK(b.steps == 2 * 2 + 9);
  const std::size_t dummy = 8, signal = 9;
  std::set<std::size_t> delays;
  for (std::size_t s = 0; s < b.batch; ++s) {
    std::size_t sig = b.steps;
    for (std::size_t t = 0; t < b.steps; ++t)
      if (onehot_index(b.x[t], s) == signal) {
        CHECK(sig == b.steps);  // exactly one signal
        sig = t;
      }
    REQUIRE(sig < b.steps);
    const std::size_t delay = sig - cfg.payload;
    CHECK(delay >= 3);
    CHECK(delay <= 9);
    delays.insert(delay);
    const std::size_t len = 2 * cfg.payload + delay;
    for (std::size_t t = 0; t < b.steps; ++t) {
      if (t < len) {
        CHECK(b.mask[t][s] == 1);
      } else {
        CHECK(b.mask[t][s] == 0);
        CHECK(b.targets[t][s] == -1);
        CHECK(onehot_index(b.x[t], s) == dummy);
      }
    }
  }
  CHECK(delays.size() > 1);  // the delay actually varies
}

TEST_CASE("copy config validation") {
  SeededRng rng(1);
  CopyTaskConfig cfg;
  cfg.alphabet = 1;
  CHECK_THROWS_AS(gen_copy_batch(cfg, 2, rng), ArgumentError);
  cfg = {};
  cfg.payload = 0;
  CHECK_THROWS_AS(gen_copy_batch(cfg, 2, rng), ArgumentError);
  cfg = {};
  cfg.delay = 0;
  CHECK_THROWS_AS(gen_copy_batch(cfg, 2, rng), ArgumentError);
  cfg = {};
  cfg.delay_max = cfg.delay;  // must exceed, not equal
  CHECK_THROWS_AS(gen_copy_batch(cfg, 2, rng), ArgumentError);
  cfg = {};
  CHECK_THROWS_AS(gen_copy_batch(cfg, 0, rng), ArgumentError);
}

TEST_CASE("copy accuracy counts only payload positions") {
  CopyTaskConfig cfg;
  cfg.alphabet = 4;
  cfg.payload = 2;
  cfg.delay = 3;
  SeededRng rng(9);
  const SequenceBatch b = gen_copy_batch(cfg, 2, rng);
  Predictions perfect(b.steps, std::vector<int>(b.batch, -1));
  for (std::size_t t = 0; t < b.steps; ++t)
    for (std::size_t s = 0; s < b.batch; ++s) perfect[t][s] = b.targets[t][s];
  CHECK(copy_accuracy(perfect, b) == 1.0);

  // Wrong at every dummy-target position: still perfect recall.
  Predictions echo_only = perfect;
  for (std::size_t t = 0; t < b.steps; ++t)
    for (std::size_t s = 0; s < b.batch; ++s)
      if (b.targets[t][s] == int(cfg.alphabet)) echo_only[t][s] = -7;
  CHECK(copy_accuracy(echo_only, b) == 1.0);

  // One of the four payload predictions flipped.
  Predictions one_off = perfect;
  const std::size_t echo_start = cfg.payload + cfg.delay;
  one_off[echo_start][0] = (perfect[echo_start][0] + 1) % int(cfg.alphabet);
  CHECK(copy_accuracy(one_off, b) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("copy task fixes its validation split") {
  CopyTaskConfig cfg;
  cfg.payload = 3;
  cfg.delay = 4;
  const CopyTask t1(cfg, 42, 64, 16);
  const CopyTask t2(cfg, 42, 64, 16);
  CHECK(t1.features() == 10);
  CHECK(t1.classes() == 9);
  CHECK(t1.name() == "copy");
  REQUIRE(t1.validation().size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const SequenceBatch& a = t1.validation()[i];
    const SequenceBatch& b = t2.validation()[i];
    REQUIRE(a.steps == b.steps);
    for (std::size_t t = 0; t < a.steps; ++t) CHECK(a.targets[t] == b.targets[t]);
  }
}

// ---- frequency discrimination -------------------------------------------------

TEST_CASE("synchronous frequency batches use the unit grid") {
  FreqTaskConfig cfg;
  SeededRng rng(21);
  const SequenceBatch b = gen_freq_batch(cfg, 10, rng);
  CHECK(b.steps == 100);
  CHECK(b.features == 1);
  CHECK(b.classes == 2);
  REQUIRE(b.has_times());
  std::size_t positives = 0;
  for (std::size_t s = 0; s < b.batch; ++s) {
    for (std::size_t t = 0; t < 100; ++t) {
      CHECK(b.times[t][s] == double(t + 1));
      CHECK(std::abs(b.x[t](s, 0)) <= 1.0);
      if (t + 1 < 100) {
        CHECK(b.mask[t][s] == 0);
        CHECK(b.targets[t][s] == -1);
      }
    }
    CHECK(b.mask[99][s] == 1);
    REQUIRE(b.targets[99][s] >= 0);
    positives += std::size_t(b.targets[99][s]);
  }
  CHECK(positives == 5);  // exact class balance
}

TEST_CASE("tenth-step grid spans 0.1 to 10") {
  FreqTaskConfig cfg;
  cfg.sampling = FreqSampling::sync_01;
  SeededRng rng(4);
  const SequenceBatch b = gen_freq_batch(cfg, 4, rng);
  CHECK(b.times[0][0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.times[99][3] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("include_time echoes the clock as a feature") {
  FreqTaskConfig cfg;
  cfg.include_time = true;
  SeededRng rng(8);
  const SequenceBatch b = gen_freq_batch(cfg, 4, rng);
  CHECK(b.features == 2);
  for (std::size_t t = 0; t < b.steps; ++t)
    for (std::size_t s = 0; s < b.batch; ++s)
      CHECK(b.x[t](s, 1) == b.times[t][s]);
}

TEST_CASE("asynchronous sampling keeps clocks strictly increasing") {
  FreqTaskConfig cfg;
  cfg.sampling = FreqSampling::async;
  SeededRng rng(31);
  const SequenceBatch b = gen_freq_batch(cfg, 16, rng);
  for (std::size_t s = 0; s < b.batch; ++s) {
    std::size_t masked = 0, last = 0;
    for (std::size_t t = 0; t < b.steps; ++t) {
      if (t == 0) {
        CHECK(b.times[0][s] > 0.0);
      } else {
        CHECK(b.times[t][s] > b.times[t - 1][s]);
      }
      if (b.mask[t][s]) {
        ++masked;
        last = t;
      }
    }
    CHECK(masked == 1);  // scored once, at the true last sample
    const std::size_t count = last + 1;
    CHECK(count >= 15);
    CHECK(count <= 125);
    // Rectangular padding: silent input, clock marching on.
    for (std::size_t t = count; t < b.steps; ++t) {
      CHECK(b.x[t](s, 0) == 0.0);
      CHECK(b.times[t][s] ==
            doctest::Approx(b.times[count - 1][s] + double(t - count + 1))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("frequency task balances a larger batch exactly") {
  FreqTaskConfig cfg;
  const FreqTask task(cfg, 17, 100, 50);
  REQUIRE(task.validation().size() == 2);
  for (const SequenceBatch& b : task.validation()) {
    std::size_t positives = 0;
    for (std::size_t s = 0; s < b.batch; ++s)
      positives += std::size_t(b.targets[99][s]);
    CHECK(positives == 25);
  }
}

// ---- sequential MNIST ----------------------------------------------------------

TEST_CASE("idx loader parses a valid pair") {
  const std::string img = temp_file("plstm_idx_img"), lab = temp_file("plstm_idx_lab");
  write_idx_pair(img, lab, 2, 2, 3, {0, 51, 102, 153, 204, 255, 1, 2, 3, 4, 5, 6},
                 {7, 3});
  const MnistData d = load_mnist_idx(img, lab);
  CHECK(d.count == 2);
  CHECK(d.rows == 2);
  CHECK(d.cols == 3);
  CHECK(d.pixels.size() == 12);
  CHECK(d.pixels[5] == 255);
  CHECK(d.labels[0] == 7);
  CHECK(d.labels[1] == 3);
  std::filesystem::remove(img);
  std::filesystem::remove(lab);
}

TEST_CASE("idx loader names the byte offset of each defect") {
  const std::string img = temp_file("plstm_idx_bad_img");
  const std::string lab = temp_file("plstm_idx_bad_lab");

  // Wrong image magic.
  write_idx_pair(img, lab, 1, 1, 1, {9}, {0});
  {
    std::vector<std::uint8_t> junk;
    push_be32(junk, 0x804);
    push_be32(junk, 1);
    push_be32(junk, 1);
    push_be32(junk, 1);
    junk.push_back(9);
    write_bytes(img, junk);
  }
  CHECK_THROWS_WITH_AS(load_mnist_idx(img, lab),
                       doctest::Contains("byte offset 0"), FormatError);

  // Truncated image payload.
  {
    std::vector<std::uint8_t> trunc;
    push_be32(trunc, 0x803);
    push_be32(trunc, 2);
    push_be32(trunc, 2);
    push_be32(trunc, 2);
    trunc.push_back(1);  // 1 of 8 pixels
    write_bytes(img, trunc);
  }
  CHECK_THROWS_WITH_AS(load_mnist_idx(img, lab),
                       doctest::Contains("byte offset 17"), FormatError);

  // Label/image count mismatch.
  write_idx_pair(img, lab, 1, 1, 1, {9}, {0, 1});
  CHECK_THROWS_WITH_AS(load_mnist_idx(img, lab),
                       doctest::Contains("2 labels for 1 images"), FormatError);

  // Label out of range.
  write_idx_pair(img, lab, 1, 1, 1, {9}, {10});
  CHECK_THROWS_WITH_AS(load_mnist_idx(img, lab), doctest::Contains("label 10"),
                       FormatError);

  std::filesystem::remove(img);
  std::filesystem::remove(lab);
}

TEST_CASE("mnist task scans pixels in sequence with the label at the end") {
  MnistData d;
  d.count = 6;
  d.rows = 2;
  d.cols = 2;
  d.pixels.resize(24);
  for (std::size_t i = 0; i < 24; ++i) d.pixels[i] = std::uint8_t(10 * i);
  d.labels = {0, 1, 2, 3, 4, 5};
  const MnistTask task(d, std::nullopt, 4, 2, 1, 2);
  CHECK(task.sequence_length() == 4);
  CHECK(task.train_sequences() == 4);
  REQUIRE(task.validation().size() == 1);
  const SequenceBatch& v = task.validation()[0];
  CHECK(v.batch == 2);     // images 4 and 5
  CHECK(v.steps == 4);
  CHECK(v.x[0](0, 0) == 160.0 / 255.0);
  CHECK(v.x[3](1, 0) == 230.0 / 255.0);
  CHECK(v.targets[3][0] == 4);
  CHECK(v.targets[3][1] == 5);
  CHECK(v.mask[2][0] == 0);
  CHECK(v.mask[3][0] == 1);

  SeededRng rng(2);
  const SequenceBatch b = task.train_batch(3, rng);
  CHECK(b.batch == 3);
  for (std::size_t s = 0; s < 3; ++s) CHECK(b.targets[3][s] <= 3);
}

TEST_CASE("pixel permutation is shared and seed-stable") {
  MnistData d;
  d.count = 2;
  d.rows = 3;
  d.cols = 3;
  d.pixels.resize(18);
  for (std::size_t i = 0; i < 18; ++i) d.pixels[i] = std::uint8_t(i);
  d.labels = {1, 2};
  const MnistTask plain(d, std::nullopt, 1, 1, 1);
  const MnistTask perm_a(d, 99, 1, 1, 1);
  const MnistTask perm_b(d, 99, 1, 1, 1);
  const Matrix& va = perm_a.validation()[0].x[0];
  CHECK(va(0, 0) == perm_b.validation()[0].x[0](0, 0));
  bool differs = false;
  for (std::size_t t = 0; t < 9; ++t)
    differs = differs || perm_a.validation()[0].x[t](0, 0) !=
                             plain.validation()[0].x[t](0, 0);
  CHECK(differs);
  // A permutation rearranges, never alters, the pixel multiset.
  double sum_perm = 0, sum_plain = 0;
  for (std::size_t t = 0; t < 9; ++t) {
    sum_perm += perm_a.validation()[0].x[t](0, 0);
    sum_plain += plain.validation()[0].x[t](0, 0);
  }
  CHECK(sum_perm == doctest::Approx(sum_plain).epsilon(1e-12));
}

TEST_CASE("mnist split sizes are validated") {
  MnistData d;
  d.count = 4;
  d.rows = 1;
  d.cols = 1;
  d.pixels.resize(4);
  d.labels = {0, 1, 2, 3};
  CHECK_THROWS_AS(MnistTask(d, std::nullopt, 4, 1, 1), ArgumentError);
  CHECK_THROWS_AS(MnistTask(d, std::nullopt, 0, 1, 1), ArgumentError);
}

// ---- character LM ---------------------------------------------------------------

TEST_CASE("char corpus maps bytes to a sorted vocabulary") {
  const CharCorpus c = char_corpus("banana band", 0.6, 0.2);
  // bytes present: space, a, b, d, n
  REQUIRE(c.vocab_size() == 5);
  CHECK(c.vocab[0] == ' ');
  CHECK(c.vocab[1] == 'a');
  CHECK(c.vocab[4] == 'n');
  CHECK(c.stream[0] == 2);  // 'b'
  CHECK(c.stream[1] == 1);  // 'a'
  CHECK(c.train_end == 6);
  CHECK(c.valid_end == 8);
}

TEST_CASE("char corpus rejects degenerate inputs") {
  CHECK_THROWS_AS(char_corpus(""), ArgumentError);
  CHECK_THROWS_AS(char_corpus("abc", 0.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(char_corpus("abc", 0.9, 0.5), ArgumentError);
  CHECK_THROWS_AS(char_corpus("ab", 0.5, 0.4), ArgumentError);  // empty valid
}

TEST_CASE("bpc converts nats to bits") {
  CHECK(bpc(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bpc(std::log(27.0)) == doctest::Approx(std::log2(27.0)).epsilon(1e-12));
}

TEST_CASE("charlm windows predict the next symbol") {
  std::string text;
  for (int i = 0; i < 40; ++i) text += "abcd";
  const CharLmTask task(char_corpus(text, 0.5, 0.25), 8, 1, 4, 64);
  CHECK(task.features() == 4);
  CHECK(task.classes() == 4);
  CHECK(task.metric_name() == "bpc");
  CHECK(!task.higher_is_better());
  CHECK(task.train_windows() == 10);  // 80 symbols / window 8
  SeededRng rng(5);
  const SequenceBatch b = task.train_batch(2, rng);
  CHECK(b.steps == 7);
  for (std::size_t t = 0; t < b.steps; ++t)
    for (std::size_t s = 0; s < b.batch; ++s) {
      const std::size_t cur = onehot_index(b.x[t], s);
      CHECK(b.mask[t][s] == 1);
      // The corpus cycles abcd, so the target is always the next letter.
      CHECK(std::size_t(b.targets[t][s]) == (cur + 1) % 4);
    }
  // Validation windows come from the held-out middle span.
  REQUIRE(!task.validation().empty());
  CHECK(task.validation()[0].steps == 7);
}

TEST_CASE("charlm rejects windows that do not fit") {
  CHECK_THROWS_AS(CharLmTask(char_corpus("abcdefghij", 0.5, 0.3), 1, 1),
                  ArgumentError);
  CHECK_THROWS_AS(CharLmTask(char_corpus("abcdefghij", 0.5, 0.3), 9, 1),
                  ArgumentError);
}

TEST_CASE("synthetic corpus is deterministic lowercase text") {
  const std::string a = make_synthetic_corpus(5000, 3);
  const std::string b = make_synthetic_corpus(5000, 3);
  const std::string c = make_synthetic_corpus(5000, 4);
  CHECK(a.size() == 5000);
  CHECK(a == b);
  CHECK(a != c);
  for (char ch : a) CHECK((ch == ' ' || (ch >= 'a' && ch <= 'z')));
  // Zipfian weighting: the top word dominates.
  std::size_t the_count = 0, pos = 0;
  while ((pos = a.find("the ", pos)) != std::string::npos) {
    ++the_count;
    pos += 4;
  }
  CHECK(the_count > 50);
}
