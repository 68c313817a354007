#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "plstm/errors.hpp"
#include "plstm/io.hpp"
#include "plstm/model.hpp"
#include "plstm/optim.hpp"
#include "plstm/tasks.hpp"

using namespace plstm;

namespace {

Model tiny_model(std::size_t input = 2, std::size_t outputs = 2,
                 std::optional<double> fixed_p = std::nullopt) {
  ModelSpec spec;
  spec.kind = CellKind::plstm;
  spec.input = input;
  spec.hidden = 3;
  spec.outputs = outputs;
  spec.fixed_p = fixed_p;
  SeededRng rng(7);
  return build_model(spec, rng);
}

void fill_grads(GradientSet& grads, double value) {
  for (const TensorRef& t : named_tensors(grads))
    for (std::size_t j = 0; j < t.size; ++j) t.data[j] = value;
}

std::vector<double> snapshot(Model& m) {
  std::vector<double> out;
  for (const TensorRef& t : named_tensors(m))
    out.insert(out.end(), t.data, t.data + t.size);
  return out;
}

CopyTask small_copy_task(std::uint64_t seed = 7) {
  CopyTaskConfig cfg;
  cfg.payload = 2;
  cfg.delay = 3;
  return CopyTask(cfg, seed, 64, 16);
}

Model copy_model(std::uint64_t seed = 3) {
  ModelSpec spec;
  spec.kind = CellKind::plstm;
  spec.input = 10;
  spec.hidden = 12;
  spec.outputs = 9;
  SeededRng rng(seed);
  return build_model(spec, rng);
}

}  // namespace

TEST_CASE("adam first step moves every weight by lr over one plus eps") {
  Model m = tiny_model();
  const std::vector<double> before = snapshot(m);
  GradientSet grads = zero_gradients(m);
  fill_grads(grads, 1.0);
  Optimizer opt(OptimizerConfig{}, m);
  opt.step(m, grads);
  CHECK(opt.updates() == 1);
  // Bias correction makes the first step exact: m_hat = 1, v_hat = 1.
  const double delta = 0.001 * 1.0 / (std::sqrt(1.0) + 1e-8);
  const std::vector<double> after = snapshot(m);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i)
    CHECK(after[i] == before[i] - delta);
}

TEST_CASE("zero gradients leave parameters untouched") {
  Model m = tiny_model();
  const std::vector<double> before = snapshot(m);
  GradientSet grads = zero_gradients(m);
  Optimizer opt(OptimizerConfig{}, m);
  opt.step(m, grads);
  opt.step(m, grads);
  CHECK(snapshot(m) == before);
}

TEST_CASE("adam step size stays lr-sized under a constant gradient") {
  Model m = tiny_model();
  GradientSet grads = zero_gradients(m);
  Optimizer opt(OptimizerConfig{}, m);
  double prev = named_tensors(m)[0].data[0];
  double delta = 0.0;
  for (int s = 0; s < 60; ++s) {
    fill_grads(grads, 2.5);
    opt.step(m, grads);
    const double cur = named_tensors(m)[0].data[0];
    delta = prev - cur;
    prev = cur;
  }
  CHECK(delta ==
        doctest::Approx(0.001 * 2.5 / (2.5 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("rmsprop first step divides by the root of the fresh average") {
  Model m = tiny_model();
  const std::vector<double> before = snapshot(m);
  GradientSet grads = zero_gradients(m);
  fill_grads(grads, 1.0);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::rmsprop;
  Optimizer opt(cfg, m);
  opt.step(m, grads);
  const double delta = 0.001 * 1.0 / std::sqrt((1.0 - 0.9) + 1e-8);
  const std::vector<double> after = snapshot(m);
  for (std::size_t i = 0; i < after.size(); ++i)
    CHECK(after[i] == before[i] - delta);
  // rmsprop keeps no second-moment buffer.
  for (const OptimSlot& s : opt.slots()) CHECK(s.m2.empty());
}

TEST_CASE("rmsprop converges to signed lr steps") {
  Model m = tiny_model();
  GradientSet grads = zero_gradients(m);
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::rmsprop;
  Optimizer opt(cfg, m);
  double prev = named_tensors(m)[0].data[0];
  double delta = 0.0;
  for (int s = 0; s < 300; ++s) {
    fill_grads(grads, -3.0);
    opt.step(m, grads);
    const double cur = named_tensors(m)[0].data[0];
    delta = cur - prev;  // gradient is negative, parameters climb
    prev = cur;
  }
  CHECK(delta == doctest::Approx(0.001).epsilon(1e-9));
}

TEST_CASE("global-norm clip rescales the gradient in place") {
  Model m = tiny_model();
  GradientSet grads = zero_gradients(m);
  fill_grads(grads, 1.0);
  OptimizerConfig cfg;
  cfg.clip_norm = 1.0;
  Optimizer opt(cfg, m);
  opt.step(m, grads);
  double sq = 0;
  for (const TensorRef& t : named_tensors(grads))
    for (std::size_t j = 0; j < t.size; ++j) sq += t.data[j] * t.data[j];
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));

  // A gradient already inside the ball passes through bitwise.
  fill_grads(grads, 1e-9);
  opt.step(m, grads);
  CHECK(named_tensors(grads)[0].data[0] == 1e-9);
}

TEST_CASE("fixed decay exponents never move") {
  Model m = tiny_model(2, 2, 1.5);
  REQUIRE(!m.plstm.p_learnable);
  const double p_before = m.plstm.p_hat[0];
  GradientSet grads = zero_gradients(m);
  fill_grads(grads, 1.0);
  Optimizer opt(OptimizerConfig{}, m);
  opt.step(m, grads);
  CHECK(m.plstm.p_hat[0] == p_before);
  CHECK(m.head.b[0] != 0.0);  // learnable neighbors did move
}

TEST_CASE("optimizer rejects mismatched gradients") {
  Model m = tiny_model();
  Model other = tiny_model(5, 4);
  GradientSet grads = zero_gradients(other);
  Optimizer opt(OptimizerConfig{}, m);
  CHECK_THROWS_AS(opt.step(m, grads), ShapeError);
}

TEST_CASE("optimizer validates its own configuration") {
  Model m = tiny_model();
  OptimizerConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(Optimizer(bad, m), ArgumentError);
  bad = {};
  bad.clip_norm = -1.0;
  CHECK_THROWS_AS(Optimizer(bad, m), ArgumentError);
}

TEST_CASE("an untrained readout scores chance-level copy loss") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  const EvalOutcome ev = eval_model(m, task, task.validation());
  // 9 classes, logits near zero: cross entropy close to ln 9.
  CHECK(ev.loss == doctest::Approx(std::log(9.0)).epsilon(0.05));
  CHECK(ev.den == 64.0 * 2);  // payload positions only
  CHECK(ev.metric == ev.num / ev.den);
  CHECK(ev.metric >= 0.0);
  CHECK(ev.metric <= 1.0);
}

TEST_CASE("training logs one valid row up front and pairs at the cadence") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_updates = 5;
  cfg.eval_every = 2;
  cfg.updates_per_epoch = 2;
  const RunRecord rec = train(m, task, cfg);
  CHECK(rec.updates_done == 5);
  CHECK(!rec.stopped_early);
  CHECK(!rec.threshold_met);
  REQUIRE(rec.rows.size() == 7);
  const char* splits[] = {"valid", "train", "valid", "train", "valid",
                          "train", "valid"};
  const std::size_t at[] = {0, 2, 2, 4, 4, 5, 5};
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(rec.rows[i].split == splits[i]);
    CHECK(rec.rows[i].update_index == at[i]);
    CHECK(rec.rows[i].metric_name == "accuracy");
  }
  // Epoch counts completed passes: updates 1-2 are epoch 0, 3-4 epoch 1, ...
  CHECK(rec.rows[0].epoch == 0);
  CHECK(rec.rows[2].epoch == 0);
  CHECK(rec.rows[4].epoch == 1);
  CHECK(rec.rows[6].epoch == 2);
  // The best update is one of the eval points.
  CHECK(rec.best_metric >= 0.0);
}

TEST_CASE("same seed reproduces the metric trajectory exactly") {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_updates = 4;
  cfg.eval_every = 2;
  cfg.seed = 17;
  const CopyTask task_a = small_copy_task();
  Model ma = copy_model();
  const RunRecord a = train(ma, task_a, cfg);
  const CopyTask task_b = small_copy_task();
  Model mb = copy_model();
  const RunRecord b = train(mb, task_b, cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].update_index == b.rows[i].update_index);
    CHECK(a.rows[i].split == b.rows[i].split);
    CHECK(a.rows[i].loss == b.rows[i].loss);
    CHECK(a.rows[i].metric_value == b.rows[i].metric_value);
  }
  CHECK(snapshot(ma) == snapshot(mb));
}

TEST_CASE("zero updates still evaluates once") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  TrainConfig cfg;
  cfg.max_updates = 0;
  const RunRecord rec = train(m, task, cfg);
  CHECK(rec.updates_done == 0);
  REQUIRE(rec.rows.size() == 1);
  CHECK(rec.rows[0].split == "valid");
}

TEST_CASE("early stop honors the patience streak") {
  // Accuracy is always >= 0, so the rule holds from the very first eval.
  const CopyTask task = small_copy_task();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_updates = 10;
  cfg.eval_every = 2;
  cfg.stop_metric = 0.0;

  Model m1 = copy_model();
  cfg.stop_patience = 1;
  const RunRecord r1 = train(m1, task, cfg);
  CHECK(r1.stopped_early);
  CHECK(r1.threshold_met);
  CHECK(r1.updates_done == 0);
  CHECK(r1.updates_to_stop == 0);
  CHECK(r1.rows.size() == 1);

  Model m3 = copy_model();
  cfg.stop_patience = 3;
  const RunRecord r3 = train(m3, task, cfg);
  CHECK(r3.stopped_early);
  CHECK(r3.threshold_met);
  CHECK(r3.updates_done == 4);  // evals at 0, 2, 4 complete the streak
  CHECK(r3.updates_to_stop == 0);
  CHECK(r3.rows.size() == 5);
}

TEST_CASE("an unreachable stop threshold never fires") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_updates = 4;
  cfg.eval_every = 2;
  cfg.stop_metric = 1.1;
  const RunRecord rec = train(m, task, cfg);
  CHECK(!rec.stopped_early);
  CHECK(!rec.threshold_met);
  CHECK(rec.updates_done == 4);
}

TEST_CASE("restore_best rewinds to the best validation point") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_updates = 6;
  cfg.eval_every = 2;
  cfg.restore_best = true;
  const RunRecord rec = train(m, task, cfg);
  REQUIRE(!rec.best_params.empty());
  const EvalOutcome ev = eval_model(m, task, task.validation());
  CHECK(ev.metric == rec.best_metric);
}

TEST_CASE("a poisoned parameter aborts with the tensor named") {
  const CopyTask task = small_copy_task();
  Model m = copy_model();
  m.plstm.W_c(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_updates = 2;
  cfg.eval_every = 10;
  try {
    train(m, task, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("non-finite loss at update 1") != std::string::npos);
    CHECK(msg.find("W_c") != std::string::npos);
  }
}

TEST_CASE("training validates shapes and cadence up front") {
  const CopyTask task = small_copy_task();
  Model wrong_input = tiny_model(3, 9);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(wrong_input, task, cfg), ShapeError);
  Model m = copy_model();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(m, task, cfg), ArgumentError);
  cfg = {};
  cfg.eval_every = 0;
  CHECK_THROWS_AS(train(m, task, cfg), ArgumentError);
  cfg = {};
  cfg.stop_patience = 0;
  CHECK_THROWS_AS(train(m, task, cfg), ArgumentError);
}

TEST_CASE("metrics csv prints rows verbatim") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "plstm_metrics_test.csv")
          .string();
  std::vector<MetricRow> rows;
  rows.push_back({1, 0, "valid", 0.5, "accuracy", 0.25, 1.5});
  rows.push_back({2, 1, "train", 2.0, "accuracy", 1.0, 0.125});
  write_metrics_csv(path, rows);
  CHECK(read_text_file(path) ==
        "update_index,epoch,split,loss,metric_name,metric_value,wallclock_s\n"
        "1,0,valid,0.5,accuracy,0.25,1.5\n"
        "2,1,train,2,accuracy,1,0.125\n");
  std::filesystem::remove(path);
}
