#include "plstm/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <variant>

#include "json.hpp"
#include "plstm/backprop.hpp"
#include "plstm/errors.hpp"
#include "plstm/io.hpp"

namespace plstm {

namespace {

using nlohmann::json;

// Synthetic charlm corpus seed. Fixed so every run seed shares one corpus.
constexpr std::uint64_t kCorpusSeed = 71;
// Offset separating validation-data streams from the training stream.
constexpr std::uint64_t kValSeedOffset = 0x9e3779b97f4a7c15ull;

struct Field {
  const char* name;
  std::variant<std::string ExperimentConfig::*, bool ExperimentConfig::*,
               std::size_t ExperimentConfig::*, double ExperimentConfig::*>
      ref;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"task", &ExperimentConfig::task},
      {"model", &ExperimentConfig::model},
      {"seed", &ExperimentConfig::seed},
      {"out", &ExperimentConfig::out},
      {"hidden", &ExperimentConfig::hidden},
      {"eps", &ExperimentConfig::eps},
      {"fixed_p", &ExperimentConfig::fixed_p},
      {"chrono_tmax", &ExperimentConfig::chrono_tmax},
      {"input_gate", &ExperimentConfig::input_gate},
      {"include_time", &ExperimentConfig::include_time},
      {"copy_alphabet", &ExperimentConfig::copy_alphabet},
      {"copy_payload", &ExperimentConfig::copy_payload},
      {"T", &ExperimentConfig::T},
      {"T_max", &ExperimentConfig::T_max},
      {"freq_sampling", &ExperimentConfig::freq_sampling},
      {"mnist_images", &ExperimentConfig::mnist_images},
      {"mnist_labels", &ExperimentConfig::mnist_labels},
      {"mnist_permute", &ExperimentConfig::mnist_permute},
      {"mnist_perm_seed", &ExperimentConfig::mnist_perm_seed},
      {"mnist_train", &ExperimentConfig::mnist_train},
      {"mnist_valid", &ExperimentConfig::mnist_valid},
      {"charlm_path", &ExperimentConfig::charlm_path},
      {"charlm_bytes", &ExperimentConfig::charlm_bytes},
      {"charlm_window", &ExperimentConfig::charlm_window},
      {"optimizer", &ExperimentConfig::optimizer},
      {"lr", &ExperimentConfig::lr},
      {"clip_norm", &ExperimentConfig::clip_norm},
      {"batch_size", &ExperimentConfig::batch_size},
      {"max_updates", &ExperimentConfig::max_updates},
      {"eval_every", &ExperimentConfig::eval_every},
      {"epochs", &ExperimentConfig::epochs},
      {"epoch_sequences", &ExperimentConfig::epoch_sequences},
      {"stop_metric", &ExperimentConfig::stop_metric},
      {"stop_patience", &ExperimentConfig::stop_patience},
      {"restore_best", &ExperimentConfig::restore_best},
      {"val_sequences", &ExperimentConfig::val_sequences},
      {"checkpoint", &ExperimentConfig::checkpoint},
      {"resume", &ExperimentConfig::resume},
      {"gradcheck_hidden", &ExperimentConfig::gradcheck_hidden},
      {"gradcheck_len", &ExperimentConfig::gradcheck_len},
      {"gradcheck_fd_step", &ExperimentConfig::gradcheck_fd_step},
      {"gradcheck_tol", &ExperimentConfig::gradcheck_tol},
      {"ablate_group", &ExperimentConfig::ablate_group},
      {"ablate_total", &ExperimentConfig::ablate_total},
      {"sweep_ps", &ExperimentConfig::sweep_ps},
      {"sweep_Ts", &ExperimentConfig::sweep_Ts},
      {"decay_kind", &ExperimentConfig::decay_kind},
      {"decay_param", &ExperimentConfig::decay_param},
      {"decay_steps", &ExperimentConfig::decay_steps},
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.name) return f;
  throw ConfigError(detail::cat("unknown config key '", key, "'"));
}

void assign_json(ExperimentConfig& cfg, const Field& f, const json& value) {
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!value.is_string())
            throw ConfigError(detail::cat("config key '", f.name,
                                          "' wants a string"));
          cfg.*member = value.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!value.is_boolean())
            throw ConfigError(detail::cat("config key '", f.name,
                                          "' wants a boolean"));
          cfg.*member = value.get<bool>();
        } else if constexpr (std::is_same_v<T, std::size_t>) {
          if (!value.is_number_integer() && !value.is_number_unsigned())
            throw ConfigError(detail::cat("config key '", f.name,
                                          "' wants a nonnegative integer"));
          if (value.is_number_integer() && value.get<long long>() < 0)
            throw ConfigError(detail::cat("config key '", f.name,
                                          "' wants a nonnegative integer"));
          cfg.*member = value.get<std::size_t>();
        } else {
          if (!value.is_number())
            throw ConfigError(detail::cat("config key '", f.name,
                                          "' wants a number"));
          cfg.*member = value.get<double>();
        }
      },
      f.ref);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const Field& f : fields())
    std::visit([&](auto member) { j[f.name] = cfg.*member; }, f.ref);
  return j;
}

std::vector<double> parse_list(const std::string& text, const char* key) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size())
      throw ConfigError(detail::cat("config key '", key,
                                    "' holds a malformed number '", item, "'"));
    values.push_back(v);
    pos = comma + 1;
  }
  return values;
}

std::uint64_t val_seed(const ExperimentConfig& cfg) {
  return std::uint64_t(cfg.seed) ^ kValSeedOffset;
}

// Longest dependency span of the configured task; chrono bias init horizon.
std::size_t task_horizon(const ExperimentConfig& cfg) {
  if (cfg.task == "freq") return 100;
  if (cfg.task == "mnist") return 784;
  if (cfg.task == "charlm") return cfg.charlm_window - 1;
  return 2 * cfg.copy_payload + (cfg.T_max ? cfg.T_max : cfg.T);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError(detail::cat("cannot open config ", path));
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw ConfigError(detail::cat(path, ": ", e.what()));
  }
  if (!j.is_object())
    throw ConfigError(detail::cat(path, ": config must be a JSON object"));
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items())
    assign_json(cfg, find_field(key), value);
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  const Field& f = find_field(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = value;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") cfg.*member = true;
          else if (value == "false" || value == "0") cfg.*member = false;
          else
            throw ConfigError(detail::cat("config key '", key,
                                          "' wants a boolean, got '", value,
                                          "'"));
        } else if constexpr (std::is_same_v<T, std::size_t>) {
          char* end = nullptr;
          const auto v = std::strtoull(value.c_str(), &end, 10);
          if (value.empty() || end != value.c_str() + value.size())
            throw ConfigError(detail::cat("config key '", key,
                                          "' wants a nonnegative integer, got '",
                                          value, "'"));
          cfg.*member = std::size_t(v);
        } else {
          char* end = nullptr;
          const double v = std::strtod(value.c_str(), &end);
          if (value.empty() || end != value.c_str() + value.size())
            throw ConfigError(detail::cat("config key '", key,
                                          "' wants a number, got '", value,
                                          "'"));
          cfg.*member = v;
        }
      },
      f.ref);
}

std::string config_json(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump();
}

std::unique_ptr<Task> make_task(const ExperimentConfig& cfg) {
  const std::string& t = cfg.task;
  if (t == "copy" || t == "copy-var" || t == "ablate" || t == "trace" ||
      t == "sweep-p" || t == "sweep-T") {
    CopyTaskConfig copy;
    copy.alphabet = cfg.copy_alphabet;
    copy.payload = cfg.copy_payload;
    copy.delay = cfg.T;
    copy.delay_max = t == "copy-var" ? cfg.T_max : 0;
    return std::make_unique<CopyTask>(copy, val_seed(cfg),
                                      cfg.val_sequences ? cfg.val_sequences
                                                        : 320);
  }
  if (t == "freq") {
    FreqTaskConfig freq;
    if (cfg.freq_sampling == "sync_1") freq.sampling = FreqSampling::sync_1;
    else if (cfg.freq_sampling == "sync_01") freq.sampling = FreqSampling::sync_01;
    else if (cfg.freq_sampling == "async") freq.sampling = FreqSampling::async;
    else
      throw ConfigError(detail::cat("unknown freq_sampling '",
                                    cfg.freq_sampling, "'"));
    freq.include_time = cfg.include_time;
    return std::make_unique<FreqTask>(freq, val_seed(cfg),
                                      cfg.val_sequences ? cfg.val_sequences
                                                        : 500);
  }
  if (t == "mnist") {
    if (cfg.mnist_images.empty() || cfg.mnist_labels.empty())
      throw ConfigError("mnist needs mnist_images and mnist_labels paths");
    MnistData data = load_mnist_idx(cfg.mnist_images, cfg.mnist_labels);
    if (cfg.mnist_valid == 0 || cfg.mnist_valid >= data.count)
      throw ConfigError(detail::cat("mnist_valid must lie in [1, ",
                                    data.count, ")"));
    const std::size_t train =
        cfg.mnist_train ? cfg.mnist_train : data.count - cfg.mnist_valid;
    std::optional<std::uint64_t> perm;
    if (cfg.mnist_permute) perm = cfg.mnist_perm_seed;
    return std::make_unique<MnistTask>(std::move(data), perm, train,
                                       cfg.mnist_valid, cfg.seed);
  }
  if (t == "charlm") {
    const std::string text =
        cfg.charlm_path.empty()
            ? make_synthetic_corpus(cfg.charlm_bytes, kCorpusSeed)
            : read_text_file(cfg.charlm_path);
    return std::make_unique<CharLmTask>(char_corpus(text), cfg.charlm_window,
                                        cfg.seed);
  }
  throw ConfigError(detail::cat("task '", t, "' does not define a dataset"));
}

ModelSpec make_model_spec(const ExperimentConfig& cfg, const Task& task) {
  ModelSpec spec;
  if (cfg.model == "lstm") spec.kind = CellKind::lstm;
  else if (cfg.model == "lstm-chrono") {
    spec.kind = CellKind::lstm;
    spec.chrono_Tmax = cfg.chrono_tmax > 0 ? cfg.chrono_tmax
                                           : double(task_horizon(cfg));
  } else if (cfg.model == "plstm") spec.kind = CellKind::plstm;
  else if (cfg.model == "plstm-dt") {
    spec.kind = CellKind::plstm;
    spec.dt_mode = true;
  } else
    throw ConfigError(detail::cat("unknown model '", cfg.model, "'"));

  if (spec.dt_mode && task.name() != "freq")
    throw ConfigError(detail::cat("model plstm-dt needs timestamps; task '",
                                  task.name(), "' has none"));
  if (cfg.input_gate == "coupled") spec.mode = InputGateMode::coupled;
  else if (cfg.input_gate == "separate") spec.mode = InputGateMode::separate;
  else
    throw ConfigError(detail::cat("unknown input_gate '", cfg.input_gate, "'"));
  spec.input = task.features();
  spec.outputs = task.classes();
  spec.hidden = cfg.hidden;
  spec.eps = cfg.eps;
  if (cfg.fixed_p < 0)
    throw ConfigError(detail::cat("fixed_p must be positive, got ",
                                  cfg.fixed_p, " (0 means learned)"));
  if (cfg.fixed_p > 0) spec.fixed_p = cfg.fixed_p;
  return spec;
}

TrainConfig make_train_config(const ExperimentConfig& cfg, const Task& task) {
  TrainConfig tcfg;
  std::string opt = cfg.optimizer;
  if (opt.empty())
    opt = task.name().rfind("copy", 0) == 0 ? "rmsprop" : "adam";
  if (opt == "adam") tcfg.opt.kind = OptimizerKind::adam;
  else if (opt == "rmsprop") tcfg.opt.kind = OptimizerKind::rmsprop;
  else throw ConfigError(detail::cat("unknown optimizer '", opt, "'"));
  tcfg.opt.lr = cfg.lr;
  if (cfg.clip_norm > 0) tcfg.opt.clip_norm = cfg.clip_norm;
  tcfg.batch_size = cfg.batch_size;
  tcfg.eval_every = cfg.eval_every;
  const std::size_t seqs =
      task.train_sequences() ? task.train_sequences() : cfg.epoch_sequences;
  tcfg.updates_per_epoch = std::max<std::size_t>(1, seqs / cfg.batch_size);
  tcfg.max_updates =
      cfg.epochs ? cfg.epochs * tcfg.updates_per_epoch : cfg.max_updates;
  if (cfg.stop_metric > 0) tcfg.stop_metric = cfg.stop_metric;
  tcfg.stop_patience = cfg.stop_patience;
  tcfg.restore_best = cfg.restore_best;
  tcfg.seed = cfg.seed;
  return tcfg;
}

namespace {

const MetricRow* last_row(const RunRecord& rec, const std::string& split) {
  for (auto it = rec.rows.rbegin(); it != rec.rows.rend(); ++it)
    if (it->split == split) return &*it;
  return nullptr;
}

json run_summary(const RunRecord& rec, const Model& model) {
  json r;
  r["parameter_count"] = parameter_count(model);
  r["updates_done"] = rec.updates_done;
  r["best_metric"] = rec.best_metric;
  r["best_update"] = rec.best_update;
  r["stopped_early"] = rec.stopped_early;
  r["threshold_met"] = rec.threshold_met;
  r["updates_to_stop"] = rec.updates_to_stop;
  if (const MetricRow* v = last_row(rec, "valid")) {
    r["final_valid_loss"] = v->loss;
    r["final_valid_metric"] = v->metric_value;
    r["metric_name"] = v->metric_name;
    r["wallclock_s"] = v->wallclock_s;
  }
  return r;
}

// Random inputs with a target at every step; a small, dense probe for the
// finite-difference harness.
SequenceBatch gradcheck_batch(std::size_t steps, bool with_times,
                              SeededRng& rng) {
  const std::size_t batch = 3, features = 4, classes = 3;
  SequenceBatch b;
  b.batch = batch;
  b.steps = steps;
  b.features = features;
  b.classes = classes;
  b.x.assign(steps, Matrix(batch, features));
  b.targets.assign(steps, std::vector<int>(batch, -1));
  b.mask.assign(steps, std::vector<std::uint8_t>(batch, 1));
  if (with_times) b.times.assign(steps, Vector(batch));
  std::vector<double> clock(batch, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t f = 0; f < features; ++f)
        b.x[t](i, f) = rng.uniform(-1.0, 1.0);
      b.targets[t][i] = int(rng.integer(classes));
      if (with_times) {
        clock[i] += rng.uniform(0.3, 1.7);
        b.times[t][i] = clock[i];
      }
    }
  }
  b.validate();
  return b;
}

// Loads the checkpoint when cfg.resume is set, otherwise builds and (when the
// budget is nonzero) trains a fresh model on the task.
Model obtain_model(const ExperimentConfig& cfg, const Task& task,
                   json& results) {
  if (!cfg.resume.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(cfg.resume);
    results["resumed_from"] = cfg.resume;
    return std::move(loaded.model);
  }
  const ModelSpec spec = make_model_spec(cfg, task);
  SeededRng rng(cfg.seed);
  Model model = build_model(spec, rng);
  if (cfg.max_updates > 0) {
    const RunRecord rec = train(model, task, make_train_config(cfg, task));
    results["pretrain"] = run_summary(rec, model);
  }
  return model;
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg,
                           const std::string& command) {
  if (command != "run" && command != "eval")
    throw ConfigError(detail::cat("unknown command '", command, "'"));
  json summary;
  summary["command"] = command;
  summary["task"] = cfg.task;
  summary["model"] = cfg.model;
  summary["config"] = config_to_json(cfg);
  json results = json::object();
  json artifacts = json::array();
  const bool has_out = !cfg.out.empty();
  if (has_out) ensure_directory(cfg.out);
  const auto artifact = [&](const std::string& name) {
    artifacts.push_back(name);
    return cfg.out + "/" + name;
  };

  if (command == "eval") {
    const auto task = make_task(cfg);
    Model model;
    if (!cfg.resume.empty()) {
      LoadedCheckpoint loaded = load_checkpoint(cfg.resume);
      model = std::move(loaded.model);
      results["resumed_from"] = cfg.resume;
    } else {
      SeededRng rng(cfg.seed);
      model = build_model(make_model_spec(cfg, *task), rng);
    }
    const EvalOutcome ev = eval_model(model, *task, task->validation());
    results["valid_loss"] = ev.loss;
    results["valid_metric"] = ev.metric;
    results["metric_name"] = task->metric_name();
  } else if (cfg.task == "decay-sim") {
    DecayKind kind;
    if (cfg.decay_kind == "power") kind = DecayKind::power;
    else if (cfg.decay_kind == "exponential") kind = DecayKind::exponential;
    else throw ConfigError(detail::cat("unknown decay_kind '", cfg.decay_kind, "'"));
    const DecayCurve curve = simulate_decay(kind, cfg.decay_param, cfg.decay_steps);
    if (has_out) write_decay_csv(artifact("decay.csv"), curve);
    results["steps"] = cfg.decay_steps;
    results["final_value"] = curve.values.back();
  } else if (cfg.task == "gradcheck") {
    ModelSpec spec;
    if (cfg.model == "lstm") spec.kind = CellKind::lstm;
    else if (cfg.model == "lstm-chrono") {
      spec.kind = CellKind::lstm;
      spec.chrono_Tmax =
          cfg.chrono_tmax > 0 ? cfg.chrono_tmax : double(cfg.gradcheck_len);
    } else if (cfg.model == "plstm") spec.kind = CellKind::plstm;
    else if (cfg.model == "plstm-dt") {
      spec.kind = CellKind::plstm;
      spec.dt_mode = true;
    } else throw ConfigError(detail::cat("unknown model '", cfg.model, "'"));
    if (cfg.input_gate == "separate") spec.mode = InputGateMode::separate;
    else if (cfg.input_gate != "coupled")
      throw ConfigError(detail::cat("unknown input_gate '", cfg.input_gate, "'"));
    spec.hidden = cfg.gradcheck_hidden;
    spec.input = 4;
    spec.outputs = 3;
    spec.eps = cfg.eps;
    if (cfg.fixed_p < 0)
      throw ConfigError(detail::cat("fixed_p must be positive, got ",
                                    cfg.fixed_p, " (0 means learned)"));
    if (cfg.fixed_p > 0) spec.fixed_p = cfg.fixed_p;
    SeededRng rng(cfg.seed);
    Model model = build_model(spec, rng);
    const SequenceBatch batch =
        gradcheck_batch(cfg.gradcheck_len, spec.dt_mode, rng);
    const GradCheckReport report =
        grad_check(model, batch, cfg.gradcheck_fd_step);
    json tensors = json::object();
    for (const GradCheckEntry& e : report.tensors)
      tensors[e.tensor] = e.max_rel_err;
    results["tensors"] = std::move(tensors);
    results["max_rel_err"] = report.max_rel_err;
    results["tolerance"] = cfg.gradcheck_tol;
    results["pass"] = report.pass(cfg.gradcheck_tol);
    if (!report.pass(cfg.gradcheck_tol))
      throw NumericError(detail::cat("gradient check failed: max rel err ",
                                     report.max_rel_err, " > ",
                                     cfg.gradcheck_tol));
  } else if (cfg.task == "trace" || cfg.task == "ablate") {
    const auto task = make_task(cfg);
    Model model = obtain_model(cfg, *task, results);
    if (model.kind != CellKind::plstm)
      throw ConfigError(detail::cat(cfg.task, " needs a power-law model"));
    CopyTaskConfig probe_cfg;
    probe_cfg.alphabet = cfg.copy_alphabet;
    probe_cfg.payload = cfg.copy_payload;
    probe_cfg.delay = cfg.T;
    SeededRng probe_rng(val_seed(cfg) + 1);
    const SequenceBatch probe = gen_copy_batch(probe_cfg, 1, probe_rng);
    const ResetTrace trace = trace_reference_times(model, probe);
    const std::vector<std::size_t> later =
        find_later_reset_units(trace, cfg.copy_payload, cfg.T);
    const PStats stats = p_distribution_stats(model, later);
    results["later_reset_units"] = later;
    results["later_reset_fraction"] =
        double(later.size()) / double(model.hidden());
    results["p_mean"] = stats.mean;
    results["p_later_reset_mean"] = stats.later_reset_mean;
    results["p_histogram"] = stats.histogram;
    if (cfg.task == "trace") {
      if (has_out) write_trace_csv(artifact("trace.csv"), trace);
    } else {
      std::vector<AblationCsvRow> rows;
      json curves = json::object();
      for (const AblationPolicy policy :
           {AblationPolicy::random, AblationPolicy::later_reset_first}) {
        SeededRng arng(val_seed(cfg) + 2);
        const AblationReport report = ablate_and_eval(
            model, *task, policy, later, cfg.ablate_group, cfg.ablate_total,
            arng);
        json curve = json::array();
        for (const AblationRow& r : report.rows) {
          rows.push_back({r.n_ablated, policy_name(policy), r.accuracy,
                          cfg.seed});
          curve.push_back({{"n_ablated", r.n_ablated},
                           {"accuracy", r.accuracy}});
        }
        curves[policy_name(policy)] = std::move(curve);
      }
      results["curves"] = std::move(curves);
      if (has_out) write_ablation_csv(artifact("ablation.csv"), rows);
    }
  } else if (cfg.task == "sweep-T") {
    const auto task = make_task(cfg);
    Model model = obtain_model(cfg, *task, results);
    CopyTaskConfig base;
    base.alphabet = cfg.copy_alphabet;
    base.payload = cfg.copy_payload;
    base.delay = cfg.T;
    std::vector<std::size_t> delays;
    for (double v : parse_list(cfg.sweep_Ts, "sweep_Ts")) {
      if (v < 1 || v != double(std::size_t(v)))
        throw ConfigError(detail::cat("sweep_Ts entry ", v,
                                      " is not a positive integer"));
      delays.push_back(std::size_t(v));
    }
    const auto rows = generalization_sweep(
        model, base, delays, cfg.val_sequences ? cfg.val_sequences : 320,
        val_seed(cfg));
    json table = json::array();
    std::vector<std::pair<double, double>> csv_rows;
    for (const auto& [T, acc] : rows) {
      table.push_back({{"T", T}, {"accuracy", acc}});
      csv_rows.emplace_back(double(T), acc);
    }
    results["sweep"] = std::move(table);
    if (has_out)
      write_sweep_csv(artifact("sweep_T.csv"), "T", "accuracy", csv_rows);
  } else if (cfg.task == "sweep-p") {
    const auto task = make_task(cfg);
    const ModelSpec base = make_model_spec(cfg, *task);
    const TrainConfig tcfg = make_train_config(cfg, *task);
    const std::vector<double> ps = parse_list(cfg.sweep_ps, "sweep_ps");
    const auto sweep = fixed_p_sweep(base, *task, tcfg, ps, cfg.seed);
    json table = json::array();
    std::vector<std::pair<double, double>> csv_rows;
    for (const FixedPResult& r : sweep) {
      table.push_back({{"p", r.p},
                       {"reached", r.reached},
                       {"updates_to_threshold", r.updates_to_threshold},
                       {"best_metric", r.best_metric}});
      csv_rows.emplace_back(r.p, double(r.updates_to_threshold));
    }
    results["sweep"] = std::move(table);
    if (has_out)
      write_sweep_csv(artifact("sweep_p.csv"), "p", "updates_to_threshold",
                      csv_rows);
  } else {
    // Training run on a dataset task.
    const auto task = make_task(cfg);
    const TrainConfig tcfg = make_train_config(cfg, *task);
    ModelSpec spec;
    Model model;
    std::unique_ptr<Optimizer> opt;
    SeededRng data_rng(tcfg.seed);
    std::size_t base = 0;
    if (!cfg.resume.empty()) {
      LoadedCheckpoint loaded = load_checkpoint(cfg.resume);
      spec = loaded.spec;
      model = std::move(loaded.model);
      opt = std::make_unique<Optimizer>(
          loaded.opt_config ? *loaded.opt_config : tcfg.opt, model);
      if (loaded.opt_config) restore_optimizer(*opt, loaded);
      if (!loaded.rng_state.empty()) data_rng.set_state(loaded.rng_state);
      base = loaded.opt_updates;
      results["resumed_from"] = cfg.resume;
    } else {
      spec = make_model_spec(cfg, *task);
      SeededRng init_rng(cfg.seed);
      model = build_model(spec, init_rng);
      opt = std::make_unique<Optimizer>(tcfg.opt, model);
    }
    const RunRecord rec = train(model, *task, tcfg, *opt, data_rng, base);
    results = run_summary(rec, model);
    if (!cfg.resume.empty()) results["resumed_from"] = cfg.resume;
    if (has_out) {
      write_metrics_csv(artifact("metrics.csv"), rec.rows);
      save_checkpoint(artifact("checkpoint.json"), model, spec, opt.get(),
                      data_rng.state_string(), config_json(cfg));
    }
    if (!cfg.checkpoint.empty())
      save_checkpoint(cfg.checkpoint, model, spec, opt.get(),
                      data_rng.state_string(), config_json(cfg));
  }

  summary["results"] = std::move(results);
  if (has_out) {
    summary["artifacts"] = std::move(artifacts);
    write_text_file(cfg.out + "/summary.json", summary.dump(1) + "\n");
  }
  return summary.dump(1) + "\n";
}

}  // namespace plstm
