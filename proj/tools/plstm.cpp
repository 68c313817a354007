// Command-line front end: maps subcommands and flags onto ExperimentConfig
// keys and prints the run summary. Exit codes: 0 ok, 2 config error, 3 data
// format error, 4 numeric abort, 1 anything else.

#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "plstm/errors.hpp"
#include "plstm/experiment.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::string task;                 // positional; empty keeps the config value
  std::vector<std::string> sets;    // raw key=value overrides
  std::vector<std::pair<std::string, std::string>> flags;  // ordered overrides
};

void add_common(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "flat JSON config file");
  sub->add_option("--set", st.sets, "extra key=value override (any config key)");
  const auto opt = [&st, sub](const char* flag, const char* key,
                              const char* help) {
    sub->add_option_function<std::string>(
        flag,
        [&st, key](const std::string& v) { st.flags.emplace_back(key, v); },
        help);
  };
  opt("--seed", "seed", "rng seed");
  opt("--out", "out", "artifact directory");
  opt("--model", "model", "lstm, lstm-chrono, plstm, plstm-dt");
  opt("--hidden", "hidden", "hidden units");
  opt("--eps", "eps", "forget-gate denominator stabilizer");
  opt("--fixed-p", "fixed_p", "freeze the decay exponent (> 0)");
  opt("--chrono-tmax", "chrono_tmax", "chrono bias horizon (0: task horizon)");
  opt("--input-gate", "input_gate", "coupled or separate");
  opt("--T", "T", "copy delay");
  opt("--T-max", "T_max", "copy-var upper delay");
  opt("--payload", "copy_payload", "copy payload length");
  opt("--alphabet", "copy_alphabet", "copy alphabet size");
  opt("--freq-sampling", "freq_sampling", "sync_1, sync_01, async");
  opt("--optimizer", "optimizer", "adam or rmsprop");
  opt("--lr", "lr", "learning rate");
  opt("--clip-norm", "clip_norm", "global gradient-norm clip (0: off)");
  opt("--batch-size", "batch_size", "sequences per update");
  opt("--max-updates", "max_updates", "training budget");
  opt("--eval-every", "eval_every", "validation cadence in updates");
  opt("--epochs", "epochs", "budget in epochs (overrides max-updates)");
  opt("--stop-metric", "stop_metric", "early-stop threshold (0: off)");
  opt("--checkpoint", "checkpoint", "extra checkpoint save path");
  opt("--resume", "resume", "checkpoint to continue from");
  sub->add_flag_callback(
      "--include-time",
      [&st] { st.flags.emplace_back("include_time", "true"); },
      "append the raw timestamp as an input feature (freq)");
}

plstm::ExperimentConfig build_config(const CliState& st) {
  plstm::ExperimentConfig cfg;
  if (!st.config_path.empty()) cfg = plstm::load_config(st.config_path);
  if (!st.task.empty()) plstm::apply_override(cfg, "task", st.task);
  for (const auto& [key, value] : st.flags)
    plstm::apply_override(cfg, key, value);
  for (const std::string& kv : st.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw plstm::ConfigError("--set wants key=value, got '" + kv + "'");
    plstm::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power-law forget gate recurrent network workbench"};
  app.require_subcommand(1);

  CliState st;
  std::string command = "run";
  std::string sweep_kind;

  CLI::App* run = app.add_subcommand(
      "run", "train a model, or drive a simulation/sweep task");
  run->add_option("task", st.task,
                  "copy, copy-var, freq, mnist, charlm, decay-sim, gradcheck, "
                  "ablate, trace, sweep-p, sweep-T");
  add_common(run, st);

  CLI::App* ev = app.add_subcommand(
      "eval", "score a fresh or resumed model on the validation split");
  ev->add_option("task", st.task, "dataset task");
  add_common(ev, st);
  ev->callback([&command] { command = "eval"; });

  CLI::App* gc =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  add_common(gc, st);
  gc->callback([&st] { st.task = "gradcheck"; });

  CLI::App* ab = app.add_subcommand(
      "ablate", "accuracy under growing unit ablation (copy task)");
  add_common(ab, st);
  ab->callback([&st] { st.task = "ablate"; });

  CLI::App* tr = app.add_subcommand(
      "trace", "reference-time trace of one copy probe");
  add_common(tr, st);
  tr->callback([&st] { st.task = "trace"; });

  CLI::App* sw = app.add_subcommand("sweep", "exponent or delay sweep");
  sw->add_option("kind", sweep_kind, "p or T")->required();
  add_common(sw, st);
  sw->callback([&st, &sweep_kind] {
    if (sweep_kind == "p") st.task = "sweep-p";
    else if (sweep_kind == "T") st.task = "sweep-T";
    else throw CLI::ValidationError("sweep kind must be p or T");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const plstm::ExperimentConfig cfg = build_config(st);
    std::cout << plstm::run_experiment(cfg, command);
    return 0;
  } catch (const plstm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const plstm::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const plstm::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const plstm::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
