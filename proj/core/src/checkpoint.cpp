#include "plstm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "plstm/errors.hpp"

namespace plstm {

namespace {

using nlohmann::json;

constexpr int kVersion = 1;

std::string encode_doubles(const double* data, std::size_t size) {
  std::string hex;
  hex.resize(size * 16);
  char buf[17];
  for (std::size_t i = 0; i < size; ++i) {
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(data[i])));
    std::copy(buf, buf + 16, hex.begin() + 16 * i);
  }
  return hex;
}

void decode_doubles(const std::string& hex, const std::string& name,
                    double* data, std::size_t size) {
  if (hex.size() != size * 16)
    throw CheckpointError(detail::cat("tensor ", name, " holds ",
                                      hex.size() / 16, " values, model wants ",
                                      size));
  char buf[17];
  buf[16] = '\0';
  for (std::size_t i = 0; i < size; ++i) {
    std::copy(hex.begin() + 16 * i, hex.begin() + 16 * (i + 1), buf);
    char* end = nullptr;
    const auto bits = std::strtoull(buf, &end, 16);
    if (end != buf + 16)
      throw CheckpointError(detail::cat("tensor ", name,
                                        " holds a malformed hex value"));
    data[i] = std::bit_cast<double>(static_cast<std::uint64_t>(bits));
  }
}

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["kind"] = spec.kind == CellKind::lstm ? "lstm" : "plstm";
  j["dt_mode"] = spec.dt_mode;
  j["input"] = spec.input;
  j["hidden"] = spec.hidden;
  j["outputs"] = spec.outputs;
  j["mode"] = spec.mode == InputGateMode::coupled ? "coupled" : "separate";
  j["eps"] = spec.eps;
  j["chrono_tmax"] = spec.chrono_Tmax ? json(*spec.chrono_Tmax) : json(nullptr);
  j["fixed_p"] = spec.fixed_p ? json(*spec.fixed_p) : json(nullptr);
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lstm") spec.kind = CellKind::lstm;
  else if (kind == "plstm") spec.kind = CellKind::plstm;
  else throw CheckpointError(detail::cat("unknown cell kind '", kind, "'"));
  spec.dt_mode = j.at("dt_mode").get<bool>();
  spec.input = j.at("input").get<std::size_t>();
  spec.hidden = j.at("hidden").get<std::size_t>();
  spec.outputs = j.at("outputs").get<std::size_t>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "coupled") spec.mode = InputGateMode::coupled;
  else if (mode == "separate") spec.mode = InputGateMode::separate;
  else throw CheckpointError(detail::cat("unknown gate mode '", mode, "'"));
  spec.eps = j.at("eps").get<double>();
  if (!j.at("chrono_tmax").is_null())
    spec.chrono_Tmax = j.at("chrono_tmax").get<double>();
  if (!j.at("fixed_p").is_null())
    spec.fixed_p = j.at("fixed_p").get<double>();
  return spec;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const ModelSpec& spec, const Optimizer* opt,
                     const std::string& rng_state,
                     const std::string& config_json) {
  json j;
  j["version"] = kVersion;
  j["model"] = spec_to_json(spec);
  json tensors = json::object();
  for (const TensorRef& t : named_tensors(model))
    tensors[t.name] = encode_doubles(t.data, t.size);
  j["tensors"] = std::move(tensors);
  if (opt) {
    const OptimizerConfig& cfg = opt->config();
    json oj;
    oj["kind"] = cfg.kind == OptimizerKind::adam ? "adam" : "rmsprop";
    oj["lr"] = cfg.lr;
    oj["beta1"] = cfg.beta1;
    oj["beta2"] = cfg.beta2;
    oj["eps"] = cfg.eps;
    oj["rho"] = cfg.rho;
    oj["delta"] = cfg.delta;
    oj["clip_norm"] = cfg.clip_norm ? json(*cfg.clip_norm) : json(nullptr);
    oj["updates"] = opt->updates();
    json slots = json::object();
    for (const OptimSlot& s : opt->slots()) {
      json sj;
      sj["m1"] = encode_doubles(s.m1.data(), s.m1.size());
      sj["m2"] = encode_doubles(s.m2.data(), s.m2.size());
      slots[s.name] = std::move(sj);
    }
    oj["slots"] = std::move(slots);
    j["optimizer"] = std::move(oj);
  }
  if (!rng_state.empty()) j["rng_state"] = rng_state;
  if (!config_json.empty()) j["config"] = config_json;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw CheckpointError(detail::cat("cannot open ", tmp));
    file << j.dump(1) << '\n';
    file.flush();
    if (!file) throw CheckpointError(detail::cat("short write to ", tmp));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw CheckpointError(detail::cat("cannot move ", tmp, " to ", path, ": ",
                                      ec.message()));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError(detail::cat("cannot open ", path));
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw CheckpointError(detail::cat(path, ": ", e.what()));
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kVersion)
      throw CheckpointError(detail::cat("unsupported checkpoint version ",
                                        version));
    LoadedCheckpoint out;
    out.spec = spec_from_json(j.at("model"));
    SeededRng rng(0);  // every tensor is overwritten below
    out.model = build_model(out.spec, rng);
    const json& tensors = j.at("tensors");
    for (const TensorRef& t : named_tensors(out.model)) {
      if (!tensors.contains(t.name))
        throw CheckpointError(detail::cat("tensor ", t.name, " missing"));
      decode_doubles(tensors.at(t.name).get<std::string>(), t.name, t.data,
                     t.size);
    }
    if (j.contains("optimizer")) {
      const json& oj = j.at("optimizer");
      OptimizerConfig cfg;
      const std::string kind = oj.at("kind").get<std::string>();
      if (kind == "adam") cfg.kind = OptimizerKind::adam;
      else if (kind == "rmsprop") cfg.kind = OptimizerKind::rmsprop;
      else throw CheckpointError(detail::cat("unknown optimizer '", kind, "'"));
      cfg.lr = oj.at("lr").get<double>();
      cfg.beta1 = oj.at("beta1").get<double>();
      cfg.beta2 = oj.at("beta2").get<double>();
      cfg.eps = oj.at("eps").get<double>();
      cfg.rho = oj.at("rho").get<double>();
      cfg.delta = oj.at("delta").get<double>();
      if (!oj.at("clip_norm").is_null())
        cfg.clip_norm = oj.at("clip_norm").get<double>();
      out.opt_config = cfg;
      out.opt_updates = oj.at("updates").get<std::size_t>();
      const json& slots = oj.at("slots");
      for (const TensorRef& t : named_tensors(out.model)) {
        if (!slots.contains(t.name))
          throw CheckpointError(detail::cat("optimizer slot ", t.name,
                                            " missing"));
        const json& sj = slots.at(t.name);
        OptimSlot slot;
        slot.name = t.name;
        const std::string m1 = sj.at("m1").get<std::string>();
        const std::string m2 = sj.at("m2").get<std::string>();
        slot.m1.resize(m1.size() / 16);
        slot.m2.resize(m2.size() / 16);
        decode_doubles(m1, t.name, slot.m1.data(), slot.m1.size());
        decode_doubles(m2, t.name, slot.m2.data(), slot.m2.size());
        out.opt_slots.push_back(std::move(slot));
      }
    }
    if (j.contains("rng_state"))
      out.rng_state = j.at("rng_state").get<std::string>();
    if (j.contains("config")) out.config_json = j.at("config").get<std::string>();
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError(detail::cat(path, ": ", e.what()));
  }
}

void restore_optimizer(Optimizer& opt, const LoadedCheckpoint& loaded) {
  if (!loaded.opt_config)
    throw CheckpointError("checkpoint holds no optimizer state");
  if (loaded.opt_config->kind != opt.config().kind)
    throw CheckpointError("optimizer kind differs from the checkpoint");
  auto& slots = opt.slots();
  if (slots.size() != loaded.opt_slots.size())
    throw CheckpointError(detail::cat("optimizer has ", slots.size(),
                                      " slots, checkpoint holds ",
                                      loaded.opt_slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const OptimSlot& src = loaded.opt_slots[i];
    if (slots[i].name != src.name)
      throw CheckpointError(detail::cat("slot ", i, " is ", slots[i].name,
                                        ", checkpoint holds ", src.name));
    if (slots[i].m1.size() != src.m1.size())
      throw CheckpointError(detail::cat("slot ", src.name, " size mismatch"));
    slots[i].m1 = src.m1;
    // rmsprop slots carry no second moment; adam requires it.
    if (!slots[i].m2.empty() && slots[i].m2.size() != src.m2.size())
      throw CheckpointError(detail::cat("slot ", src.name, " size mismatch"));
    slots[i].m2 = src.m2;
  }
  opt.set_updates(loaded.opt_updates);
}

}  // namespace plstm
