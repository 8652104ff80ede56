#include "svl/config.hpp"

#include <fstream>
#include <set>

#include "svl/error.hpp"

namespace svl {

namespace {

using nlohmann::json;

void allow_only(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw Error(err::kConfig, where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw Error(err::kConfig, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(err::kConfig, where + "." + key + " has the wrong type");
  }
}

NeuronConfig neuron_from(const json& j, NeuronConfig n, bool with_d_max) {
  if (with_d_max)
    allow_only(j, "neuron", {"beta", "theta", "d_max", "a", "mode"});
  else
    allow_only(j, "neuron", {"beta", "theta", "a", "mode"});
  read(j, "beta", n.beta, "neuron");
  read(j, "theta", n.theta, "neuron");
  if (with_d_max) read(j, "d_max", n.d_max, "neuron");
  read(j, "a", n.a, "neuron");
  if (j.contains("mode")) {
    std::string mode;
    read(j, "mode", mode, "neuron");
    if (mode == "integer")
      n.mode = FireMode::integer;
    else if (mode == "heaviside")
      n.mode = FireMode::heaviside;
    else
      throw Error(err::kConfig, "neuron.mode must be 'integer' or 'heaviside'");
  }
  return n;
}

void encoder_fields(const json& j, EncoderConfig& e) {
  std::string variant = to_string(e.variant);
  read(j, "variant", variant, "encoder");
  e.variant = encoder_variant_from(variant);
  read(j, "n_centers", e.n_centers, "encoder");
  read(j, "k", e.k, "encoder");
  read(j, "dims", e.dims, "encoder");
  read(j, "depth", e.depth, "encoder");
  read(j, "heads", e.heads, "encoder");
  read(j, "embed_dim", e.embed_dim, "encoder");
  read(j, "in_features", e.in_features, "encoder");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path fp(p);
  return fp.is_absolute() ? fp : base / fp;
}

}  // namespace

json encoder_to_json(const EncoderConfig& cfg) {
  return json{{"variant", to_string(cfg.variant)},
              {"n_centers", cfg.n_centers},
              {"k", cfg.k},
              {"dims", cfg.dims},
              {"depth", cfg.depth},
              {"heads", cfg.heads},
              {"embed_dim", cfg.embed_dim},
              {"timesteps", cfg.timesteps},
              {"in_features", cfg.in_features},
              {"neuron",
               {{"beta", cfg.neuron.beta},
                {"theta", cfg.neuron.theta},
                {"d_max", cfg.neuron.d_max},
                {"a", cfg.neuron.a},
                {"mode", cfg.neuron.mode == FireMode::integer ? "integer" : "heaviside"}}}};
}

EncoderConfig encoder_from_json(const json& j) {
  allow_only(j, "encoder", {"variant", "n_centers", "k", "dims", "depth", "heads", "embed_dim",
                            "timesteps", "in_features", "neuron"});
  EncoderConfig e;
  encoder_fields(j, e);
  read(j, "timesteps", e.timesteps, "encoder");
  if (j.contains("neuron")) e.neuron = neuron_from(j.at("neuron"), e.neuron, true);
  e.validate();
  return e;
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  allow_only(j, "config", {"seed", "encoder", "neuron", "loss", "train", "data", "output"});
  RunConfig rc;
  if (!j.contains("seed")) throw Error(err::kConfig, "config must set 'seed'");
  read(j, "seed", rc.seed, "config");
  if (!j.contains("output")) throw Error(err::kConfig, "config must set 'output'");
  std::string output;
  read(j, "output", output, "config");
  rc.output = resolve(base_dir, output);

  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    allow_only(e, "encoder",
               {"variant", "n_centers", "k", "dims", "depth", "heads", "embed_dim", "in_features"});
    encoder_fields(e, rc.encoder);
  }
  if (j.contains("neuron")) rc.encoder.neuron = neuron_from(j.at("neuron"), rc.encoder.neuron, false);

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    allow_only(l, "loss", {"lambda", "init_log_temp", "scale_min", "scale_max"});
    if (l.contains("lambda")) {
      std::vector<double> lam;
      read(l, "lambda", lam, "loss");
      if (lam.size() != 3) throw Error(err::kConfig, "loss.lambda must hold three weights");
      rc.loss.lambda1 = lam[0];
      rc.loss.lambda2 = lam[1];
      rc.loss.lambda3 = lam[2];
    }
    read(l, "init_log_temp", rc.loss.init_log_temp, "loss");
    read(l, "scale_min", rc.loss.scale_min, "loss");
    read(l, "scale_max", rc.loss.scale_max, "loss");
  }

  rc.train.seed = rc.seed;
  if (j.contains("train")) {
    const json& t = j.at("train");
    allow_only(t, "train", {"epochs", "batch_size", "base_lr", "weight_decay", "warmup_epochs",
                            "schedule", "timesteps", "d_max", "clip_norm", "freeze_encoder"});
    read(t, "epochs", rc.train.epochs, "train");
    read(t, "batch_size", rc.train.batch_size, "train");
    read(t, "base_lr", rc.train.base_lr, "train");
    read(t, "weight_decay", rc.train.weight_decay, "train");
    read(t, "warmup_epochs", rc.train.warmup_epochs, "train");
    if (t.contains("schedule")) {
      std::string s;
      read(t, "schedule", s, "train");
      rc.train.schedule = schedule_from(s);
    }
    read(t, "timesteps", rc.train.timesteps, "train");
    read(t, "d_max", rc.train.d_max, "train");
    read(t, "clip_norm", rc.train.clip_norm, "train");
    read(t, "freeze_encoder", rc.train.freeze_encoder, "train");
  }
  rc.encoder.timesteps = rc.train.timesteps;
  rc.encoder.neuron.d_max = rc.train.d_max;

  if (j.contains("data")) {
    const json& d = j.at("data");
    allow_only(d, "data", {"train", "test", "labels"});
    for (auto [key, slot] : {std::pair{"train", &rc.data.train}, std::pair{"test", &rc.data.test},
                             std::pair{"labels", &rc.data.labels}}) {
      std::string p;
      read(d, key, p, "data");
      if (!p.empty()) *slot = resolve(base_dir, p);
    }
  }

  rc.encoder.validate();
  rc.loss.validate();
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(err::kConfig, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(err::kConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

std::vector<std::string> load_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(err::kIo, "cannot open " + path.string());
  try {
    return json::parse(in).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(err::kParse, path.string() + ": expected an array of label strings");
  }
}

}  // namespace svl
