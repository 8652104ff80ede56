#include "svl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include "svl/config.hpp"
#include "svl/error.hpp"
#include "svl/parallel.hpp"

namespace svl {

const char* to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "onecycle"; }

Schedule schedule_from(const std::string& name) {
  if (name == "cosine") return Schedule::cosine;
  if (name == "onecycle") return Schedule::onecycle;
  throw Error(err::kConfig, "unknown schedule '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw Error(err::kConfig, "epochs must be positive");
  if (batch_size == 0) throw Error(err::kConfig, "batch_size must be positive");
  if (!(base_lr > 0.0)) throw Error(err::kConfig, "base_lr must be positive");
  if (weight_decay < 0.0) throw Error(err::kConfig, "weight_decay must be non-negative");
  if (warmup_epochs < 0.0 || warmup_epochs >= static_cast<double>(epochs))
    throw Error(err::kConfig, "warmup_epochs must lie in [0, epochs)");
  if (timesteps == 0) throw Error(err::kConfig, "timesteps must be positive");
  if (d_max < 1) throw Error(err::kConfig, "d_max must be at least 1");
  if (!(clip_norm > 0.0)) throw Error(err::kConfig, "clip_norm must be positive");
}

double lr_at(double epoch, const TrainConfig& cfg) {
  const double total = static_cast<double>(cfg.epochs);
  epoch = std::clamp(epoch, 0.0, total);
  if (epoch < cfg.warmup_epochs) return cfg.base_lr * epoch / cfg.warmup_epochs;
  const double phase = (epoch - cfg.warmup_epochs) / (total - cfg.warmup_epochs);
  return 0.5 * cfg.base_lr * (1.0 + std::cos(std::numbers::pi * phase));
}

void adamw_step(ParamMap& params, const GradMap& grads, AdamState& state, double lr,
                double weight_decay, const AdamConfig& adam) {
  for (const auto& [name, g] : grads) {
    for (double x : g)
      if (!std::isfinite(x))
        throw Error(err::kNumeric, "non-finite gradient for " + name + " at optimizer step " +
                                       std::to_string(state.step + 1));
    auto it = params.find(name);
    if (it == params.end()) throw Error(err::kShape, "gradient for unknown parameter " + name);
    if (g.size() != it->second.size())
      throw Error(err::kShape, "gradient for " + name + " has " + std::to_string(g.size()) +
                                   " entries, parameter has " + std::to_string(it->second.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(adam.beta1, t);
  const double bc2 = 1.0 - std::pow(adam.beta2, t);
  for (auto& [name, p] : params) {
    const std::size_t n = p.size();
    auto& m = state.m[name];
    auto& v = state.v[name];
    m.resize(n, 0.0);
    v.resize(n, 0.0);
    auto git = grads.find(name);
    const double decay = p.rank() == 2 ? weight_decay : 0.0;
    std::vector<double> w = p.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = git == grads.end() ? 0.0 : git->second[i];
      w[i] *= 1.0 - lr * decay;
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam.eps);
    }
    p = Tensor(p.shape(), std::move(w));
  }
}

double clip_global_norm(GradMap& grads, double max_norm) {
  double ss = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g) ss += x * x;
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& x : g) x *= f;
  }
  return norm;
}

Checkpoint new_checkpoint(const EncoderConfig& encoder, const LossConfig& loss, std::uint64_t seed) {
  loss.validate();
  Checkpoint ck;
  ck.encoder = encoder;
  ck.params = init_encoder(encoder, seed);
  ck.log_temp = loss.init_log_temp;
  return ck;
}

namespace {

constexpr const char* kLogTemp = "log_temp";

void apply_run_shape(EncoderConfig& enc, const TrainConfig& cfg) {
  enc.timesteps = cfg.timesteps;
  enc.neuron.d_max = cfg.d_max;
  enc.validate();
}

// Epoch-seeded shuffle so a resumed run sees the same batches.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, const TrainConfig& cfg,
                                                    std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += cfg.batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + cfg.batch_size)));
  return batches;
}

void accumulate(GradMap& into, const GradMap& from) {
  for (const auto& [name, g] : from) {
    auto& dst = into[name];
    if (dst.empty()) dst.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

GradMap collect(const Gradients& g, const EncoderParams& leaves) {
  GradMap out;
  for (const auto& [name, t] : leaves.tensors)
    if (const auto* v = g.find(t)) out[name] = *v;
  return out;
}

Tensor rows_tensor(const std::vector<const std::vector<double>*>& rows, std::size_t c) {
  std::vector<double> v;
  v.reserve(rows.size() * c);
  for (const auto* r : rows) {
    if (r->size() != c)
      throw Error(err::kDim, "embedding width " + std::to_string(r->size()) +
                                 " does not match encoder width " + std::to_string(c));
    v.insert(v.end(), r->begin(), r->end());
  }
  return Tensor({rows.size(), c}, std::move(v));
}

struct StepLoss {
  double total, nce_text, nce_image, mse;
};

StepLoss pretrain_step(const Dataset& data, const std::vector<std::size_t>& batch, Checkpoint& ck,
                       const LossConfig& loss, const TrainConfig& cfg, double lr) {
  const std::size_t b = batch.size(), c = ck.encoder.embed_dim;
  const EncoderParams leaves = trainable(ck.params);

  std::vector<Tape> tapes(b);
  std::vector<std::optional<Tensor>> emb(b);
  parallel_for(b, [&](std::size_t i) {
    Tape::Scope scope(tapes[i]);
    emb[i] = embedding(encode(data.samples[batch[i]].cloud, leaves, ck.encoder));
  });

  std::vector<double> stacked;
  stacked.reserve(b * c);
  std::vector<const std::vector<double>*> text, image;
  for (std::size_t i = 0; i < b; ++i) {
    stacked.insert(stacked.end(), emb[i]->values().begin(), emb[i]->values().end());
    text.push_back(&data.samples[batch[i]].text);
    image.push_back(&data.samples[batch[i]].image);
  }
  const Tensor features({b, c}, std::move(stacked), true);
  const Tensor rho = Tensor::scalar(ck.log_temp, true);
  Tape loss_tape;
  std::optional<MtaLoss> l;
  {
    Tape::Scope scope(loss_tape);
    l = mta_total({features, rows_tensor(text, c), rows_tensor(image, c)}, loss, rho);
  }
  const Gradients lg = loss_tape.backward(l->total);
  const std::vector<double> d_features = lg.get(features);

  std::vector<GradMap> per_sample(b);
  parallel_for(b, [&](std::size_t i) {
    const Tensor upstream({c}, std::vector<double>(d_features.begin() + static_cast<std::ptrdiff_t>(i * c),
                                                   d_features.begin() + static_cast<std::ptrdiff_t>((i + 1) * c)));
    std::optional<Tensor> surrogate;
    {
      Tape::Scope scope(tapes[i]);
      surrogate = sum_all(mul(*emb[i], upstream));
    }
    per_sample[i] = collect(tapes[i].backward(*surrogate), leaves);
    tapes[i].clear();
  });

  GradMap grads;
  for (const auto& g : per_sample) accumulate(grads, g);
  grads[kLogTemp] = lg.get(rho);
  clip_global_norm(grads, cfg.clip_norm);

  ParamMap params = ck.params.tensors;
  params.emplace(kLogTemp, Tensor::scalar(ck.log_temp));
  adamw_step(params, grads, ck.opt, lr, cfg.weight_decay);
  ck.log_temp = loss.clamp_log_temp(params.at(kLogTemp).item());
  params.erase(kLogTemp);
  ck.params.tensors = std::move(params);
  return {l->total.item(), l->nce_text.item(), l->nce_image.item(), l->mse.item()};
}

}  // namespace

Checkpoint pretrain_loop(const Dataset& data, Checkpoint ck, const LossConfig& loss,
                         const TrainConfig& cfg, std::size_t until) {
  cfg.validate();
  loss.validate();
  if (data.samples.empty()) throw Error(err::kDegenerate, "pretraining needs at least one sample");
  apply_run_shape(ck.encoder, cfg);
  check_params(ck.params, ck.encoder);
  const std::size_t n = data.samples.size();
  const std::size_t last = std::min(until, cfg.epochs);
  for (std::size_t epoch = ck.epoch; epoch < last; ++epoch) {
    const auto batches = epoch_batches(n, cfg, epoch);
    EpochLoss rec;
    rec.epoch = epoch;
    rec.lr = lr_at(static_cast<double>(epoch), cfg);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const double frac = static_cast<double>(epoch) + static_cast<double>(bi) / batches.size();
      const StepLoss s = pretrain_step(data, batches[bi], ck, loss, cfg, lr_at(frac, cfg));
      rec.total += s.total;
      rec.nce_text += s.nce_text;
      rec.nce_image += s.nce_image;
      rec.mse += s.mse;
    }
    const double nb = static_cast<double>(batches.size());
    rec.total /= nb;
    rec.nce_text /= nb;
    rec.nce_image /= nb;
    rec.mse /= nb;
    ck.history.push_back(rec);
    ck.epoch = epoch + 1;
  }
  return ck;
}

namespace {

std::vector<std::size_t> label_indices(const Dataset& data, const std::vector<std::string>& classes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
  std::vector<std::size_t> out;
  for (const Sample& s : data.samples) {
    if (!s.label) throw Error(err::kRange, "sample " + s.id + " has no label");
    auto it = index.find(*s.label);
    if (it == index.end())
      throw Error(err::kRange, "sample " + s.id + ": label '" + *s.label + "' is not in the class set");
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> one_hot(std::size_t k, std::size_t i) {
  std::vector<double> v(k, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

Checkpoint finetune_loop(const Dataset& train, const Dataset* test, Checkpoint ck,
                         const std::vector<std::string>& classes, const TrainConfig& cfg,
                         std::size_t until) {
  cfg.validate();
  if (classes.size() < 2) throw Error(err::kConfig, "fine-tuning needs at least two classes");
  if (train.samples.empty()) throw Error(err::kDegenerate, "fine-tuning needs at least one sample");
  const auto labels = label_indices(train, classes);
  if (test) label_indices(*test, classes);
  apply_run_shape(ck.encoder, cfg);
  check_params(ck.params, ck.encoder);
  const std::size_t k = classes.size(), c = ck.encoder.embed_dim;

  const bool resume = ck.epoch > 0 && ck.head && ck.head->labels == classes;
  if (!resume) {
    ck.head = ClassHead{Tensor::zeros({k, c}), classes};
    ck.opt = AdamState{};
    ck.epoch = 0;
    ck.accuracy.clear();
  }

  // A frozen encoder is deterministic, so its trains are computed once.
  std::vector<std::optional<Tensor>> cached(train.samples.size());
  if (cfg.freeze_encoder)
    parallel_for(train.samples.size(), [&](std::size_t i) {
      cached[i] = encode(train.samples[i].cloud, ck.params, ck.encoder).trains;
    });

  const std::size_t last = std::min(until, cfg.epochs);
  for (std::size_t epoch = ck.epoch; epoch < last; ++epoch) {
    const auto batches = epoch_batches(train.samples.size(), cfg, epoch);
    EpochAccuracy rec;
    rec.epoch = epoch;
    rec.lr = lr_at(static_cast<double>(epoch), cfg);
    std::size_t correct = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const std::size_t b = batch.size();
      const EncoderParams leaves = cfg.freeze_encoder ? ck.params : trainable(ck.params);
      const Tensor head(ck.head->weights.shape(), ck.head->weights.values(), true);
      std::vector<GradMap> per_sample(b);
      std::vector<double> losses(b);
      std::vector<std::size_t> hits(b);
      parallel_for(b, [&](std::size_t i) {
        const std::size_t idx = batch[i];
        Tape tape;
        std::optional<Tensor> ce;
        {
          Tape::Scope scope(tape);
          const Tensor trains =
              cfg.freeze_encoder ? *cached[idx] : encode(train.samples[idx].cloud, leaves, ck.encoder).trains;
          const Tensor logits = classify_head(trains, head);
          hits[i] = argmax(logits.data()) == labels[idx];
          const Tensor picked = sum_all(mul(log_softmax(logits, 0), Tensor({k}, one_hot(k, labels[idx]))));
          ce = scale(picked, -1.0 / static_cast<double>(b));
        }
        const Gradients g = tape.backward(*ce);
        if (!cfg.freeze_encoder) per_sample[i] = collect(g, leaves);
        per_sample[i]["head.w"] = g.get(head);
        losses[i] = ce->item() * static_cast<double>(b);
      });
      GradMap grads;
      for (std::size_t i = 0; i < b; ++i) {
        accumulate(grads, per_sample[i]);
        rec.loss += losses[i];
        correct += hits[i];
      }
      clip_global_norm(grads, cfg.clip_norm);
      ParamMap params;
      if (!cfg.freeze_encoder) params = ck.params.tensors;
      params.emplace("head.w", ck.head->weights);
      const double frac = static_cast<double>(epoch) + static_cast<double>(bi) / batches.size();
      adamw_step(params, grads, ck.opt, lr_at(frac, cfg), cfg.weight_decay);
      ck.head->weights = params.at("head.w");
      params.erase("head.w");
      if (!cfg.freeze_encoder) ck.params.tensors = std::move(params);
    }
    rec.loss /= static_cast<double>(train.samples.size());
    rec.train_accuracy = static_cast<double>(correct) / train.samples.size();
    if (test) rec.test_accuracy = classification_accuracy(*test, ck);
    ck.accuracy.push_back(rec);
    ck.epoch = epoch + 1;
  }
  return ck;
}

double classification_accuracy(const Dataset& data, const Checkpoint& ck) {
  if (!ck.head) throw Error(err::kConfig, "checkpoint has no classification head");
  const auto labels = label_indices(data, ck.head->labels);
  std::vector<std::size_t> hits(data.samples.size());
  parallel_for(data.samples.size(), [&](std::size_t i) {
    const Tensor logits = classify_head(encode(data.samples[i].cloud, ck.params, ck.encoder).trains,
                                        ck.head->weights);
    hits[i] = argmax(logits.data()) == labels[i];
  });
  std::size_t correct = 0;
  for (std::size_t h : hits) correct += h;
  return data.samples.empty() ? 0.0 : static_cast<double>(correct) / data.samples.size();
}

ZeroShotReport evaluate_zeroshot(const Dataset& data, const EncoderParams& params,
                                 const EncoderConfig& encoder, const ZeroShotHead& head) {
  if (head.width() != encoder.embed_dim)
    throw Error(err::kDim, "head width " + std::to_string(head.width()) +
                               " does not match encoder embedding width " +
                               std::to_string(encoder.embed_dim));
  const auto labels = label_indices(data, head.labels());
  ZeroShotReport r;
  r.labels = head.labels();
  r.class_total.assign(head.classes(), 0);
  r.class_correct.assign(head.classes(), 0);
  r.predictions.resize(data.samples.size());
  parallel_for(data.samples.size(), [&](std::size_t i) {
    r.predictions[i] = argmax(zeroshot_logits(encode(data.samples[i].cloud, params, encoder).trains, head).data());
  });
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    r.ids.push_back(data.samples[i].id);
    ++r.class_total[labels[i]];
    ++r.total;
    if (r.predictions[i] == labels[i]) {
      ++r.class_correct[labels[i]];
      ++r.correct;
    }
  }
  return r;
}

std::string zeroshot_json(const ZeroShotReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t k = 0; k < r.labels.size(); ++k)
    per_class.push_back({{"label", r.labels[k]},
                         {"total", r.class_total[k]},
                         {"correct", r.class_correct[k]},
                         {"accuracy", r.class_total[k] ? static_cast<double>(r.class_correct[k]) /
                                                             r.class_total[k]
                                                       : 0.0}});
  nlohmann::json preds = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i)
    preds.push_back({{"id", r.ids[i]}, {"predicted", r.labels[r.predictions[i]]}});
  return nlohmann::json{{"total", r.total},
                        {"correct", r.correct},
                        {"top1", r.top1()},
                        {"per_class", per_class},
                        {"predictions", preds}}
      .dump(2);
}

std::string zeroshot_table(const ZeroShotReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "class" << std::right << std::setw(8) << "total"
      << std::setw(10) << "correct" << std::setw(10) << "acc" << '\n';
  out << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const double acc =
        r.class_total[k] ? static_cast<double>(r.class_correct[k]) / r.class_total[k] : 0.0;
    out << std::left << std::setw(24) << r.labels[k] << std::right << std::setw(8)
        << r.class_total[k] << std::setw(10) << r.class_correct[k] << std::setw(10) << acc << '\n';
  }
  out << "top1 " << r.top1() << " (" << r.correct << "/" << r.total << ")\n";
  return out.str();
}

// ---- checkpoints ----------------------------------------------------------

namespace {

nlohmann::json history_json(const std::vector<EpochLoss>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : h)
    a.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"total", e.total}, {"nce_text", e.nce_text},
                 {"nce_image", e.nce_image}, {"mse", e.mse}});
  return a;
}

nlohmann::json accuracy_json(const std::vector<EpochAccuracy>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : h) {
    nlohmann::json j{{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss},
                     {"train_accuracy", e.train_accuracy}};
    j["test_accuracy"] = e.test_accuracy ? nlohmann::json(*e.test_accuracy) : nlohmann::json();
    a.push_back(j);
  }
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(err::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(err::kParse, path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& dir) {
  fs::create_directories(dir / "params");
  fs::create_directories(dir / "opt");
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [name, t] : ck.params.tensors) {
    save_tensor(dir / "params" / (name + ".svlt"), t);
    names.push_back(name);
  }
  write_text(dir / "manifest.json",
             nlohmann::json{{"encoder", encoder_to_json(ck.encoder)}, {"params", names}}.dump(2) + "\n");

  nlohmann::json moments = nlohmann::json::object();
  for (const auto& [name, m] : ck.opt.m) {
    const std::string mf = "opt/" + name + ".m.svlt", vf = "opt/" + name + ".v.svlt";
    save_tensor(dir / mf, Tensor({m.size()}, m));
    save_tensor(dir / vf, Tensor({m.size()}, ck.opt.v.at(name)));
    moments[name] = {{"m", mf}, {"v", vf}};
  }
  nlohmann::json state{{"epoch", ck.epoch},
                       {"log_temp", ck.log_temp},
                       {"optimizer_step", ck.opt.step},
                       {"moments", moments},
                       {"history", history_json(ck.history)},
                       {"accuracy", accuracy_json(ck.accuracy)}};
  write_text(dir / "train_state.json", state.dump(2) + "\n");

  const fs::path cw = dir / "classifier.svlt", cl = dir / "classifier.labels.json";
  if (ck.head) {
    save_tensor(cw, ck.head->weights);
    write_text(cl, nlohmann::json(ck.head->labels).dump(2) + "\n");
  } else {
    fs::remove(cw);
    fs::remove(cl);
  }
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(err::kIo, "checkpoint directory " + dir.string() + " not found");
  Checkpoint ck;
  const auto manifest = read_json(dir / "manifest.json");
  const auto state = read_json(dir / "train_state.json");
  try {
    ck.encoder = encoder_from_json(manifest.at("encoder"));
    for (const auto& name : manifest.at("params"))
      ck.params.tensors.emplace(name.get<std::string>(),
                                load_tensor(dir / "params" / (name.get<std::string>() + ".svlt")));
    ck.epoch = state.at("epoch").get<std::size_t>();
    ck.log_temp = state.at("log_temp").get<double>();
    ck.opt.step = state.at("optimizer_step").get<std::size_t>();
    for (const auto& [name, files] : state.at("moments").items()) {
      ck.opt.m[name] = load_tensor(dir / files.at("m").get<std::string>()).values();
      ck.opt.v[name] = load_tensor(dir / files.at("v").get<std::string>()).values();
    }
    for (const auto& e : state.at("history"))
      ck.history.push_back({e.at("epoch").get<std::size_t>(), e.at("lr").get<double>(),
                            e.at("total").get<double>(), e.at("nce_text").get<double>(),
                            e.at("nce_image").get<double>(), e.at("mse").get<double>()});
    for (const auto& e : state.at("accuracy")) {
      EpochAccuracy a{e.at("epoch").get<std::size_t>(), e.at("lr").get<double>(),
                      e.at("loss").get<double>(), e.at("train_accuracy").get<double>(), std::nullopt};
      if (!e.at("test_accuracy").is_null()) a.test_accuracy = e.at("test_accuracy").get<double>();
      ck.accuracy.push_back(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(err::kFormat, "checkpoint " + dir.string() + ": " + e.what());
  }
  check_params(ck.params, ck.encoder);
  if (fs::exists(dir / "classifier.svlt")) {
    ClassHead h{load_tensor(dir / "classifier.svlt"), load_labels(dir / "classifier.labels.json")};
    if (h.weights.rank() != 2 || h.weights.dim(0) != h.labels.size())
      throw Error(err::kShape, "classifier weights do not match its labels");
    ck.head = std::move(h);
  }
  return ck;
}

std::string loss_history_csv(const std::vector<EpochLoss>& history) {
  std::ostringstream out;
  out << std::setprecision(17) << "epoch,lr,total,nce_text,nce_image,mse\n";
  for (const auto& e : history)
    out << e.epoch << ',' << e.lr << ',' << e.total << ',' << e.nce_text << ',' << e.nce_image << ','
        << e.mse << '\n';
  return out.str();
}

std::string accuracy_csv(const std::vector<EpochAccuracy>& curve) {
  std::ostringstream out;
  out << std::setprecision(17) << "epoch,lr,loss,train_accuracy,test_accuracy\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << e.lr << ',' << e.loss << ',' << e.train_accuracy << ',';
    if (e.test_accuracy) out << *e.test_accuracy;
    out << '\n';
  }
  return out.str();
}

}  // namespace svl
