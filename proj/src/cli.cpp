#include "svl/cli.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "svl/config.hpp"
#include "svl/data.hpp"
#include "svl/energy.hpp"
#include "svl/error.hpp"
#include "svl/repvli.hpp"
#include "svl/trainer.hpp"

namespace svl {

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + path.string());
  out << text;
}

Dataset require_dataset(const std::optional<fs::path>& path, const char* what) {
  if (!path) throw Error(err::kConfig, std::string("config needs data.") + what);
  return load_dataset(*path);
}

std::vector<std::string> class_set(const RunConfig& rc, const Dataset& train) {
  if (rc.data.labels) return load_labels(*rc.data.labels);
  std::set<std::string> seen;
  for (const Sample& s : train.samples)
    if (s.label) seen.insert(*s.label);
  return {seen.begin(), seen.end()};
}

struct PretrainArgs {
  std::string config;
  bool resume = false;
};

void cmd_pretrain(const PretrainArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.config);
  const Dataset train = require_dataset(rc.data.train, "train");
  if (train.dim != rc.encoder.embed_dim)
    throw Error(err::kDim, "dataset embedding width " + std::to_string(train.dim) +
                               " does not match encoder embed_dim " +
                               std::to_string(rc.encoder.embed_dim));
  Checkpoint ck = a.resume && fs::exists(rc.output / "train_state.json")
                      ? load_checkpoint(rc.output)
                      : new_checkpoint(rc.encoder, rc.loss, rc.seed);
  ck = pretrain_loop(train, std::move(ck), rc.loss, rc.train);
  save_checkpoint(ck, rc.output);
  write_file(rc.output / "loss_history.csv", loss_history_csv(ck.history));
  if (!ck.history.empty()) {
    const EpochLoss& e = ck.history.back();
    out << "pretrained " << ck.epoch << " epochs, final loss " << e.total << " (text " << e.nce_text
        << ", image " << e.nce_image << ", mse " << e.mse << ")\n";
  }
  out << "checkpoint written to " << rc.output.string() << '\n';
}

struct ZeroShotArgs {
  std::string checkpoint, head, prompts, labels, data, report;
  std::optional<double> scale;
  bool json = false;
};

void cmd_zeroshot(const ZeroShotArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::optional<ZeroShotHead> head;
  if (!a.head.empty()) {
    head = load_head(a.head);
  } else if (!a.prompts.empty()) {
    if (a.labels.empty()) throw Error(err::kConfig, "--prompts needs --labels");
    head = build_head(load_tensor(a.prompts), a.scale.value_or(std::exp(ck.log_temp)),
                      load_labels(a.labels));
  } else {
    throw Error(err::kConfig, "zeroshot needs --head or --prompts");
  }
  const ZeroShotReport r = evaluate_zeroshot(load_dataset(a.data), ck.params, ck.encoder, *head);
  const std::string js = zeroshot_json(r);
  if (!a.report.empty()) write_file(a.report, js + "\n");
  out << (a.json ? js + "\n" : zeroshot_table(r));
}

struct FinetuneArgs {
  std::string checkpoint, config;
};

void cmd_finetune(const FinetuneArgs& a, std::ostream& out) {
  const RunConfig rc = load_run_config(a.config);
  const Dataset train = require_dataset(rc.data.train, "train");
  std::optional<Dataset> test;
  if (rc.data.test) test = load_dataset(*rc.data.test);
  Checkpoint ck = load_checkpoint(a.checkpoint);
  ck.epoch = 0;
  ck = finetune_loop(train, test ? &*test : nullptr, std::move(ck), class_set(rc, train), rc.train);
  save_checkpoint(ck, rc.output);
  write_file(rc.output / "accuracy_curve.csv", accuracy_csv(ck.accuracy));
  const EpochAccuracy& e = ck.accuracy.back();
  out << "fine-tuned " << ck.epoch << " epochs at T=" << rc.train.timesteps
      << " D=" << rc.train.d_max << ", train accuracy " << e.train_accuracy;
  if (e.test_accuracy) out << ", test accuracy " << *e.test_accuracy;
  out << "\ncheckpoint written to " << rc.output.string() << '\n';
}

struct EnergyArgs {
  std::string checkpoint, sample, head, report;
  bool json = false;
};

PointCloud read_sample(const fs::path& path) {
  if (path.extension() == ".csv") {
    const EventStream s = read_events(path);
    if (s.events.empty()) throw Error(err::kDegenerate, path.string() + " holds no events");
    return event_to_cloud(s, s.events.front().t, s.events.back().t + 1);
  }
  const Tensor t = load_tensor(path);
  if (t.rank() != 2 || t.dim(1) < 3)
    throw Error(err::kShape, "sample must be N x (3 + F), got " + shape_str(t.shape()));
  const std::size_t n = t.dim(0), w = t.dim(1);
  std::vector<Point3> pts(n);
  std::vector<double> feats;
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {t[i * w], t[i * w + 1], t[i * w + 2]};
    for (std::size_t j = 3; j < w; ++j) feats.push_back(t[i * w + j]);
  }
  return PointCloud(std::move(pts), std::move(feats), w - 3);
}

void cmd_energy(const EnergyArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  TraceRecorder rec;
  ForwardOptions opts;
  opts.path = SpikePath::expanded;
  opts.recorder = &rec;
  encode(read_sample(a.sample), ck.params, ck.encoder, opts);
  std::vector<LayerTrace> traces = rec.traces();
  std::optional<std::size_t> classes;
  if (!a.head.empty()) {
    const ZeroShotHead h = load_head(a.head);
    if (h.width() != ck.encoder.embed_dim)
      throw Error(err::kDim, "head width " + std::to_string(h.width()) +
                                 " does not match encoder embedding width " +
                                 std::to_string(ck.encoder.embed_dim));
    classes = h.classes();
  } else if (ck.head) {
    classes = ck.head->labels.size();
  }
  if (classes)
    traces.push_back({"head", LayerKind::head_mac,
                      static_cast<double>(*classes * ck.encoder.embed_dim), std::nullopt});
  EnergyModel model;
  model.timesteps = static_cast<double>(ck.encoder.timesteps * ck.encoder.neuron.max_spike());
  const EnergyReport r = estimate(traces, model);
  const std::string js = energy_json(r, model);
  if (!a.report.empty()) write_file(a.report, js + "\n");
  out << (a.json ? js + "\n" : energy_table(r));
}

struct ExportArgs {
  std::string prompts, labels, out;
  double scale = 1.0 / 0.07;
};

void cmd_export_head(const ExportArgs& a, std::ostream& out) {
  std::vector<std::string> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels);
  const ZeroShotHead head = build_head(load_tensor(a.prompts), a.scale, std::move(labels));
  save_head(head, a.out);
  out << "head " << head.classes() << " x " << head.width() << " written to " << a.out << '\n';
}

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthDataset d = synth_triplets(a.cfg);
  write_synth(d, a.out);
  out << d.train.samples.size() + d.test.samples.size() << " triplets (" << d.train.samples.size()
      << " train, " << d.test.samples.size() << " test) over " << d.classes.size()
      << " classes written to " << a.out << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking point-cloud encoders aligned with frozen text and image embeddings"};
  app.name("svl");
  app.require_subcommand(1);

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "Pretrain an encoder with the triple alignment loss");
  c_pre->add_option("--config", pre.config, "Run config JSON")->required();
  c_pre->add_flag("--resume", pre.resume, "Continue from the checkpoint in the output directory");

  ZeroShotArgs zs;
  auto* c_zs = app.add_subcommand("zeroshot", "Zero-shot classification through a folded head");
  c_zs->add_option("--checkpoint", zs.checkpoint, "Encoder checkpoint directory")->required();
  c_zs->add_option("--head", zs.head, "Directory holding head.svlt and head.labels.json");
  c_zs->add_option("--prompts", zs.prompts, "K x C prompt embeddings (SVLT)");
  c_zs->add_option("--labels", zs.labels, "JSON array of class labels");
  c_zs->add_option("--scale", zs.scale, "Logit scale (default: the checkpoint temperature)");
  c_zs->add_option("--data", zs.data, "Triplet manifest to evaluate")->required();
  c_zs->add_option("--report", zs.report, "Write the JSON report here");
  c_zs->add_flag("--json", zs.json, "Print JSON instead of the table");

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "Train a classification head on labelled data");
  c_ft->add_option("--checkpoint", ft.checkpoint, "Pretrained checkpoint directory")->required();
  c_ft->add_option("--config", ft.config, "Run config JSON")->required();

  EnergyArgs en;
  auto* c_en = app.add_subcommand("energy", "Theoretical inference energy for one sample");
  c_en->add_option("--checkpoint", en.checkpoint, "Encoder checkpoint directory")->required();
  c_en->add_option("--sample", en.sample, "Points (SVLT) or events (CSV)")->required();
  c_en->add_option("--head", en.head, "Zero-shot head directory to include");
  c_en->add_option("--report", en.report, "Write the JSON report here");
  c_en->add_flag("--json", en.json, "Print JSON instead of the table");

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export-head", "Fold prompt embeddings into a zero-shot head");
  c_ex->add_option("--prompts", ex.prompts, "K x C prompt embeddings (SVLT)")->required();
  c_ex->add_option("--scale", ex.scale, "Logit scale folded into the weights");
  c_ex->add_option("--labels", ex.labels, "JSON array of class labels");
  c_ex->add_option("--out", ex.out, "Output directory")->required();

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Generate a synthetic triplet dataset");
  c_sy->add_option("--classes", sy.cfg.n_classes, "Number of classes");
  c_sy->add_option("--per-class", sy.cfg.n_per_class, "Samples per class");
  c_sy->add_option("--seed", sy.cfg.seed, "Random seed");
  c_sy->add_option("--dim", sy.cfg.dim, "Embedding width");
  c_sy->add_option("--points", sy.cfg.points, "Points per cloud");
  c_sy->add_option("--out", sy.out, "Output directory")->required();

  std::vector<std::string> argv_store{"svl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage_error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (c_pre->parsed()) cmd_pretrain(pre, out);
    if (c_zs->parsed()) cmd_zeroshot(zs, out);
    if (c_ft->parsed()) cmd_finetune(ft, out);
    if (c_en->parsed()) cmd_energy(en, out);
    if (c_ex->parsed()) cmd_export_head(ex, out);
    if (c_sy->parsed()) cmd_synth(sy, out);
  } catch (const Error& e) {
    err << e.kind() << ": " << e.what() << '\n';
    return e.kind() == err::kConfig ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << err::kIo << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal_error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace svl
