#include "ppgsqa/cli.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ppgsqa/ppgsqa.hpp"

namespace ppgsqa::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 42;
  bool deterministic = false;
  std::string manifest;
  std::string out_dir = ".";
};

struct ModelFlags {
  std::string channels = "ppg,fdp,sdp";
  std::string se = "on";
  double dropout = 0.2;
};

struct TrainFlags {
  int epochs = 60;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  int step_size = 20;
  double gamma = 0.1;
  std::size_t batch_size = 64;
  std::size_t folds = 5;
  bool decoupled = false;
};

void add_globals(CLI::App& app, Globals& g) {
  app.add_option("--seed", g.seed, "Global random seed")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Serialize all work so artifacts are byte-identical across runs");
  app.add_option("--manifest", g.manifest, "Dataset manifest (JSON)");
  app.add_option("--out-dir", g.out_dir, "Directory for output artifacts")->capture_default_str();
}

void add_model_flags(CLI::App& app, ModelFlags& m) {
  app.add_option("--channels", m.channels, "Comma-separated input channels from {ppg,fdp,sdp,atc}")
      ->capture_default_str();
  app.add_option("--se", m.se, "Squeeze-and-excitation blocks")->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--dropout", m.dropout, "Dropout probability inside residual blocks")->capture_default_str();
}

void add_train_flags(CLI::App& app, TrainFlags& t) {
  app.add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  app.add_option("--lr", t.lr, "Initial learning rate")->capture_default_str();
  app.add_option("--weight-decay", t.weight_decay, "L2 weight decay")->capture_default_str();
  app.add_option("--step-size", t.step_size, "Epochs between learning-rate decays")->capture_default_str();
  app.add_option("--gamma", t.gamma, "Learning-rate decay factor")->capture_default_str();
  app.add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  app.add_option("--folds", t.folds, "Cross-validation folds")->capture_default_str();
  app.add_flag("--decoupled-weight-decay", t.decoupled, "Apply weight decay outside the Adam moments");
}

ModelConfig model_config(const ModelFlags& m, std::size_t in_channels, std::size_t segment_len) {
  ModelConfig cfg;
  cfg.in_channels = in_channels;
  cfg.use_se = m.se == "on";
  cfg.dropout_p = m.dropout;
  cfg.segment_len = segment_len;
  cfg.validate();
  return cfg;
}

TrainConfig train_config(const TrainFlags& t, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = t.epochs;
  cfg.lr = t.lr;
  cfg.weight_decay = t.weight_decay;
  cfg.step_size = t.step_size;
  cfg.gamma = t.gamma;
  cfg.batch_size = t.batch_size;
  cfg.folds = t.folds;
  cfg.decoupled_weight_decay = t.decoupled;
  cfg.global_seed = seed;
  cfg.validate();
  return cfg;
}

ojson globals_json(const std::string& command, const Globals& g) {
  ojson j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["deterministic"] = g.deterministic;
  j["manifest"] = g.manifest;
  j["out_dir"] = g.out_dir;
  return j;
}

ojson train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},         {"lr", t.lr},
          {"weight_decay", t.weight_decay}, {"decoupled_weight_decay", t.decoupled_weight_decay},
          {"step_size", t.step_size},   {"gamma", t.gamma},
          {"batch_size", t.batch_size}, {"folds", t.folds},
          {"beta1", t.beta1},           {"beta2", t.beta2},
          {"eps", t.eps}};
}

ojson model_json(const ModelConfig& c) {
  return {{"in_channels", c.in_channels}, {"use_se", c.use_se},         {"reduction_ratio", c.reduction_ratio},
          {"dropout_p", c.dropout_p},     {"segment_len", c.segment_len}, {"stem_filters", c.stem_filters},
          {"stage_filters", c.stage_filters}, {"blocks_per_stage", c.blocks_per_stage}};
}

ojson preprocess_json(const PreprocessConfig& p) {
  return {{"band_low_hz", p.band_low},
          {"band_high_hz", p.band_high},
          {"filter_order", p.filter_order},
          {"segment_seconds", p.segment_seconds},
          {"good_threshold", p.good_threshold}};
}

void write_echo(const Globals& g, const std::string& command, const ojson& echo) {
  write_file(fs::path(g.out_dir) / (command + ".config.json"), echo.dump(2) + "\n");
}

fs::path require_manifest(const Globals& g) {
  if (g.manifest.empty()) fail(ErrorKind::InvalidConfig, "--manifest is required");
  return fs::path(g.manifest);
}

std::vector<SignalRecord> load_split(const fs::path& manifest_path, const std::string& split) {
  const auto manifest = read_manifest(manifest_path);
  std::vector<ManifestEntry> entries;
  if (split == "all") entries = manifest.entries;
  else entries = manifest.with_split(split == "train" ? Split::Train : Split::Test);
  if (entries.empty()) fail(ErrorKind::EmptyDataset, "manifest has no '" + split + "' subjects");
  return load_records(entries, manifest_path.parent_path());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const SynthesisConfig& base, const std::string& kinds, std::ostream& out) {
  SynthesisConfig cfg = base;
  cfg.seed = g.seed;
  cfg.kinds.clear();
  std::vector<std::string> kind_names;
  if (!kinds.empty() && kinds != "none") {
    std::size_t pos = 0;
    while (pos <= kinds.size()) {
      const auto next = kinds.find(',', pos);
      const auto name = kinds.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (name == "burst") cfg.kinds.push_back(Corruption::GaussianBurst);
      else if (name == "wander") cfg.kinds.push_back(Corruption::BaselineWander);
      else if (name == "flatline") cfg.kinds.push_back(Corruption::Flatline);
      else if (name == "spikes") cfg.kinds.push_back(Corruption::MotionSpikes);
      else fail(ErrorKind::InvalidConfig, "unknown corruption kind '" + name + "'");
      kind_names.push_back(name);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
  }
  cfg.validate();

  auto echo = globals_json("synth", g);
  echo["synthesis"] = {{"n_subjects", cfg.n_subjects},
                       {"n_test_subjects", cfg.n_test_subjects},
                       {"minutes_per_subject", cfg.minutes_per_subject},
                       {"fs", cfg.fs},
                       {"hr_min_bpm", cfg.hr_min_bpm},
                       {"hr_max_bpm", cfg.hr_max_bpm},
                       {"corruption_probability", cfg.corruption_probability},
                       {"span_min_fraction", cfg.span_min_fraction},
                       {"span_max_fraction", cfg.span_max_fraction},
                       {"kinds", kind_names},
                       {"seed", cfg.seed}};
  write_echo(g, "synth", echo);

  const auto manifest = synthesize_corpus(cfg, g.out_dir);
  out << "wrote " << manifest.entries.size() << " subjects to " << (fs::path(g.out_dir) / "manifest.json").string()
      << "\n";
  return kOk;
}

int cmd_preprocess(const Globals& g, const ModelFlags& m, const std::string& split, std::ostream& out) {
  const auto channels = ChannelSet::parse(m.channels);
  const PreprocessConfig pcfg;
  auto echo = globals_json("preprocess", g);
  echo["channels"] = channels.to_string();
  echo["split"] = split;
  echo["preprocess"] = preprocess_json(pcfg);
  write_echo(g, "preprocess", echo);

  const auto records = load_split(require_manifest(g), split);
  std::string csv = "subject_id,start_sample,label,status\n";
  std::size_t good = 0, bad = 0, degenerate = 0;
  auto per_subject = ojson::array();
  for (const auto& rec : records) {
    std::size_t sg = 0, sb = 0;
    for (const auto& seg : preprocess_record(rec, channels, pcfg)) {
      const bool is_good = seg.label == Quality::Good;
      (is_good ? sg : sb) += 1;
      if (!seg.stack) ++degenerate;
      csv += seg.source.subject_id + "," + std::to_string(seg.source.start) + "," + (is_good ? "good" : "bad") + "," +
             (seg.stack ? "ok" : "degenerate") + "\n";
    }
    per_subject.push_back({{"subject_id", rec.subject_id}, {"good", sg}, {"bad", sb}});
    good += sg;
    bad += sb;
  }
  write_file(fs::path(g.out_dir) / "segments.csv", csv);
  ojson summary;
  summary["channels"] = channels.to_string();
  summary["segments"] = good + bad;
  summary["good"] = good;
  summary["bad"] = bad;
  summary["degenerate"] = degenerate;
  summary["subjects"] = std::move(per_subject);
  write_file(fs::path(g.out_dir) / "preprocess_summary.json", summary.dump(2) + "\n");
  out << "segments " << good + bad << ": good " << good << ", bad " << bad << " (degenerate " << degenerate << ")\n";
  return kOk;
}

int cmd_train(const Globals& g, const ModelFlags& m, const TrainFlags& t, std::ostream& out) {
  const auto channels = ChannelSet::parse(m.channels);
  const auto tcfg = train_config(t, g.seed);
  const auto records = load_split(require_manifest(g), "train");
  const auto data = make_dataset(records, channels);
  if (data.samples.empty()) fail(ErrorKind::EmptyDataset, "no usable training segments");
  const auto mcfg = model_config(m, channels.size(), data.length);

  auto echo = globals_json("train", g);
  echo["channels"] = channels.to_string();
  echo["model"] = model_json(mcfg);
  echo["training"] = train_json(tcfg);
  echo["training_seed"] = fold_seed(tcfg.global_seed, tcfg.folds);
  echo["preprocess"] = preprocess_json({});
  write_echo(g, "train", echo);

  std::string log;
  auto result = train_full(data, mcfg, tcfg, [&](const EpochMetrics& em) {
    log += em.to_json_line() + "\n";
    out << "epoch " << em.epoch << " lr " << em.lr << " train_loss " << fmt("%.6f", em.train_loss) << "\n";
  });
  write_file(fs::path(g.out_dir) / "train_metrics.jsonl", log);
  save_weights(result.model, channels, fold_seed(tcfg.global_seed, tcfg.folds), fs::path(g.out_dir) / "model.weights");
  out << "trained on " << data.samples.size() << " segments from " << data.subjects().size() << " subjects; wrote "
      << (fs::path(g.out_dir) / "model.weights").string() << "\n";
  return kOk;
}

int cmd_cv(const Globals& g, const ModelFlags& m, const TrainFlags& t, std::ostream& out) {
  const auto channels = ChannelSet::parse(m.channels);
  const auto tcfg = train_config(t, g.seed);
  const auto records = load_split(require_manifest(g), "train");
  const auto data = make_dataset(records, channels);
  if (data.samples.empty()) fail(ErrorKind::EmptyDataset, "no usable training segments");
  const auto mcfg = model_config(m, channels.size(), data.length);
  const auto splits = split_subjects(data.subjects(), tcfg.folds, tcfg.global_seed);

  auto echo = globals_json("cv", g);
  echo["channels"] = channels.to_string();
  echo["model"] = model_json(mcfg);
  echo["training"] = train_json(tcfg);
  echo["preprocess"] = preprocess_json({});
  write_echo(g, "cv", echo);

  auto folds = ojson::array();
  std::vector<double> aucs;
  for (const auto& split : splits) {
    std::string log;
    auto result = train_fold(data, split, mcfg, tcfg, [&](const EpochMetrics& em) { log += em.to_json_line() + "\n"; });
    write_file(fs::path(g.out_dir) / ("fold_" + std::to_string(split.fold_index) + "_metrics.jsonl"), log);
    const auto& last = result.history.back();
    ojson f;
    f["fold"] = split.fold_index;
    f["seed"] = split.seed;
    f["train_subjects"] = split.train_subjects;
    f["val_subjects"] = split.val_subjects;
    f["val_loss"] = std::isfinite(last.val_loss) ? ojson(last.val_loss) : ojson(nullptr);
    f["val_auc"] = std::isfinite(last.val_auc) ? ojson(last.val_auc) : ojson(nullptr);
    folds.push_back(std::move(f));
    if (std::isfinite(last.val_auc)) aucs.push_back(last.val_auc);
    out << "fold " << split.fold_index << " val_auc " << fmt("%.4f", last.val_auc) << " val_loss "
        << fmt("%.4f", last.val_loss) << "\n";
  }

  double mean = std::nan(""), sd = std::nan("");
  if (!aucs.empty()) {
    mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    sd = 0.0;
    if (aucs.size() > 1) {
      for (double a : aucs) sd += (a - mean) * (a - mean);
      sd = std::sqrt(sd / static_cast<double>(aucs.size() - 1));
    }
  }
  ojson summary;
  summary["channels"] = channels.to_string();
  summary["use_se"] = mcfg.use_se;
  summary["folds"] = std::move(folds);
  summary["scored_folds"] = aucs.size();
  summary["mean_val_auc"] = std::isfinite(mean) ? ojson(mean) : ojson(nullptr);
  summary["std_val_auc"] = std::isfinite(sd) ? ojson(sd) : ojson(nullptr);
  write_file(fs::path(g.out_dir) / "cv_summary.json", summary.dump(2) + "\n");
  out << "mean val AUC " << fmt("%.4f", mean) << " +/- " << fmt("%.4f", sd) << " over " << aucs.size()
      << " folds\n";
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& weights_path, const std::string& split, double threshold,
             std::ostream& out) {
  auto loaded = load_weights(weights_path);
  const PreprocessConfig pcfg;
  auto echo = globals_json("eval", g);
  echo["weights"] = weights_path;
  echo["split"] = split;
  echo["threshold"] = threshold;
  echo["channels"] = loaded.meta.channels.to_string();
  echo["model"] = model_json(loaded.meta.config);
  echo["preprocess"] = preprocess_json(pcfg);
  write_echo(g, "eval", echo);

  const auto records = load_split(require_manifest(g), split);
  std::vector<Prediction> rows;
  for (const auto& rec : records) {
    auto preds = score_record(loaded.model, loaded.meta.channels, rec, pcfg);
    rows.insert(rows.end(), preds.begin(), preds.end());
  }
  std::vector<ScoredSample> scored;
  for (const auto& r : rows) scored.push_back({r.score, *r.truth});
  if (scored.empty()) fail(ErrorKind::EmptyDataset, "no segments to evaluate");

  const double acc = accuracy(scored, threshold);
  const auto cm = confusion(scored, threshold);
  ojson report;
  report["channels"] = loaded.meta.channels.to_string();
  report["segments"] = scored.size();
  report["threshold"] = threshold;
  report["accuracy"] = acc;
  report["confusion"] = {{"true_good", cm.true_good},
                         {"false_good", cm.false_good},
                         {"true_bad", cm.true_bad},
                         {"false_bad", cm.false_bad}};
  double auc_value = std::nan("");
  try {
    const auto roc = roc_curve(scored);
    auc_value = roc.auc;
    write_file(fs::path(g.out_dir) / "roc.csv", roc.to_csv());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingleClass) throw;
  }
  report["auc"] = std::isfinite(auc_value) ? ojson(auc_value) : ojson(nullptr);
  write_file(fs::path(g.out_dir) / "eval.json", report.dump(2) + "\n");
  write_predictions(rows, fs::path(g.out_dir) / "predictions.csv", threshold);
  out << "channels " << loaded.meta.channels.to_string() << "\n";
  out << "segments " << scored.size() << " auc " << fmt("%.4f", auc_value) << " accuracy " << fmt("%.4f", acc)
      << "\n";
  return kOk;
}

int cmd_predict(const Globals& g, const std::string& weights_path, const std::string& record_path,
                const std::string& label_path, double fs_hz, double threshold, std::ostream& out) {
  auto loaded = load_weights(weights_path);
  const PreprocessConfig pcfg;
  auto echo = globals_json("predict", g);
  echo["weights"] = weights_path;
  echo["record"] = record_path;
  echo["labels"] = label_path;
  echo["fs"] = fs_hz;
  echo["threshold"] = threshold;
  echo["channels"] = loaded.meta.channels.to_string();
  echo["model"] = model_json(loaded.meta.config);
  echo["preprocess"] = preprocess_json(pcfg);
  write_echo(g, "predict", echo);

  out << "channels " << loaded.meta.channels.to_string() << "\n";
  const bool with_truth = !label_path.empty();
  SignalRecord rec;
  if (with_truth) {
    rec = load_record(record_path, label_path, fs_hz);
  } else {
    rec.subject_id = fs::path(record_path).stem().string();
    rec.fs = fs_hz;
    rec.samples = load_samples(record_path);
    rec.quality_mask.assign(rec.samples.size(), true);
  }
  const auto rows = score_record(loaded.model, loaded.meta.channels, rec, pcfg, with_truth);
  std::size_t good = 0;
  for (const auto& r : rows) good += r.score >= threshold;
  write_predictions(rows, fs::path(g.out_dir) / "predictions.csv", threshold);
  out << "good " << good << " bad " << rows.size() - good << "\n";
  return kOk;
}

int cmd_count(const Globals& g, const ModelFlags& m, const std::string& convention_name, std::size_t length,
              bool all, std::ostream& out) {
  const auto convention = parse_mac_convention(convention_name);
  auto echo = globals_json("count", g);
  echo["convention"] = to_string(convention);
  echo["input_len"] = length;

  if (!all) {
    const auto channels = ChannelSet::parse(m.channels);
    const auto cfg = model_config(m, channels.size(), length);
    echo["channels"] = channels.to_string();
    echo["model"] = model_json(cfg);
    write_echo(g, "count", echo);
    const auto report = emit_cost_report(cfg, length, convention);
    out << "input " << channels.label() << ", se " << (cfg.use_se ? "on" : "off") << "\n" << report.to_table();
    write_file(fs::path(g.out_dir) / "count.json", report.to_json());
    return kOk;
  }

  echo["all"] = true;
  write_echo(g, "count", echo);
  std::string csv = "input,se,params,params_k,macs,mmac\n";
  auto rows = ojson::array();
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %-4s %10s %10s %12s %8s\n", "input", "se", "params", "params_k", "macs",
                "mmac");
  out << line;
  for (const bool se : {false, true}) {
    for (const auto& set : ChannelSet::ablation_sets()) {
      ModelFlags mf = m;
      mf.se = se ? "on" : "off";
      const auto report = emit_cost_report(model_config(mf, set.size(), length), length, convention);
      std::snprintf(line, sizeof line, "%-18s %-4s %10llu %10.2f %12llu %8.2f\n", set.label().c_str(), mf.se.c_str(),
                    static_cast<unsigned long long>(report.total_params), report.params_k(),
                    static_cast<unsigned long long>(report.total_macs), report.mmac());
      out << line;
      csv += set.label() + "," + mf.se + "," + std::to_string(report.total_params) + "," +
             fmt("%.2f", report.params_k()) + "," + std::to_string(report.total_macs) + "," +
             fmt("%.2f", report.mmac()) + "\n";
      rows.push_back({{"input", set.label()},
                      {"channels", set.to_string()},
                      {"use_se", se},
                      {"params", report.total_params},
                      {"macs", report.total_macs}});
    }
  }
  write_file(fs::path(g.out_dir) / "count_table.csv", csv);
  write_file(fs::path(g.out_dir) / "count_table.json", rows.dump(2) + "\n");
  return kOk;
}

}  // namespace

int exit_code_for(ErrorKind kind, bool predicting) {
  switch (kind) {
    case ErrorKind::InvalidBand:
    case ErrorKind::InvalidMode:
    case ErrorKind::InvalidP:
    case ErrorKind::InvalidConfig:
      return kUsage;
    case ErrorKind::RecordTooShort:
      return predicting ? kMismatch : kDataError;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::VersionMismatch:
    case ErrorKind::TruncatedBody:
    case ErrorKind::StaleCache:
      return kMismatch;
    default:
      return kDataError;
  }
}

std::vector<Prediction> score_record(const Model<float>& model, const ChannelSet& channels, const SignalRecord& rec,
                                     const PreprocessConfig& cfg, bool with_truth) {
  const auto segments = preprocess_record(rec, channels, cfg);
  const auto& mc = model.config();
  std::vector<Prediction> rows(segments.size());
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    rows[i].source = segments[i].source;
    if (with_truth) rows[i].truth = segments[i].label;
    if (!segments[i].stack) continue;
    const auto& st = *segments[i].stack;
    if (st.channels.size() != mc.in_channels || st.length != mc.segment_len) {
      fail(ErrorKind::ShapeMismatch, "segment stack [" + std::to_string(st.channels.size()) + "," +
                                         std::to_string(st.length) + "] does not fit a model expecting [" +
                                         std::to_string(mc.in_channels) + "," + std::to_string(mc.segment_len) + "]");
    }
    live.push_back(i);
  }
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < live.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, live.size() - start);
    Tensor3<float> x(n, mc.in_channels, mc.segment_len);
    for (std::size_t b = 0; b < n; ++b) {
      const auto& data = segments[live[start + b]].stack->data;
      std::transform(data.begin(), data.end(), x.data() + b * data.size(),
                     [](double v) { return static_cast<float>(v); });
    }
    const auto logits = model.infer(x);
    for (std::size_t b = 0; b < n; ++b) {
      const double d = static_cast<double>(logits(b, 0, 0)) - static_cast<double>(logits(b, 1, 0));
      rows[live[start + b]].score = 1.0 / (1.0 + std::exp(d));
    }
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Signal quality assessment for wrist PPG", "ppgsqa"};
  app.require_subcommand(1);
  Globals g;
  add_globals(app, g);

  ModelFlags mflags;
  TrainFlags tflags;
  SynthesisConfig synth_cfg;
  std::string synth_kinds = "burst,wander,flatline,spikes";
  std::string split = "all";
  std::string eval_split = "test";
  std::string weights;
  std::string record;
  std::string labels;
  double fs_hz = kDefaultFs;
  double threshold = 0.5;
  std::string convention = "standard";
  std::size_t length = 960;
  bool count_all = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic PPG corpus with a manifest");
  add_globals(*synth, g);
  synth->add_option("--subjects", synth_cfg.n_subjects, "Training-split subjects")->capture_default_str();
  synth->add_option("--test-subjects", synth_cfg.n_test_subjects, "Additional test-split subjects")
      ->capture_default_str();
  synth->add_option("--minutes", synth_cfg.minutes_per_subject, "Minutes per subject")->capture_default_str();
  synth->add_option("--fs", synth_cfg.fs, "Sampling rate (Hz)")->capture_default_str();
  synth->add_option("--hr-min", synth_cfg.hr_min_bpm, "Lowest heart rate (bpm)")->capture_default_str();
  synth->add_option("--hr-max", synth_cfg.hr_max_bpm, "Highest heart rate (bpm)")->capture_default_str();
  synth->add_option("--corruption-p", synth_cfg.corruption_probability,
                    "Probability that a 30 s window is corrupted")
      ->capture_default_str();
  synth->add_option("--span-min", synth_cfg.span_min_fraction, "Shortest corrupted span (fraction of a window)")
      ->capture_default_str();
  synth->add_option("--span-max", synth_cfg.span_max_fraction, "Longest corrupted span (fraction of a window)")
      ->capture_default_str();
  synth->add_option("--kinds", synth_kinds, "Corruption kinds from {burst,wander,flatline,spikes}, or none")
      ->capture_default_str();

  auto* pre = app.add_subcommand("preprocess", "Filter, segment and label the manifest's records");
  add_globals(*pre, g);
  pre->add_option("--channels", mflags.channels, "Comma-separated input channels from {ppg,fdp,sdp,atc}")
      ->capture_default_str();
  pre->add_option("--split", split, "Subjects to include")->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "Train on every training-split subject and save the weights");
  add_globals(*train, g);
  add_model_flags(*train, mflags);
  add_train_flags(*train, tflags);

  auto* cv = app.add_subcommand("cv", "Subject-level k-fold cross-validation on the training split");
  add_globals(*cv, g);
  add_model_flags(*cv, mflags);
  add_train_flags(*cv, tflags);

  auto* eval = app.add_subcommand("eval", "Score a manifest split with saved weights");
  add_globals(*eval, g);
  eval->add_option("--weights", weights, "Weight file")->required();
  eval->add_option("--split", eval_split, "Subjects to score")->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  eval->add_option("--threshold", threshold, "Decision threshold on P(good)")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Classify the 30 s segments of one record");
  add_globals(*predict, g);
  predict->add_option("--weights", weights, "Weight file")->required();
  predict->add_option("--record", record, "Record file, one sample per line")->required();
  predict->add_option("--labels", labels, "Optional label runs for the record");
  predict->add_option("--fs", fs_hz, "Sampling rate of the record (Hz)")->capture_default_str();
  predict->add_option("--threshold", threshold, "Decision threshold on P(good)")->capture_default_str();

  auto* count = app.add_subcommand("count", "Report parameter and MAC counts per layer");
  add_globals(*count, g);
  add_model_flags(*count, mflags);
  count->add_option("--convention", convention, "MAC convention")
      ->check(CLI::IsMember({"standard", "conv-linear-only"}))
      ->capture_default_str();
  count->add_option("--length", length, "Input length in samples")->capture_default_str();
  count->add_flag("--all", count_all, "Tabulate every ablation input set with and without SE");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const bool predicting = predict->parsed();
  try {
    if (synth->parsed()) return cmd_synth(g, synth_cfg, synth_kinds, out);
    if (pre->parsed()) return cmd_preprocess(g, mflags, split, out);
    if (train->parsed()) return cmd_train(g, mflags, tflags, out);
    if (cv->parsed()) return cmd_cv(g, mflags, tflags, out);
    if (eval->parsed()) return cmd_eval(g, weights, eval_split, threshold, out);
    if (predicting) return cmd_predict(g, weights, record, labels, fs_hz, threshold, out);
    if (count->parsed()) return cmd_count(g, mflags, convention, length, count_all, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind(), predicting);
  } catch (const fs::filesystem_error& e) {
    err << "error: IoFailure: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace ppgsqa::cli
