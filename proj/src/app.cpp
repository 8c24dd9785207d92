#include "ordemo/app.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "ordemo/checkpoint.hpp"
#include "ordemo/error.hpp"
#include "ordemo/hash.hpp"
#include "ordemo/predict.hpp"

namespace ordemo {

namespace fs = std::filesystem;
using nlohmann::json;

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".ordemo.lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw ValidationError("output directory is in use by another run (lock file " +
                            path_.string() + ")");
    }
    throw RuntimeFailure("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

json manifest_base(std::string_view command) {
  return {{"tool", "ordemo"}, {"version", std::string(kToolVersion)}, {"command", command}};
}

void write_json(const fs::path& path, const json& doc) { write_file_atomic(path, doc.dump(2) + "\n"); }

CorpusFormat corpus_format(const std::string& name, const std::string& path) {
  return name.empty() ? format_for_path(path) : parse_corpus_format(name);
}

}  // namespace

TrainingData load_training_data(const TrainConfig& config) {
  const DataConfig& d = config.data;
  TrainingData out{EmotionTaxonomy::one_d({"a", "b"}, {0, 1}), {}, {}, json::object()};
  std::optional<SyntheticSpec> synthetic;
  if (!d.synthetic.is_null()) synthetic = parse_synthetic_spec(d.synthetic, {});

  if (!d.taxonomy.empty()) {
    out.taxonomy = load_taxonomy_file(d.taxonomy);
    require_compatible(config.mode, out.taxonomy);
    if (synthetic && !(synthetic->taxonomy == out.taxonomy)) {
      throw ValidationError("data.taxonomy differs from the synthetic spec's taxonomy");
    }
  } else if (synthetic) {
    out.taxonomy = synthetic->taxonomy;
  } else {
    throw ValidationError("config needs data.taxonomy");
  }
  require_compatible(config.mode, out.taxonomy);
  out.hashes["taxonomy_sha256"] = sha256_hex(serialize_taxonomy(out.taxonomy));

  json sources = json::object();
  if (!d.train.empty()) {
    const auto load = [&](const std::string& path) {
      if (path.empty()) return LabeledCorpus{};
      sources[path] = sha256_file(path);
      return load_corpus(path, corpus_format(d.format, path), out.taxonomy);
    };
    out.split.train = load(d.train);
    out.split.val = load(d.val);
    out.split.test = load(d.test);
  } else {
    LabeledCorpus corpus;
    if (!d.corpus.empty()) {
      sources[d.corpus] = sha256_file(d.corpus);
      corpus = load_corpus(d.corpus, corpus_format(d.format, d.corpus), out.taxonomy);
    } else if (synthetic) {
      corpus = generate_synthetic(*synthetic);
    } else {
      throw ValidationError("config needs a data source: data.train, data.corpus or data.synthetic");
    }
    out.split = split_corpus(corpus, d.split, config.seed);
  }
  if (!d.holdout_labels.empty()) {
    for (const auto& label : d.holdout_labels) out.taxonomy.index_of(label);
    for (auto* part : {&out.split.train, &out.split.val, &out.split.test}) {
      const auto held = select_labels(*part, d.holdout_labels, true);
      out.holdout.records.insert(out.holdout.records.end(), held.records.begin(),
                                 held.records.end());
      *part = select_labels(*part, d.holdout_labels, false);
    }
  }
  out.hashes["sources"] = sources;
  out.hashes["train_sha256"] = sha256_hex(serialize_corpus(out.split.train, CorpusFormat::Tsv));
  out.hashes["val_sha256"] = sha256_hex(serialize_corpus(out.split.val, CorpusFormat::Tsv));
  out.hashes["test_sha256"] = sha256_hex(serialize_corpus(out.split.test, CorpusFormat::Tsv));
  return out;
}

TrainConfig resolve_train_config(const std::optional<fs::path>& config_file,
                                 const std::optional<std::string>& preset,
                                 const json& overrides) {
  json file_doc = json::object();
  fs::path base_dir;
  if (config_file) {
    try {
      file_doc = json::parse(read_file(*config_file));
    } catch (const json::parse_error& e) {
      throw ValidationError(config_file->string() + ": not valid JSON: " + e.what());
    }
    if (file_doc.contains("command") && file_doc.contains("config")) {
      if (file_doc.at("command") != "train") {
        throw ValidationError(config_file->string() + ": manifest is not from a train run");
      }
      file_doc = file_doc.at("config");
    }
    base_dir = config_file->parent_path();
    if (base_dir.empty()) base_dir = ".";
  }
  std::string preset_name = "desk";
  if (preset) {
    preset_name = *preset;
  } else if (file_doc.contains("preset")) {
    preset_name = file_doc.at("preset").get<std::string>();
  }
  TrainConfig config = preset_config(preset_name);
  config = train_config_from_json(file_doc, config, base_dir);
  config.preset = preset_name;
  return train_config_from_json(overrides, config, fs::current_path());
}

SynthOutputs run_synth(const fs::path& spec_file, const fs::path& out_dir) {
  json doc;
  try {
    doc = json::parse(read_file(spec_file));
  } catch (const json::parse_error& e) {
    throw ValidationError(spec_file.string() + ": not valid JSON: " + e.what());
  }
  if (doc.contains("command")) {
    if (doc.at("command") != "synth") throw ValidationError("manifest is not from a synth run");
    doc = doc.at("spec");
  }
  SyntheticSpec spec;
  try {
    spec = parse_synthetic_spec(doc, spec_file.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(spec_file.string() + ": " + e.what());
  }
  OutputLock lock(out_dir);
  SynthOutputs out{out_dir / "corpus.tsv", out_dir / "manifest.json", 0};
  json manifest = manifest_base("synth");
  manifest["spec"] = synthetic_spec_to_json(spec);
  manifest["seed"] = spec.seed;
  manifest["taxonomy_sha256"] = sha256_hex(serialize_taxonomy(spec.taxonomy));
  manifest["artifacts"] = {{"corpus", "corpus.tsv"}};
  write_json(out.manifest, manifest);

  const LabeledCorpus corpus = generate_synthetic(spec);
  write_file_atomic(out.corpus, serialize_corpus(corpus, CorpusFormat::Tsv));
  out.rows = corpus.size();
  return out;
}

TrainOutputs run_train(const TrainConfig& requested, const fs::path& out_dir,
                       const std::optional<fs::path>& resume) {
  std::optional<Checkpoint> state;
  TrainConfig config = requested;
  if (resume) {
    state = load_checkpoint(*resume);
    if (!state->training) throw ValidationError(resume->string() + ": not a training-state checkpoint");
    config = train_config_from_json(state->train_config, TrainConfig{});
  }
  config.validate();
  TrainingData data = load_training_data(config);
  if (data.split.train.empty()) throw ValidationError("training split is empty");

  OutputLock lock(out_dir);
  TrainOutputs out;
  out.final_checkpoint = out_dir / "final.ckpt";
  out.best_checkpoint = out_dir / "best.ckpt";
  out.state_checkpoint = out_dir / "state.ckpt";
  out.history = out_dir / "history.jsonl";
  out.manifest = out_dir / "manifest.json";

  json manifest = manifest_base("train");
  manifest["config"] = train_config_to_json(config);
  manifest["seed"] = config.seed;
  manifest["hashes"] = data.hashes;
  json artifacts = {{"final_checkpoint", "final.ckpt"}, {"best_checkpoint", "best.ckpt"},
                    {"state_checkpoint", "state.ckpt"}, {"history", "history.jsonl"},
                    {"train", "train.tsv"},           {"val", "val.tsv"},
                    {"test", "test.tsv"}};
  if (!data.holdout.empty()) artifacts["holdout"] = "holdout.tsv";
  manifest["artifacts"] = artifacts;
  if (resume) manifest["resumed_from"] = sha256_file(*resume);
  write_json(out.manifest, manifest);

  for (const auto& warning : data.split.warnings) std::cerr << "warning: " << warning << "\n";
  write_file_atomic(out_dir / "train.tsv", serialize_corpus(data.split.train, CorpusFormat::Tsv));
  write_file_atomic(out_dir / "val.tsv", serialize_corpus(data.split.val, CorpusFormat::Tsv));
  write_file_atomic(out_dir / "test.tsv", serialize_corpus(data.split.test, CorpusFormat::Tsv));
  if (!data.holdout.empty()) {
    write_file_atomic(out_dir / "holdout.tsv", serialize_corpus(data.holdout, CorpusFormat::Tsv));
  }

  Trainer trainer = state ? Trainer::resume(*state, data.split.train, data.split.val)
                          : Trainer(config, data.taxonomy, data.split.train, data.split.val);
  const auto write_history = [&](const Trainer& t) {
    std::string lines;
    for (const auto& e : t.history().epochs) lines += e.to_json().dump() + "\n";
    write_file_atomic(out.history, lines);
  };
  write_history(trainer);
  trainer.run([&](const Trainer& t) {
    const auto& e = t.history().epochs.back();
    std::cerr << "epoch " << e.epoch << "/" << t.config().epochs << " loss=" << e.train_loss;
    if (e.val_accuracy) {
      std::cerr << " val_acc=" << *e.val_accuracy << " val_f1=" << *e.val_macro_f1
                << " val_mean_err=" << *e.val_mean_error_distance;
    }
    std::cerr << " (" << e.seconds << "s)\n";
    write_history(t);
    save_checkpoint(out.state_checkpoint, t.state_checkpoint());
  });
  save_checkpoint(out.state_checkpoint, trainer.state_checkpoint());
  save_checkpoint(out.final_checkpoint, trainer.final_checkpoint());
  save_checkpoint(out.best_checkpoint, trainer.best_checkpoint());
  out.history_records = trainer.history();
  return out;
}

EvalOutputs run_eval(const fs::path& checkpoint_path, const fs::path& corpus_path,
                     std::optional<CorpusFormat> format, const fs::path& out_dir,
                     const std::optional<std::string>& holdout_label) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const CorpusFormat fmt = format.value_or(format_for_path(corpus_path));
  if (!fs::exists(corpus_path)) throw ValidationError("corpus not found: " + corpus_path.string());
  const LabeledCorpus corpus = load_corpus(corpus_path, fmt, checkpoint.taxonomy);
  const Predictor predictor = Predictor::from_checkpoint(checkpoint);

  OutputLock lock(out_dir);
  EvalOutputs out;
  out.report_json = out_dir / "report.json";
  out.confusion_csv = out_dir / "confusion.csv";
  out.histogram_csv = out_dir / "histogram.csv";
  out.pairs_csv = out_dir / "pairs.csv";
  out.manifest = out_dir / "manifest.json";

  json manifest = manifest_base("eval");
  manifest["checkpoint"] = fs::absolute(checkpoint_path).lexically_normal().string();
  manifest["checkpoint_sha256"] = sha256_file(checkpoint_path);
  manifest["corpus"] = fs::absolute(corpus_path).lexically_normal().string();
  manifest["corpus_sha256"] = sha256_file(corpus_path);
  manifest["format"] = fmt == CorpusFormat::Tsv ? "tsv" : "csv";
  manifest["holdout_label"] = holdout_label ? json(*holdout_label) : json(nullptr);
  json artifacts = {{"report", "report.json"},
                    {"confusion", "confusion.csv"},
                    {"histogram", "histogram.csv"},
                    {"pairs", "pairs.csv"}};
  if (holdout_label) artifacts["proximity"] = "proximity.json";
  manifest["artifacts"] = artifacts;
  write_json(out.manifest, manifest);

  std::vector<PredictionPair> pairs;
  out.report = evaluate(predictor, corpus, &pairs);
  write_json(out.report_json, report_to_json(out.report));
  write_file_atomic(out.confusion_csv, confusion_csv(out.report));
  write_file_atomic(out.histogram_csv, histogram_csv(out.report.error_histogram));
  write_file_atomic(out.pairs_csv, pairs_csv(checkpoint.taxonomy, pairs));
  if (holdout_label) {
    out.proximity = holdout_proximity(predictor, checkpoint.taxonomy, *holdout_label,
                                      select_labels(corpus, {*holdout_label}, true));
    write_json(out_dir / "proximity.json", proximity_to_json(*out.proximity));
  }
  return out;
}

json run_predict(const fs::path& checkpoint, std::string_view text) {
  const Predictor predictor = Predictor::from_checkpoint(load_checkpoint(checkpoint));
  return predictor.predict(text).to_json();
}

GradcheckOutcome run_gradcheck(std::string_view preset, std::uint64_t seed) {
  GradcheckOptions options;
  if (preset == "corrupt") {
    options.corrupt = true;
  } else if (preset != "default") {
    throw ValidationError("unknown gradcheck preset: " + std::string(preset) +
                          " (expected default or corrupt)");
  }
  GradcheckOutcome out;
  out.passed = true;
  for (const HeadMode mode : {HeadMode::Softmax, HeadMode::Ordinal1D, HeadMode::Ordinal2D}) {
    auto report = check_gradients(tiny_config(mode), seed, options);
    out.passed = out.passed && report.passed();
    out.text += report.to_text();
    out.reports.push_back(std::move(report));
  }
  return out;
}

void rerun_manifest(const fs::path& manifest_path, const fs::path& out_dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest_path.string() + ": not valid JSON: " + e.what());
  }
  const std::string command = manifest.value("command", "");
  if (command == "synth") {
    run_synth(manifest_path, out_dir);
  } else if (command == "train") {
    run_train(resolve_train_config(manifest_path, std::nullopt, json::object()), out_dir);
  } else if (command == "eval") {
    const auto holdout = manifest.at("holdout_label");
    run_eval(manifest.at("checkpoint").get<std::string>(), manifest.at("corpus").get<std::string>(),
             parse_corpus_format(manifest.at("format").get<std::string>()), out_dir,
             holdout.is_null() ? std::nullopt : std::optional<std::string>(holdout.get<std::string>()));
  } else {
    throw ValidationError(manifest_path.string() + ": not an ordemo manifest");
  }
}

}  // namespace ordemo
