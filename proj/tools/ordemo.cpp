#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ordemo/app.hpp"
#include "ordemo/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

constexpr const char* kTrainHelp =
    "Train a classifier.\n"
    "Settings are layered: built-in preset (desk or paper) < --config file < flags.\n"
    "The preset is --preset, else the config file's \"preset\", else desk.\n"
    "A manifest.json written by a previous train run is accepted as --config.";

struct TrainFlags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::string> mode;
  std::optional<std::string> taxonomy;
  std::optional<std::string> corpus;
  std::optional<std::string> format;
  std::optional<std::string> train;
  std::optional<std::string> val;
  std::optional<std::string> test;
  std::optional<std::string> synthetic;
  std::vector<std::string> holdout;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> max_seq_length;
  std::optional<double> weight_decay;
  std::optional<int> min_freq;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> resume;
  std::string out;
};

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

json train_overrides(const TrainFlags& f) {
  json o = json::object();
  if (f.mode) o["mode"] = *f.mode;
  if (f.epochs) o["epochs"] = *f.epochs;
  if (f.lr) o["learning_rate"] = *f.lr;
  if (f.weight_decay) o["optimizer"]["weight_decay"] = *f.weight_decay;
  if (f.batch_size) o["batch_size"] = *f.batch_size;
  if (f.max_seq_length) o["max_seq_length"] = *f.max_seq_length;
  if (f.min_freq) o["min_freq"] = *f.min_freq;
  if (f.seed) o["seed"] = *f.seed;
  json data = json::object();
  if (f.taxonomy) data["taxonomy"] = absolute(*f.taxonomy);
  if (f.corpus) data["corpus"] = absolute(*f.corpus);
  if (f.format) data["format"] = *f.format;
  if (f.train) data["train"] = absolute(*f.train);
  if (f.val) data["val"] = absolute(*f.val);
  if (f.test) data["test"] = absolute(*f.test);
  if (f.synthetic) data["synthetic"] = absolute(*f.synthetic);
  if (!f.holdout.empty()) data["holdout_labels"] = f.holdout;
  if (!data.empty()) o["data"] = data;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ordinal emotion classifier: synthetic data, training, evaluation."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ordemo::kToolVersion));

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec (or a synth manifest).");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output directory")->required();

  TrainFlags tf;
  auto* train = app.add_subcommand("train", kTrainHelp);
  train->add_option("--config", tf.config, "Config JSON or train manifest")->check(CLI::ExistingFile);
  train->add_option("--preset", tf.preset, "Built-in preset")->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--mode", tf.mode, "Head: softmax, ordinal-1d, ordinal-2d");
  train->add_option("--taxonomy", tf.taxonomy, "Taxonomy JSON");
  train->add_option("--corpus", tf.corpus, "Labeled corpus, split by seed");
  train->add_option("--format", tf.format, "Corpus format: tsv or csv (default: by extension)");
  train->add_option("--train", tf.train, "Pre-split training corpus");
  train->add_option("--val", tf.val, "Pre-split validation corpus");
  train->add_option("--test", tf.test, "Pre-split test corpus");
  train->add_option("--synthetic", tf.synthetic, "Synthetic spec JSON used as the corpus");
  train->add_option("--holdout", tf.holdout, "Label withheld from training (repeatable)");
  train->add_option("--epochs", tf.epochs);
  train->add_option("--lr", tf.lr);
  train->add_option("--batch-size", tf.batch_size);
  train->add_option("--max-seq-length", tf.max_seq_length);
  train->add_option("--weight-decay", tf.weight_decay);
  train->add_option("--min-freq", tf.min_freq);
  train->add_option("--seed", tf.seed);
  train->add_option("--resume", tf.resume, "Continue from a state.ckpt; other settings come from it")
      ->check(CLI::ExistingFile);
  train->add_option("--out", tf.out, "Output directory")->required();

  std::string ckpt, corpus;
  std::optional<std::string> format, holdout_label;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus.");
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--corpus", corpus)->required();
  eval->add_option("--format", format, "tsv or csv (default: by extension)");
  eval->add_option("--holdout-label", holdout_label,
                   "Also report grid proximity for this label's records (ordinal-2d)");
  eval->add_option("--out", out_dir, "Output directory")->required();

  std::string text;
  auto* predict = app.add_subcommand("predict", "Classify one text; prints a JSON line to stdout.");
  predict->add_option("--checkpoint", ckpt)->required();
  predict->add_option("--text", text)->required();

  std::string preset = "default";
  std::uint64_t seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients.");
  gradcheck->add_option("--preset", preset, "default or corrupt")->capture_default_str();
  gradcheck->add_option("--seed", seed)->capture_default_str();

  std::string manifest;
  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a manifest.");
  rerun->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*synth) {
      const auto out = ordemo::run_synth(spec_path, out_dir);
      std::cerr << "wrote " << out.rows << " rows to " << out.corpus.string() << "\n";
    } else if (*train) {
      ordemo::TrainConfig config;
      if (!tf.resume) config = ordemo::resolve_train_config(tf.config, tf.preset, train_overrides(tf));
      const auto out = ordemo::run_train(config, tf.out,
                                         tf.resume ? std::optional<fs::path>(*tf.resume) : std::nullopt);
      std::cerr << "wrote " << out.final_checkpoint.string() << " and " << out.best_checkpoint.string()
                << "\n";
    } else if (*eval) {
      std::optional<ordemo::CorpusFormat> fmt;
      if (format) fmt = ordemo::parse_corpus_format(*format);
      const auto out = ordemo::run_eval(ckpt, corpus, fmt, out_dir, holdout_label);
      std::cerr << "accuracy " << out.report.accuracy << ", macro-F1 " << out.report.macro_f1
                << ", mean error distance " << out.report.mean_error_distance << "\n";
      if (out.proximity) {
        std::cerr << "held-out " << out.proximity->label << ": mean grid distance "
                  << out.proximity->mean_distance << "\n";
      }
    } else if (*predict) {
      std::cout << ordemo::run_predict(ckpt, text).dump() << "\n";
    } else if (*gradcheck) {
      const auto out = ordemo::run_gradcheck(preset, seed);
      std::cerr << out.text;
      return out.passed ? kExitOk : kExitValidation;
    } else if (*rerun) {
      ordemo::rerun_manifest(manifest, out_dir);
    }
  } catch (const ordemo::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ordemo::RuntimeFailure& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
