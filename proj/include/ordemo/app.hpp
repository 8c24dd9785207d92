#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ordemo/data.hpp"
#include "ordemo/eval.hpp"
#include "ordemo/gradcheck.hpp"
#include "ordemo/trainer.hpp"

namespace ordemo {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exclusive claim on an output directory, released on destruction.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct TrainingData {
  EmotionTaxonomy taxonomy;
  CorpusSplit split;
  LabeledCorpus holdout;
  nlohmann::json hashes;  // taxonomy and corpus SHA-256 digests
};

TrainingData load_training_data(const TrainConfig& config);

// Precedence: built-in preset < config file < flag overrides. The preset is
// the `preset` flag, else the file's "preset", else "desk". A manifest
// written by `train` is accepted as a config file.
TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& config_file,
                                 const std::optional<std::string>& preset,
                                 const nlohmann::json& overrides);

struct SynthOutputs {
  std::filesystem::path corpus;
  std::filesystem::path manifest;
  std::size_t rows = 0;
};

// `spec_file` may be a synthetic spec or a manifest written by synth.
SynthOutputs run_synth(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir);

struct TrainOutputs {
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::filesystem::path state_checkpoint;
  std::filesystem::path history;
  std::filesystem::path manifest;
  TrainHistory history_records;
};

// With `resume`, the configuration and data come from the state checkpoint.
TrainOutputs run_train(const TrainConfig& config, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt);

struct EvalOutputs {
  MetricsReport report;
  std::optional<ProximityReport> proximity;
  std::filesystem::path report_json;
  std::filesystem::path confusion_csv;
  std::filesystem::path histogram_csv;
  std::filesystem::path pairs_csv;
  std::filesystem::path manifest;
};

// With `holdout_label`, also writes proximity.json for that label's records.
EvalOutputs run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus,
                     std::optional<CorpusFormat> format, const std::filesystem::path& out_dir,
                     const std::optional<std::string>& holdout_label = std::nullopt);

nlohmann::json run_predict(const std::filesystem::path& checkpoint, std::string_view text);

struct GradcheckOutcome {
  std::vector<GradcheckReport> reports;  // one per head mode
  bool passed = false;
  std::string text;
};

// Presets: "default" and "corrupt" (negative control).
GradcheckOutcome run_gradcheck(std::string_view preset, std::uint64_t seed);

// Replays the command recorded in a manifest into `out_dir`.
void rerun_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out_dir);

}  // namespace ordemo
