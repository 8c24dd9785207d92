#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordemo/adamw.hpp"
#include "ordemo/checkpoint.hpp"
#include "ordemo/data.hpp"
#include "ordemo/eval.hpp"
#include "ordemo/model.hpp"

namespace ordemo {

// Where training data comes from. Exactly one source is used, in this
// priority: explicit train/val/test files, one corpus file to split, or a
// synthetic spec to generate and split.
struct DataConfig {
  std::string taxonomy;
  std::string format;  // "tsv", "csv", or empty to infer from the extension
  std::string corpus;
  std::string train;
  std::string val;
  std::string test;
  nlohmann::json synthetic;  // inline spec object, or null
  SplitRatios split;
  // Removed from every split and kept aside for proximity analysis.
  std::vector<std::string> holdout_labels;
};

struct TrainConfig {
  std::string preset = "desk";
  HeadMode mode = HeadMode::Softmax;
  int epochs = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_seq_length = 32;
  std::size_t embed_dim = 32;
  std::size_t kernel1 = 6;
  std::size_t kernel2 = 4;
  std::size_t filters1 = 32;
  std::size_t filters2 = 64;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  std::array<double, 2> head_weights{1.0, 1.0};  // valence, arousal
  int min_freq = 1;
  std::uint64_t seed = 1;
  DataConfig data;

  void validate() const;
  AdamWOptions optimizer() const;
  ModelConfig model_config(std::size_t vocab_size, std::size_t output_width) const;
};

// "desk": E=32, filters [32, 64], FFNN [64, 32], lr 1e-3, T=32.
// "paper": E=768, filters [1024, 2048], FFNN [2048, 768], lr 0.6e-5, T=200.
// Both: kernels [6, 4], batch 16, 10 epochs.
TrainConfig preset_config(std::string_view name);

nlohmann::json train_config_to_json(const TrainConfig& config);
// Fields present in `doc` override `base`; unknown fields are rejected.
// Relative data paths resolve against `base_dir`.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base,
                                   const std::filesystem::path& base_dir = {});

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_accuracy;
  std::optional<double> val_macro_f1;
  std::optional<double> val_mean_error_distance;
  std::optional<double> val_mean_distance_all;
  double seconds = 0.0;

  nlohmann::json to_json() const;
  static EpochRecord from_json(const nlohmann::json& doc);
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// One training run. Owns its model and optimizer. Batches are reshuffled
// every epoch from (seed, epoch), so a run resumed from a state checkpoint
// ends with the same parameters as an uninterrupted one.
class Trainer {
 public:
  Trainer(TrainConfig config, EmotionTaxonomy taxonomy, const LabeledCorpus& train,
          const LabeledCorpus& val);
  // Continue from a state checkpoint; the vocabulary is taken from it.
  static Trainer resume(const Checkpoint& state, const LabeledCorpus& train,
                        const LabeledCorpus& val);

  bool finished() const { return completed_ >= config_.epochs; }
  int completed_epochs() const { return completed_; }
  // Throws RuntimeFailure on a non-finite loss, naming epoch, batch and value.
  const EpochRecord& run_epoch();
  void run(const std::function<void(const Trainer&)>& after_epoch = {});

  const TrainConfig& config() const { return config_; }
  const TrainHistory& history() const { return history_; }
  const ClassifierModel<float>& model() const { return model_; }
  int best_epoch() const { return best_epoch_; }

  Checkpoint final_checkpoint() const;
  Checkpoint best_checkpoint() const;
  // Final checkpoint plus optimizer moments and best-model tracking.
  Checkpoint state_checkpoint() const;

 private:
  // A fresh model is initialized from the seed when `model` is empty.
  Trainer(TrainConfig config, EmotionTaxonomy taxonomy, Vocabulary vocabulary,
          std::optional<ClassifierModel<float>> model, const LabeledCorpus& train,
          const LabeledCorpus& val);
  void encode_training_set(const LabeledCorpus& train);
  // Higher is better.
  double selection_score(const MetricsReport& report) const;

  TrainConfig config_;
  EmotionTaxonomy taxonomy_;
  Vocabulary vocabulary_;
  ClassifierModel<float> model_;
  AdamWState<float> optimizer_;
  ClassifierModel<float> best_model_;
  double best_score_ = 0.0;
  int best_epoch_ = 0;
  int completed_ = 0;
  TrainHistory history_;
  LabeledCorpus val_;
  std::vector<std::int32_t> train_ids_;  // [N, T]
  Tensor<float> train_targets_;          // [N, output_width]
  std::size_t train_rows_ = 0;
};

struct TrainResult {
  Checkpoint final_model;
  Checkpoint best_model;
  TrainHistory history;
};

TrainResult train(const TrainConfig& config, const EmotionTaxonomy& taxonomy,
                  const LabeledCorpus& train, const LabeledCorpus& val);

}  // namespace ordemo
