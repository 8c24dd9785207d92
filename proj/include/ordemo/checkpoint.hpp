#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "ordemo/adamw.hpp"
#include "ordemo/data.hpp"
#include "ordemo/model.hpp"
#include "ordemo/taxonomy.hpp"

namespace ordemo {

// Optimizer and bookkeeping needed to resume training mid-run.
struct TrainingState {
  AdamWState<float> optimizer;
  int completed_epochs = 0;
  nlohmann::json history = nlohmann::json::array();
  ClassifierModel<float> best_model;
  double best_score = 0.0;
  int best_epoch = 0;
};

// Everything needed to predict with a trained model: architecture and
// weights, the vocabulary it was trained with, and its taxonomy.
struct Checkpoint {
  EmotionTaxonomy taxonomy;
  Vocabulary vocabulary;
  ClassifierModel<float> model;
  nlohmann::json train_config = nlohmann::json::object();
  std::optional<TrainingState> training;
};

// Binary layout, little-endian:
//   "ORDEMOCK" | u32 version | u64 header length | JSON header
//   | float32 tensor buffers in header order | 64-char hex SHA-256 of all
//   preceding bytes
// Round trips are bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Missing or corrupt files raise ValidationError naming the path.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

}  // namespace ordemo
