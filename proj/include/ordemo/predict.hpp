#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ordemo/data.hpp"
#include "ordemo/model.hpp"
#include "ordemo/taxonomy.hpp"

namespace ordemo {

struct Checkpoint;

struct PredictionOutcome {
  std::size_t label_index = 0;
  std::string label;
  std::optional<int> rank;   // 1d taxonomies
  std::optional<Cell> cell;  // 2d taxonomies; the decoded cell, labeled or not
  // The decoded cell holds no label; `label` is the nearest labeled cell.
  bool off_grid = false;
  std::vector<double> raw;

  nlohmann::json to_json() const;
};

// softmax: argmax, ties to the lower index. ordinal-1d: nearest thermometer
// codeword -> label at that rank. ordinal-2d: both halves decoded to a cell;
// an unlabeled cell resolves to the nearest labeled cell (L1, ties to lower
// valence then lower arousal) and sets off_grid.
PredictionOutcome decode_outputs(const EmotionTaxonomy& taxonomy, HeadMode mode,
                                 std::span<const double> raw);

class Predictor {
 public:
  Predictor(ClassifierModel<float> model, Vocabulary vocabulary, EmotionTaxonomy taxonomy);
  static Predictor from_checkpoint(const Checkpoint& checkpoint);

  // Throws ValidationError when the text is empty after tokenization.
  PredictionOutcome predict(std::string_view text) const;
  std::vector<PredictionOutcome> predict_batch(std::span<const std::string> texts) const;

  const EmotionTaxonomy& taxonomy() const { return taxonomy_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const ClassifierModel<float>& model() const { return model_; }
  HeadMode mode() const { return model_.config().head; }

 private:
  ClassifierModel<float> model_;
  Vocabulary vocabulary_;
  EmotionTaxonomy taxonomy_;
};

}  // namespace ordemo
