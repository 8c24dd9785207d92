#include "ordemo/predict.hpp"

#include <algorithm>
#include <iterator>

#include "ordemo/checkpoint.hpp"
#include "ordemo/error.hpp"

namespace ordemo {

using nlohmann::json;

json PredictionOutcome::to_json() const {
  json out = {{"label", label}, {"label_index", label_index}, {"off_grid", off_grid},
              {"raw", raw}};
  if (rank) out["rank"] = *rank;
  if (cell) out["cell"] = {cell->valence, cell->arousal};
  return out;
}

PredictionOutcome decode_outputs(const EmotionTaxonomy& taxonomy, HeadMode mode,
                                 std::span<const double> raw) {
  require_compatible(mode, taxonomy);
  if (raw.size() != output_width(mode, taxonomy)) {
    throw ValidationError("decode: output width does not match the taxonomy");
  }
  PredictionOutcome out;
  out.raw.assign(raw.begin(), raw.end());
  switch (mode) {
    case HeadMode::Softmax:
      out.label_index = static_cast<std::size_t>(
          std::distance(raw.begin(), std::max_element(raw.begin(), raw.end())));
      break;
    case HeadMode::Ordinal1D: {
      const int level = decode_thermometer(raw);
      out.label_index = *taxonomy.label_at_rank(level);
      break;
    }
    case HeadMode::Ordinal2D: {
      const std::size_t half = raw.size() / 2;
      const Cell c{decode_thermometer(raw.subspan(0, half)),
                   decode_thermometer(raw.subspan(half))};
      if (auto idx = taxonomy.label_at_cell(c)) {
        out.label_index = *idx;
      } else {
        out.label_index = taxonomy.nearest_label(c);
        out.off_grid = true;
      }
      out.cell = c;
      break;
    }
  }
  out.label = taxonomy.label(out.label_index);
  if (taxonomy.mode() == TaxonomyMode::OneD) {
    out.rank = taxonomy.rank(out.label_index);
  } else if (!out.cell) {
    out.cell = taxonomy.cell(out.label_index);
  }
  return out;
}

Predictor::Predictor(ClassifierModel<float> model, Vocabulary vocabulary, EmotionTaxonomy taxonomy)
    : model_(std::move(model)), vocabulary_(std::move(vocabulary)), taxonomy_(std::move(taxonomy)) {
  const HeadMode head = model_.config().head;
  if (model_.config().output_width != output_width(head, taxonomy_)) {
    throw ValidationError("model output width does not match the taxonomy");
  }
  if (model_.config().vocab_size != vocabulary_.size()) {
    throw ValidationError("model vocabulary size does not match the vocabulary");
  }
}

Predictor Predictor::from_checkpoint(const Checkpoint& ck) {
  return Predictor(ck.model, ck.vocabulary, ck.taxonomy);
}

PredictionOutcome Predictor::predict(std::string_view text) const {
  const std::string owned(text);
  return predict_batch(std::span<const std::string>(&owned, 1)).front();
}

std::vector<PredictionOutcome> Predictor::predict_batch(std::span<const std::string> texts) const {
  constexpr std::size_t kChunk = 64;
  const std::size_t length = model_.config().max_seq_length;
  const std::size_t width = model_.config().output_width;
  std::vector<PredictionOutcome> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += kChunk) {
    const std::size_t rows = std::min(kChunk, texts.size() - start);
    TokenBatch batch{rows, length, {}};
    batch.ids.reserve(rows * length);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto ids = tokenize(texts[start + r], vocabulary_, length);
      if (ids.front() == Vocabulary::kPadding) {
        throw ValidationError("text is empty after tokenization: \"" + texts[start + r] + "\"");
      }
      batch.ids.insert(batch.ids.end(), ids.begin(), ids.end());
    }
    const auto result = forward(model_, batch);
    std::vector<double> raw(width);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < width; ++j) raw[j] = static_cast<double>(result.outputs(r, j));
      out.push_back(decode_outputs(taxonomy_, model_.config().head, raw));
    }
  }
  return out;
}

}  // namespace ordemo
