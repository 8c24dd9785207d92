#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ordemo/data.hpp"
#include "ordemo/predict.hpp"
#include "ordemo/taxonomy.hpp"

namespace ordemo {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;
using DistanceHistogram = std::map<int, std::size_t>;

struct PredictionPair {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  bool off_grid = false;
  bool operator==(const PredictionPair&) const = default;
};

struct ClassMetrics {
  std::string label;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Distances are rank gaps (1d taxonomy) or L1 cell gaps (2d). Means and
// maxima over misclassified examples only; mean_distance_all averages over
// every example with correct ones counted as 0.
struct MetricsReport {
  static constexpr int kSchemaVersion = 1;

  std::vector<std::string> labels;
  std::string distance_kind;  // "rank" or "grid-l1"
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;  // rows gold, columns predicted
  DistanceHistogram error_histogram;
  double mean_error_distance = 0.0;
  int max_error_distance = 0;
  double mean_distance_all = 0.0;
  // 2d taxonomies only.
  std::optional<DistanceHistogram> chebyshev_histogram;
  std::optional<double> mean_chebyshev_distance;
  std::optional<int> max_chebyshev_distance;
  double off_grid_rate = 0.0;
};

ConfusionMatrix confusion_matrix(std::size_t classes, std::span<const PredictionPair> pairs);

// Unweighted mean of per-class F1 = 2TP / (2TP + FP + FN); classes with
// neither gold nor predicted examples are left out. Throws on a non-square
// matrix.
double macro_f1(const ConfusionMatrix& confusion);

// Error distance -> count over misclassified (gold, predicted) label pairs.
DistanceHistogram error_histogram(std::span<const std::pair<std::string, std::string>> pairs,
                                  const EmotionTaxonomy& taxonomy);

// Every report field is a function of the pair list alone.
MetricsReport report_from_pairs(const EmotionTaxonomy& taxonomy,
                                std::span<const PredictionPair> pairs);

// Predicts every record; throws ValidationError on an empty corpus, a label
// outside the taxonomy, or a text that is empty after tokenization.
MetricsReport evaluate(const Predictor& predictor, const LabeledCorpus& corpus,
                       std::vector<PredictionPair>* pairs_out = nullptr);

struct ProximityReport {
  std::string label;
  Cell true_cell;
  std::size_t examples = 0;
  double mean_distance = 0.0;
  DistanceHistogram distribution;  // L1 distance -> count, 0 included
  std::map<Cell, std::size_t> predicted_cells;
};

// Distance from each decoded cell to the held-out label's cell. The corpus
// must contain only `held_out_label` records.
ProximityReport holdout_proximity(const Predictor& predictor, const EmotionTaxonomy& taxonomy,
                                  std::string_view held_out_label, const LabeledCorpus& corpus);

nlohmann::json report_to_json(const MetricsReport& report);
nlohmann::json proximity_to_json(const ProximityReport& report);
// Header row and first column carry label names.
std::string confusion_csv(const MetricsReport& report);
// `distance,count`, one row per non-empty bucket, ascending.
std::string histogram_csv(const DistanceHistogram& histogram);
// `gold,predicted,off_grid` with label names.
std::string pairs_csv(const EmotionTaxonomy& taxonomy, std::span<const PredictionPair> pairs);
std::vector<PredictionPair> parse_pairs_csv(const EmotionTaxonomy& taxonomy, std::string_view csv);

}  // namespace ordemo
