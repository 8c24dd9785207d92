#include "ordemo/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ordemo/error.hpp"

namespace ordemo {

using nlohmann::json;

// ---- metrics ----------------------------------------------------------------

ConfusionMatrix confusion_matrix(std::size_t classes, std::span<const PredictionPair> pairs) {
  ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
  for (const auto& p : pairs) {
    if (p.gold >= classes || p.predicted >= classes) {
      throw ValidationError("prediction pair refers to a class outside the taxonomy");
    }
    ++m[p.gold][p.predicted];
  }
  return m;
}

namespace {

std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& confusion) {
  const std::size_t k = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != k) throw ValidationError("confusion matrix must be square");
  }
  std::vector<ClassMetrics> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t gold = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      gold += confusion[c][j];
      predicted += confusion[j][c];
    }
    const std::size_t tp = confusion[c][c];
    ClassMetrics& m = out[c];
    m.support = gold;
    m.predicted = predicted;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    const std::size_t denom = 2 * tp + (predicted - tp) + (gold - tp);
    m.f1 = denom ? static_cast<double>(2 * tp) / static_cast<double>(denom) : 0.0;
  }
  return out;
}

double mean_f1(const std::vector<ClassMetrics>& metrics) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& m : metrics) {
    if (m.support == 0 && m.predicted == 0) continue;
    sum += m.f1;
    ++counted;
  }
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

}  // namespace

double macro_f1(const ConfusionMatrix& confusion) { return mean_f1(class_metrics(confusion)); }

DistanceHistogram error_histogram(std::span<const std::pair<std::string, std::string>> pairs,
                                  const EmotionTaxonomy& taxonomy) {
  DistanceHistogram h;
  for (const auto& [gold, predicted] : pairs) {
    const std::size_t g = taxonomy.index_of(gold), p = taxonomy.index_of(predicted);
    if (g != p) ++h[taxonomy.distance(g, p)];
  }
  return h;
}

MetricsReport report_from_pairs(const EmotionTaxonomy& taxonomy,
                                std::span<const PredictionPair> pairs) {
  if (pairs.empty()) throw ValidationError("cannot evaluate an empty corpus");
  MetricsReport r;
  r.labels = taxonomy.labels();
  const bool two_d = taxonomy.mode() == TaxonomyMode::TwoD;
  r.distance_kind = two_d ? "grid-l1" : "rank";
  r.total = pairs.size();
  r.confusion = confusion_matrix(taxonomy.size(), pairs);
  r.per_class = class_metrics(r.confusion);
  for (std::size_t c = 0; c < taxonomy.size(); ++c) r.per_class[c].label = taxonomy.label(c);
  r.macro_f1 = mean_f1(r.per_class);

  std::size_t errors = 0, distance_sum = 0, chebyshev_sum = 0, off_grid = 0;
  int chebyshev_max = 0;
  DistanceHistogram chebyshev;
  for (const auto& p : pairs) {
    if (p.off_grid) ++off_grid;
    if (p.gold == p.predicted) {
      ++r.correct;
      continue;
    }
    ++errors;
    const int d = taxonomy.distance(p.gold, p.predicted);
    ++r.error_histogram[d];
    distance_sum += static_cast<std::size_t>(d);
    r.max_error_distance = std::max(r.max_error_distance, d);
    if (two_d) {
      const int cd = chebyshev_distance(taxonomy.cell(p.gold), taxonomy.cell(p.predicted));
      ++chebyshev[cd];
      chebyshev_sum += static_cast<std::size_t>(cd);
      chebyshev_max = std::max(chebyshev_max, cd);
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.mean_error_distance =
      errors ? static_cast<double>(distance_sum) / static_cast<double>(errors) : 0.0;
  r.mean_distance_all = static_cast<double>(distance_sum) / static_cast<double>(r.total);
  r.off_grid_rate = static_cast<double>(off_grid) / static_cast<double>(r.total);
  if (two_d) {
    r.chebyshev_histogram = std::move(chebyshev);
    r.mean_chebyshev_distance =
        errors ? static_cast<double>(chebyshev_sum) / static_cast<double>(errors) : 0.0;
    r.max_chebyshev_distance = chebyshev_max;
  }
  return r;
}

MetricsReport evaluate(const Predictor& predictor, const LabeledCorpus& corpus,
                       std::vector<PredictionPair>* pairs_out) {
  if (corpus.empty()) throw ValidationError("cannot evaluate an empty corpus");
  const EmotionTaxonomy& taxonomy = predictor.taxonomy();
  std::vector<std::string> texts;
  std::vector<std::size_t> gold;
  texts.reserve(corpus.size());
  gold.reserve(corpus.size());
  for (const auto& r : corpus.records) {
    gold.push_back(taxonomy.index_of(r.label));
    texts.push_back(r.text);
  }
  const auto outcomes = predictor.predict_batch(texts);
  std::vector<PredictionPair> pairs;
  pairs.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    pairs.push_back({gold[i], outcomes[i].label_index, outcomes[i].off_grid});
  }
  MetricsReport report = report_from_pairs(taxonomy, pairs);
  if (pairs_out) *pairs_out = std::move(pairs);
  return report;
}

ProximityReport holdout_proximity(const Predictor& predictor, const EmotionTaxonomy& taxonomy,
                                  std::string_view held_out_label, const LabeledCorpus& corpus) {
  if (taxonomy.mode() != TaxonomyMode::TwoD || predictor.mode() != HeadMode::Ordinal2D) {
    throw ValidationError("holdout proximity needs an ordinal-2d model and a 2d taxonomy");
  }
  if (corpus.empty()) throw ValidationError("holdout corpus is empty");
  ProximityReport report;
  report.label = std::string(held_out_label);
  report.true_cell = taxonomy.cell(taxonomy.index_of(held_out_label));
  std::vector<std::string> texts;
  for (const auto& r : corpus.records) {
    if (r.label != held_out_label) {
      throw ValidationError("holdout corpus contains label '" + r.label + "'");
    }
    texts.push_back(r.text);
  }
  std::size_t sum = 0;
  for (const auto& outcome : predictor.predict_batch(texts)) {
    const int d = l1_distance(*outcome.cell, report.true_cell);
    ++report.distribution[d];
    ++report.predicted_cells[*outcome.cell];
    sum += static_cast<std::size_t>(d);
  }
  report.examples = texts.size();
  report.mean_distance = static_cast<double>(sum) / static_cast<double>(report.examples);
  return report;
}

// ---- serialization -----------------------------------------------------------

namespace {

json histogram_json(const DistanceHistogram& h) {
  json out = json::object();
  for (const auto& [d, n] : h) out[std::to_string(d)] = n;
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  json per_class = json::array();
  for (const auto& m : r.per_class) {
    per_class.push_back({{"label", m.label},
                         {"support", m.support},
                         {"predicted", m.predicted},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1}});
  }
  json out = {{"schema_version", MetricsReport::kSchemaVersion},
              {"labels", r.labels},
              {"distance_kind", r.distance_kind},
              {"total", r.total},
              {"correct", r.correct},
              {"accuracy", r.accuracy},
              {"macro_f1", r.macro_f1},
              {"per_class", per_class},
              {"confusion", r.confusion},
              {"error_histogram", histogram_json(r.error_histogram)},
              {"mean_error_distance", r.mean_error_distance},
              {"max_error_distance", r.max_error_distance},
              {"mean_distance_all", r.mean_distance_all},
              {"off_grid_rate", r.off_grid_rate}};
  if (r.chebyshev_histogram) {
    out["chebyshev_histogram"] = histogram_json(*r.chebyshev_histogram);
    out["mean_chebyshev_distance"] = *r.mean_chebyshev_distance;
    out["max_chebyshev_distance"] = *r.max_chebyshev_distance;
  }
  return out;
}

json proximity_to_json(const ProximityReport& r) {
  json cells = json::array();
  for (const auto& [c, n] : r.predicted_cells) {
    cells.push_back({{"cell", {c.valence, c.arousal}}, {"count", n}});
  }
  return {{"label", r.label},
          {"true_cell", {r.true_cell.valence, r.true_cell.arousal}},
          {"examples", r.examples},
          {"mean_distance", r.mean_distance},
          {"distribution", histogram_json(r.distribution)},
          {"predicted_cells", cells}};
}

std::string confusion_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "gold\\predicted";
  for (const auto& l : r.labels) out << ',' << csv_escape(l);
  out << '\n';
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    out << csv_escape(r.labels[i]);
    for (const auto n : r.confusion[i]) out << ',' << n;
    out << '\n';
  }
  return out.str();
}

std::string histogram_csv(const DistanceHistogram& h) {
  std::ostringstream out;
  out << "distance,count\n";
  for (const auto& [d, n] : h) out << d << ',' << n << '\n';
  return out.str();
}

std::string pairs_csv(const EmotionTaxonomy& taxonomy, std::span<const PredictionPair> pairs) {
  std::ostringstream out;
  out << "gold,predicted,off_grid\n";
  for (const auto& p : pairs) {
    out << csv_escape(taxonomy.label(p.gold)) << ',' << csv_escape(taxonomy.label(p.predicted))
        << ',' << (p.off_grid ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<PredictionPair> parse_pairs_csv(const EmotionTaxonomy& taxonomy, std::string_view csv) {
  std::vector<PredictionPair> pairs;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1) {
      if (line != "gold,predicted,off_grid") throw ValidationError("pairs csv: bad header");
      continue;
    }
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) {
      throw ValidationError("pairs csv row " + std::to_string(row) + ": expected 3 columns");
    }
    const std::string flag = line.substr(b + 1);
    if (flag != "0" && flag != "1") {
      throw ValidationError("pairs csv row " + std::to_string(row) + ": bad off_grid flag");
    }
    pairs.push_back({taxonomy.index_of(line.substr(0, a)),
                     taxonomy.index_of(line.substr(a + 1, b - a - 1)), flag == "1"});
  }
  return pairs;
}

}  // namespace ordemo
