#include "ordemo/taxonomy.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "json.hpp"
#include "ordemo/error.hpp"
#include "ordemo/hash.hpp"

namespace ordemo {

using nlohmann::json;

int l1_distance(Cell a, Cell b) {
  return std::abs(a.valence - b.valence) + std::abs(a.arousal - b.arousal);
}

int chebyshev_distance(Cell a, Cell b) {
  return std::max(std::abs(a.valence - b.valence), std::abs(a.arousal - b.arousal));
}

namespace {

void check_labels(const std::vector<std::string>& labels) {
  if (labels.size() < 2) {
    throw ValidationError("taxonomy needs at least 2 labels, got " +
                          std::to_string(labels.size()));
  }
  std::set<std::string_view> seen;
  for (const auto& label : labels) {
    if (label.empty()) throw ValidationError("taxonomy label names must be non-empty");
    if (!seen.insert(label).second) throw ValidationError("duplicate label: " + label);
  }
}

}  // namespace

EmotionTaxonomy EmotionTaxonomy::one_d(std::vector<std::string> labels, std::vector<int> ranks) {
  check_labels(labels);
  if (ranks.size() != labels.size()) throw ValidationError("one rank per label required");
  const int k = static_cast<int>(labels.size());
  std::vector<bool> used(labels.size(), false);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < 0 || ranks[i] >= k) {
      throw ValidationError("rank out of range [0," + std::to_string(k - 1) + "] for label " +
                            labels[i] + ": " + std::to_string(ranks[i]));
    }
    if (used[ranks[i]]) {
      throw ValidationError("duplicate rank " + std::to_string(ranks[i]) + " at label " +
                            labels[i]);
    }
    used[ranks[i]] = true;
  }
  EmotionTaxonomy t;
  t.mode_ = TaxonomyMode::OneD;
  t.labels_ = std::move(labels);
  t.ranks_ = std::move(ranks);
  t.index_labels();
  return t;
}

EmotionTaxonomy EmotionTaxonomy::two_d(std::vector<std::string> labels, std::vector<Cell> cells,
                                       int grid_size) {
  check_labels(labels);
  if (cells.size() != labels.size()) throw ValidationError("one cell per label required");
  if (grid_size < 2) throw ValidationError("grid_size must be >= 2");
  if (labels.size() > static_cast<std::size_t>(grid_size) * grid_size) {
    throw ValidationError("more labels than grid cells");
  }
  std::set<Cell> used;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell c = cells[i];
    if (c.valence < 0 || c.valence >= grid_size || c.arousal < 0 || c.arousal >= grid_size) {
      throw ValidationError("cell out of range for label " + labels[i] + ": (" +
                            std::to_string(c.valence) + "," + std::to_string(c.arousal) + ")");
    }
    if (!used.insert(c).second) {
      throw ValidationError("duplicate cell (" + std::to_string(c.valence) + "," +
                            std::to_string(c.arousal) + ") at label " + labels[i]);
    }
  }
  EmotionTaxonomy t;
  t.mode_ = TaxonomyMode::TwoD;
  t.labels_ = std::move(labels);
  t.cells_ = std::move(cells);
  t.grid_size_ = grid_size;
  t.index_labels();
  return t;
}

void EmotionTaxonomy::index_labels() {
  lookup_.clear();
  for (std::size_t i = 0; i < labels_.size(); ++i) lookup_.emplace(labels_[i], i);
}

std::optional<std::size_t> EmotionTaxonomy::find(std::string_view label) const {
  const auto it = lookup_.find(std::string(label));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmotionTaxonomy::index_of(std::string_view label) const {
  if (auto idx = find(label)) return *idx;
  throw ValidationError("unknown label: " + std::string(label));
}

int EmotionTaxonomy::rank(std::size_t index) const {
  if (mode_ != TaxonomyMode::OneD) throw ValidationError("rank requested on a 2D taxonomy");
  return ranks_.at(index);
}

std::optional<std::size_t> EmotionTaxonomy::label_at_rank(int rank) const {
  if (mode_ != TaxonomyMode::OneD) throw ValidationError("rank requested on a 2D taxonomy");
  for (std::size_t i = 0; i < ranks_.size(); ++i) {
    if (ranks_[i] == rank) return i;
  }
  return std::nullopt;
}

Cell EmotionTaxonomy::cell(std::size_t index) const {
  if (mode_ != TaxonomyMode::TwoD) throw ValidationError("cell requested on a 1D taxonomy");
  return cells_.at(index);
}

int EmotionTaxonomy::grid_size() const {
  if (mode_ != TaxonomyMode::TwoD) throw ValidationError("grid size requested on a 1D taxonomy");
  return grid_size_;
}

std::optional<std::size_t> EmotionTaxonomy::label_at_cell(Cell c) const {
  if (mode_ != TaxonomyMode::TwoD) throw ValidationError("cell requested on a 1D taxonomy");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i] == c) return i;
  }
  return std::nullopt;
}

std::size_t EmotionTaxonomy::nearest_label(Cell c) const {
  if (mode_ != TaxonomyMode::TwoD) throw ValidationError("cell requested on a 1D taxonomy");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells_.size(); ++i) {
    const int d = l1_distance(cells_[i], c);
    const int best_d = l1_distance(cells_[best], c);
    // Cell ordering is (valence, arousal), which is the tie-break order.
    if (d < best_d || (d == best_d && cells_[i] < cells_[best])) best = i;
  }
  return best;
}

int EmotionTaxonomy::levels() const {
  return mode_ == TaxonomyMode::OneD ? static_cast<int>(labels_.size()) : grid_size_;
}

int EmotionTaxonomy::distance(std::size_t a, std::size_t b) const {
  if (mode_ == TaxonomyMode::OneD) return std::abs(ranks_.at(a) - ranks_.at(b));
  return l1_distance(cells_.at(a), cells_.at(b));
}

namespace {

int require_int(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ValidationError(where + ": field '" + key + "' must be an integer");
  }
  return v.get<int>();
}

}  // namespace

EmotionTaxonomy load_taxonomy(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("taxonomy document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("taxonomy document must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "mode" && key != "labels" && key != "grid_size" && key != "description") {
      throw ValidationError("unknown taxonomy field: " + key);
    }
  }
  if (!doc.contains("mode") || !doc["mode"].is_string()) {
    throw ValidationError("taxonomy document needs a string 'mode' (\"1d\" or \"2d\")");
  }
  const auto mode = doc["mode"].get<std::string>();
  if (mode != "1d" && mode != "2d") throw ValidationError("unknown taxonomy mode: " + mode);
  const bool two_d = mode == "2d";
  if (!doc.contains("labels") || !doc["labels"].is_array()) {
    throw ValidationError("taxonomy document needs a 'labels' array");
  }
  if (two_d && !doc.contains("grid_size")) throw ValidationError("2d taxonomy needs grid_size");
  if (!two_d && doc.contains("grid_size")) {
    throw ValidationError("mixed 1D/2D fields: grid_size given in a 1d taxonomy");
  }

  std::vector<std::string> names;
  std::vector<int> ranks;
  std::vector<Cell> cells;
  std::size_t row = 0;
  for (const auto& rec : doc["labels"]) {
    const std::string where = "label record " + std::to_string(row++);
    if (!rec.is_object()) throw ValidationError(where + ": must be an object");
    if (!rec.contains("name") || !rec["name"].is_string()) {
      throw ValidationError(where + ": needs a string 'name'");
    }
    for (const auto& [key, _] : rec.items()) {
      const bool one_d_key = key == "rank";
      const bool two_d_key = key == "valence" || key == "arousal";
      if (key == "name") continue;
      if (!one_d_key && !two_d_key) throw ValidationError(where + ": unknown field: " + key);
      if (one_d_key == two_d) {
        throw ValidationError(where + ": mixed 1D/2D fields: '" + key + "' in a " + mode +
                              " taxonomy");
      }
    }
    names.push_back(rec["name"].get<std::string>());
    if (two_d) {
      if (!rec.contains("valence") || !rec.contains("arousal")) {
        throw ValidationError(where + ": 2d records need valence and arousal");
      }
      cells.push_back({require_int(rec, "valence", where), require_int(rec, "arousal", where)});
    } else {
      if (!rec.contains("rank")) throw ValidationError(where + ": 1d records need rank");
      ranks.push_back(require_int(rec, "rank", where));
    }
  }
  if (two_d) {
    if (!doc["grid_size"].is_number_integer()) throw ValidationError("grid_size must be an integer");
    return EmotionTaxonomy::two_d(std::move(names), std::move(cells), doc["grid_size"].get<int>());
  }
  return EmotionTaxonomy::one_d(std::move(names), std::move(ranks));
}

EmotionTaxonomy load_taxonomy_file(const std::filesystem::path& path) {
  try {
    return load_taxonomy(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_taxonomy(const EmotionTaxonomy& taxonomy) {
  json doc;
  json labels = json::array();
  if (taxonomy.mode() == TaxonomyMode::OneD) {
    doc["mode"] = "1d";
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
      labels.push_back({{"name", taxonomy.label(i)}, {"rank", taxonomy.rank(i)}});
    }
  } else {
    doc["mode"] = "2d";
    doc["grid_size"] = taxonomy.grid_size();
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
      const Cell c = taxonomy.cell(i);
      labels.push_back(
          {{"name", taxonomy.label(i)}, {"valence", c.valence}, {"arousal", c.arousal}});
    }
  }
  doc["labels"] = std::move(labels);
  return doc.dump(2) + "\n";
}

int ordinal_distance(const EmotionTaxonomy& taxonomy, std::string_view a, std::string_view b) {
  if (taxonomy.mode() != TaxonomyMode::OneD) {
    throw ValidationError("ordinal_distance requires a 1D taxonomy");
  }
  return taxonomy.distance(taxonomy.index_of(a), taxonomy.index_of(b));
}

int grid_distance(const EmotionTaxonomy& taxonomy, std::string_view a, std::string_view b) {
  if (taxonomy.mode() != TaxonomyMode::TwoD) {
    throw ValidationError("grid_distance requires a 2D taxonomy");
  }
  return taxonomy.distance(taxonomy.index_of(a), taxonomy.index_of(b));
}

}  // namespace ordemo
