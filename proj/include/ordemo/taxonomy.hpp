#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ordemo {

enum class TaxonomyMode { OneD, TwoD };

// A cell of the valence x arousal grid, both coordinates in [0, G-1].
struct Cell {
  int valence = 0;
  int arousal = 0;
  auto operator<=>(const Cell&) const = default;
};

int l1_distance(Cell a, Cell b);
int chebyshev_distance(Cell a, Cell b);

// Immutable label set with an ordinal position per label: a valence rank in
// [0, K-1] (OneD) or a unique grid cell (TwoD).
class EmotionTaxonomy {
 public:
  static EmotionTaxonomy one_d(std::vector<std::string> labels, std::vector<int> ranks);
  static EmotionTaxonomy two_d(std::vector<std::string> labels, std::vector<Cell> cells,
                               int grid_size);

  TaxonomyMode mode() const { return mode_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t index) const { return labels_.at(index); }

  std::optional<std::size_t> find(std::string_view label) const;
  // Throws ValidationError for labels outside the taxonomy.
  std::size_t index_of(std::string_view label) const;

  // OneD only.
  int rank(std::size_t index) const;
  std::optional<std::size_t> label_at_rank(int rank) const;

  // TwoD only.
  Cell cell(std::size_t index) const;
  int grid_size() const;
  std::optional<std::size_t> label_at_cell(Cell cell) const;
  // Nearest labeled cell under L1, ties to lower valence then lower arousal.
  std::size_t nearest_label(Cell cell) const;

  // Number of ordinal levels per axis: K for OneD, G for TwoD.
  int levels() const;

  // Error distance between two labels by index: rank gap (OneD) or L1 cell
  // gap (TwoD).
  int distance(std::size_t a, std::size_t b) const;

  bool operator==(const EmotionTaxonomy& other) const {
    return mode_ == other.mode_ && labels_ == other.labels_ && ranks_ == other.ranks_ &&
           cells_ == other.cells_ && grid_size_ == other.grid_size_;
  }

 private:
  EmotionTaxonomy() = default;
  void index_labels();

  TaxonomyMode mode_ = TaxonomyMode::OneD;
  std::vector<std::string> labels_;
  std::vector<int> ranks_;
  std::vector<Cell> cells_;
  int grid_size_ = 0;
  std::unordered_map<std::string, std::size_t> lookup_;
};

// Taxonomy documents are JSON:
//   {"mode": "1d", "labels": [{"name": "sadness", "rank": 0}, ...]}
//   {"mode": "2d", "grid_size": 5,
//    "labels": [{"name": "grief", "valence": 0, "arousal": 0}, ...]}
// An optional top-level "description" string is allowed. Any other field
// is rejected.
EmotionTaxonomy load_taxonomy(std::string_view document);
EmotionTaxonomy load_taxonomy_file(const std::filesystem::path& path);
// Canonical document; load_taxonomy(serialize_taxonomy(t)) == t.
std::string serialize_taxonomy(const EmotionTaxonomy& taxonomy);

int ordinal_distance(const EmotionTaxonomy& taxonomy, std::string_view a, std::string_view b);
int grid_distance(const EmotionTaxonomy& taxonomy, std::string_view a, std::string_view b);

}  // namespace ordemo
