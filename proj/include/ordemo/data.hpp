#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "ordemo/taxonomy.hpp"

namespace ordemo {

struct Record {
  std::string text;
  std::string label;
  bool operator==(const Record&) const = default;
};

struct LabeledCorpus {
  std::vector<Record> records;
  std::string provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// tsv: `text<TAB>label` per line, no header, LF or CRLF line ends.
// csv: RFC 4180 with a required `text,label` header row.
enum class CorpusFormat { Tsv, Csv };

CorpusFormat parse_corpus_format(std::string_view name);
// ".csv" -> Csv, anything else -> Tsv.
CorpusFormat format_for_path(const std::filesystem::path& path);

// Enforces: every label in the taxonomy, no empty texts. Errors name the
// 1-based row (for csv, the header is row 1).
LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format,
                           const EmotionTaxonomy& taxonomy, std::string provenance = {});
LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const EmotionTaxonomy& taxonomy);
std::string serialize_corpus(const LabeledCorpus& corpus, CorpusFormat format);

// Records whose label is (keep = true) or is not (keep = false) in `labels`.
LabeledCorpus select_labels(const LabeledCorpus& corpus, const std::vector<std::string>& labels,
                            bool keep);

// Lowercases ASCII, splits on Unicode whitespace, strips leading and
// trailing ASCII punctuation from each token, drops tokens left empty.
std::vector<std::string> normalize_tokens(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPadding = 0;
  static constexpr std::int32_t kUnknown = 1;

  Vocabulary();
  // `tokens` in id order; the first receives id 2.
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_freq);

  std::int32_t id(std::string_view token) const;
  // Including the two reserved ids.
  std::size_t size() const { return 2 + tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::int32_t id) const;
  int min_freq() const { return min_freq_; }
  std::string hash() const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && min_freq_ == other.min_freq_;
  }

 private:
  std::vector<std::string> tokens_;
  int min_freq_ = 1;
  std::unordered_map<std::string, std::int32_t> lookup_;
};

// Tokens with frequency >= min_freq, ordered by frequency descending then
// lexicographically, ids from 2.
Vocabulary build_vocab(const LabeledCorpus& corpus, int min_freq);

// Exactly max_len ids: known tokens, 1 for unknown, truncated, right-padded
// with 0.
std::vector<std::int32_t> tokenize(std::string_view text, const Vocabulary& vocab,
                                   std::size_t max_len);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  LabeledCorpus train;
  LabeledCorpus val;
  LabeledCorpus test;
  std::vector<std::string> warnings;
};

// Stratified by label: each label's records are shuffled under `seed` and
// cut into round(n*val) validation and round(n*test) test records, the rest
// train. A label with fewer than 3 records goes entirely to train and is
// reported in `warnings`.
CorpusSplit split_corpus(const LabeledCorpus& corpus, SplitRatios ratios, std::uint64_t seed);

// Desk-scale stand-in for a labeled emotion corpus. Every position of every
// example is a class marker with probability p_signal, otherwise a filler
// word w0..w{filler-1}. With probability p_confuse a marker is replaced by
// the marker of an adjacent class.
//
// 1d taxonomies: the marker of rank r is "rank<r>"; adjacent means rank r-1
// or r+1.
// 2d taxonomies, "class" markers: the marker of cell (v, a) is "v<v>a<a>";
// adjacent means a labeled cell at L1 distance 1, picked uniformly. A class
// with no labeled neighbor keeps its marker.
// 2d taxonomies, "axis" markers: each marker names one axis, picked with
// probability 1/2: "valence<v>" or "arousal<a>"; confusion moves that axis by
// one level.
enum class MarkerScheme { Class, Axis };

struct SyntheticSpec {
  EmotionTaxonomy taxonomy = EmotionTaxonomy::one_d({"low", "high"}, {0, 1});
  std::size_t examples_per_class = 100;
  double p_signal = 0.5;
  double p_confuse = 0.0;
  std::size_t sequence_length = 16;
  std::uint64_t seed = 1;
  std::size_t filler_vocabulary = 50;
  std::vector<std::string> exclude_labels;
  MarkerScheme markers = MarkerScheme::Class;

  void validate() const;
};

// JSON document: {"taxonomy": "<path>" | {inline taxonomy},
//   "examples_per_class", "p_signal", "p_confuse", "sequence_length", "seed",
//   optional "filler_vocabulary", optional "exclude_labels"}.
// Relative taxonomy paths resolve against `base_dir`.
SyntheticSpec parse_synthetic_spec(const nlohmann::json& doc, const std::filesystem::path& base_dir);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
// Self-contained document with the taxonomy inlined.
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

// Records in taxonomy order, examples_per_class per label (excluded labels
// omitted). Each label draws from its own seeded stream.
LabeledCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace ordemo
