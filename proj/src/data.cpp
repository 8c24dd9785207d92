#include "ordemo/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "ordemo/error.hpp"
#include "ordemo/hash.hpp"
#include "ordemo/random.hpp"

namespace ordemo {

using nlohmann::json;

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::Tsv;
  if (name == "csv") return CorpusFormat::Csv;
  throw ValidationError("unknown corpus format: " + std::string(name) + " (expected tsv or csv)");
}

CorpusFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::Tsv;
}

namespace {

struct RawRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<RawRow> read_tsv(std::string_view content) {
  std::vector<RawRow> rows;
  std::size_t line = 0, pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view text = content.substr(pos, end - pos);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    ++line;
    RawRow row{line, {}};
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = text.find('\t', start);
      row.fields.emplace_back(text.substr(start, tab == std::string_view::npos ? text.npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(row));
    pos = end + 1;
  }
  return rows;
}

// RFC 4180: fields separated by commas, optionally double-quoted; quotes
// inside quoted fields are doubled; quoted fields may span lines.
std::vector<RawRow> read_csv(std::string_view content) {
  std::vector<RawRow> rows;
  std::size_t pos = 0, line = 1;
  while (pos < content.size()) {
    RawRow row{line, {}};
    std::string field;
    bool row_done = false;
    while (!row_done) {
      field.clear();
      if (pos < content.size() && content[pos] == '"') {
        ++pos;
        for (;;) {
          if (pos >= content.size()) {
            throw ValidationError("row " + std::to_string(row.line) + ": unterminated quoted field");
          }
          const char c = content[pos++];
          if (c == '"') {
            if (pos < content.size() && content[pos] == '"') {
              field.push_back('"');
              ++pos;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
            content[pos] != '\r') {
          throw ValidationError("row " + std::to_string(row.line) +
                                ": unexpected character after closing quote");
        }
      } else {
        while (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
               content[pos] != '\r') {
          if (content[pos] == '"') {
            throw ValidationError("row " + std::to_string(row.line) +
                                  ": quote inside an unquoted field");
          }
          field.push_back(content[pos++]);
        }
      }
      row.fields.push_back(field);
      if (pos >= content.size()) {
        row_done = true;
      } else if (content[pos] == ',') {
        ++pos;
      } else {
        if (content[pos] == '\r') ++pos;
        if (pos < content.size() && content[pos] == '\n') ++pos;
        ++line;
        row_done = true;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string csv_field(const std::string& s) {
  if (!needs_quotes(s)) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format,
                           const EmotionTaxonomy& taxonomy, std::string provenance) {
  std::vector<RawRow> rows = format == CorpusFormat::Tsv ? read_tsv(content) : read_csv(content);
  if (format == CorpusFormat::Csv) {
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"text", "label"}) {
      throw ValidationError("csv corpus needs the header row: text,label");
    }
    rows.erase(rows.begin());
  }
  LabeledCorpus corpus;
  corpus.provenance = std::move(provenance);
  corpus.records.reserve(rows.size());
  for (auto& row : rows) {
    const std::string where = "row " + std::to_string(row.line);
    if (row.fields.size() != 2) {
      throw ValidationError(where + ": expected 2 columns (text, label), found " +
                            std::to_string(row.fields.size()));
    }
    if (row.fields[0].empty()) throw ValidationError(where + ": empty text");
    if (!taxonomy.find(row.fields[1])) {
      throw ValidationError(where + ": unknown label '" + row.fields[1] + "'");
    }
    corpus.records.push_back({std::move(row.fields[0]), std::move(row.fields[1])});
  }
  return corpus;
}

LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const EmotionTaxonomy& taxonomy) {
  try {
    return parse_corpus(read_file(path), format, taxonomy, path.string());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_corpus(const LabeledCorpus& corpus, CorpusFormat format) {
  std::string out;
  if (format == CorpusFormat::Tsv) {
    for (const auto& r : corpus.records) {
      if (r.text.find_first_of("\t\r\n") != std::string::npos ||
          r.label.find_first_of("\t\r\n") != std::string::npos) {
        throw ValidationError("tsv records cannot contain tabs or line breaks");
      }
      out += r.text;
      out += '\t';
      out += r.label;
      out += '\n';
    }
    return out;
  }
  out = "text,label\r\n";
  for (const auto& r : corpus.records) {
    out += csv_field(r.text);
    out += ',';
    out += csv_field(r.label);
    out += "\r\n";
  }
  return out;
}

LabeledCorpus select_labels(const LabeledCorpus& corpus, const std::vector<std::string>& labels,
                            bool keep) {
  const std::set<std::string> wanted(labels.begin(), labels.end());
  LabeledCorpus out;
  out.provenance = corpus.provenance;
  for (const auto& r : corpus.records) {
    if (wanted.contains(r.label) == keep) out.records.push_back(r);
  }
  return out;
}

namespace {

// Decodes one UTF-8 code point at `pos`; malformed bytes decode as
// themselves (never whitespace).
char32_t next_code_point(std::string_view s, std::size_t pos, std::size_t& width) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  const unsigned char lead = byte(pos);
  std::size_t n = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xe ? 3
                                  : (lead >> 3) == 0x1e ? 4 : 0;
  if (n == 0 || pos + n > s.size()) {
    width = 1;
    return 0xfffd;
  }
  char32_t cp = n == 1 ? lead : lead & (0x7f >> n);
  for (std::size_t i = 1; i < n; ++i) {
    if ((byte(pos + i) & 0xc0) != 0x80) {
      width = 1;
      return 0xfffd;
    }
    cp = (cp << 6) | (byte(pos + i) & 0x3f);
  }
  width = n;
  return cp;
}

bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0d) || c == 0x20 || c == 0x85 || c == 0xa0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200a) || c == 0x2028 || c == 0x2029 || c == 0x202f ||
         c == 0x205f || c == 0x3000;
}

bool is_ascii_punct(char c) {
  return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c));
}

void flush_token(std::string& current, std::vector<std::string>& out) {
  std::size_t begin = 0, end = current.size();
  while (begin < end && is_ascii_punct(current[begin])) ++begin;
  while (end > begin && is_ascii_punct(current[end - 1])) --end;
  if (end > begin) out.push_back(current.substr(begin, end - begin));
  current.clear();
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t width = 1;
    const char32_t cp = next_code_point(text, pos, width);
    if (is_unicode_space(cp)) {
      flush_token(current, out);
    } else {
      for (std::size_t i = 0; i < width; ++i) {
        const char c = text[pos + i];
        current.push_back(static_cast<unsigned char>(c) < 0x80
                              ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                              : c);
      }
    }
    pos += width;
  }
  flush_token(current, out);
  return out;
}

Vocabulary::Vocabulary() = default;

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  Vocabulary v;
  v.min_freq_ = min_freq;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) throw ValidationError("vocabulary tokens must be non-empty");
    if (!v.lookup_.emplace(v.tokens_[i], static_cast<std::int32_t>(i + 2)).second) {
      throw ValidationError("duplicate vocabulary token: " + v.tokens_[i]);
    }
  }
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  const auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  static const std::string kPad = "<pad>", kUnk = "<unk>";
  if (id == kPadding) return kPad;
  if (id == kUnknown) return kUnk;
  return tokens_.at(static_cast<std::size_t>(id - 2));
}

std::string Vocabulary::hash() const {
  std::string joined = "min_freq=" + std::to_string(min_freq_) + "\n";
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return sha256_hex(joined);
}

Vocabulary build_vocab(const LabeledCorpus& corpus, int min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus.records) {
    for (auto& t : normalize_tokens(r.text)) ++counts[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, n] : counts) {
    if (n >= static_cast<std::size_t>(min_freq)) kept.emplace_back(token, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, _] : kept) tokens.push_back(std::move(token));
  return Vocabulary::from_tokens(std::move(tokens), min_freq);
}

std::vector<std::int32_t> tokenize(std::string_view text, const Vocabulary& vocab,
                                   std::size_t max_len) {
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
  std::vector<std::int32_t> ids(max_len, Vocabulary::kPadding);
  const auto tokens = normalize_tokens(text);
  for (std::size_t i = 0; i < tokens.size() && i < max_len; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

CorpusSplit split_corpus(const LabeledCorpus& corpus, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0)) {
    throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    auto [it, inserted] = by_label.try_emplace(corpus.records[i].label);
    if (inserted) order.push_back(corpus.records[i].label);
    it->second.push_back(i);
  }

  CorpusSplit out;
  out.train.provenance = corpus.provenance + "#train";
  out.val.provenance = corpus.provenance + "#val";
  out.test.provenance = corpus.provenance + "#test";
  Rng rng(seed);
  for (const auto& label : order) {
    auto& indices = by_label[label];
    const std::size_t n = indices.size();
    if (n < 3) {
      out.warnings.push_back("label '" + label + "' has " + std::to_string(n) +
                             " records, fewer than the 3 splits; all assigned to train");
      for (const auto i : indices) out.train.records.push_back(corpus.records[i]);
      continue;
    }
    rng.shuffle(indices);
    std::size_t n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 0.5));
    std::size_t n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 0.5));
    while (n_val + n_test > n) (n_test > n_val ? n_test : n_val) -= 1;
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t k = 0; k < n; ++k) {
      auto& dst = k < n_train ? out.train : k < n_train + n_val ? out.val : out.test;
      dst.records.push_back(corpus.records[indices[k]]);
    }
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (examples_per_class < 1) throw ValidationError("examples_per_class must be >= 1");
  if (!(p_signal > 0.0 && p_signal <= 1.0)) throw ValidationError("p_signal must lie in (0, 1]");
  if (!(p_confuse >= 0.0 && p_confuse < 1.0)) throw ValidationError("p_confuse must lie in [0, 1)");
  if (sequence_length < 1) throw ValidationError("sequence_length must be >= 1");
  if (filler_vocabulary < 1) throw ValidationError("filler_vocabulary must be >= 1");
  for (const auto& label : exclude_labels) taxonomy.index_of(label);
}

SyntheticSpec parse_synthetic_spec(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("synthetic spec must be a JSON object");
  static const std::set<std::string> known = {
      "taxonomy",       "examples_per_class", "p_signal",       "p_confuse", "sequence_length",
      "seed",           "filler_vocabulary",  "exclude_labels", "markers"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw ValidationError("unknown synthetic spec field: " + key);
  }
  SyntheticSpec spec;
  try {
    const json& tax = doc.at("taxonomy");
    if (tax.is_string()) {
      std::filesystem::path p = tax.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      spec.taxonomy = load_taxonomy_file(p);
    } else {
      spec.taxonomy = load_taxonomy(tax.dump());
    }
    spec.examples_per_class = doc.at("examples_per_class").get<std::size_t>();
    spec.p_signal = doc.at("p_signal").get<double>();
    spec.p_confuse = doc.at("p_confuse").get<double>();
    spec.sequence_length = doc.at("sequence_length").get<std::size_t>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.filler_vocabulary = doc.value("filler_vocabulary", std::size_t{50});
    spec.exclude_labels = doc.value("exclude_labels", std::vector<std::string>{});
    const std::string markers = doc.value("markers", std::string("class"));
    if (markers == "axis") {
      spec.markers = MarkerScheme::Axis;
    } else if (markers != "class") {
      throw ValidationError("synthetic spec: markers must be \"class\" or \"axis\", got " + markers);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  try {
    return parse_synthetic_spec(json::parse(read_file(path)), path.parent_path());
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": not valid JSON: " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  return {{"taxonomy", json::parse(serialize_taxonomy(spec.taxonomy))},
          {"examples_per_class", spec.examples_per_class},
          {"p_signal", spec.p_signal},
          {"p_confuse", spec.p_confuse},
          {"sequence_length", spec.sequence_length},
          {"seed", spec.seed},
          {"filler_vocabulary", spec.filler_vocabulary},
          {"exclude_labels", spec.exclude_labels},
          {"markers", spec.markers == MarkerScheme::Axis ? "axis" : "class"}};
}

namespace {

int adjacent_level(int level, int levels, Rng& rng) {
  if (level == 0) return 1;
  if (level == levels - 1) return levels - 2;
  return rng.bernoulli(0.5) ? level - 1 : level + 1;
}

}  // namespace

LabeledCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const EmotionTaxonomy& tax = spec.taxonomy;
  const std::set<std::string> excluded(spec.exclude_labels.begin(), spec.exclude_labels.end());
  LabeledCorpus corpus;
  corpus.provenance = "synthetic:seed=" + std::to_string(spec.seed);
  corpus.records.reserve(tax.size() * spec.examples_per_class);
  const int levels = tax.levels();
  // Labeled grid neighbors of each class, in (valence, arousal) order.
  std::vector<std::vector<Cell>> neighbors(tax.size());
  if (tax.mode() == TaxonomyMode::TwoD) {
    for (std::size_t i = 0; i < tax.size(); ++i) {
      for (std::size_t j = 0; j < tax.size(); ++j) {
        if (l1_distance(tax.cell(i), tax.cell(j)) == 1) neighbors[i].push_back(tax.cell(j));
      }
      std::sort(neighbors[i].begin(), neighbors[i].end());
    }
  }

  for (std::size_t label = 0; label < tax.size(); ++label) {
    if (excluded.contains(tax.label(label))) continue;
    Rng rng(mix_seed(spec.seed, label));
    for (std::size_t n = 0; n < spec.examples_per_class; ++n) {
      std::string text;
      for (std::size_t pos = 0; pos < spec.sequence_length; ++pos) {
        if (pos > 0) text.push_back(' ');
        if (!rng.bernoulli(spec.p_signal)) {
          text += "w" + std::to_string(rng.below(spec.filler_vocabulary));
          continue;
        }
        if (tax.mode() == TaxonomyMode::OneD) {
          int rank = tax.rank(label);
          if (rng.bernoulli(spec.p_confuse)) rank = adjacent_level(rank, levels, rng);
          text += "rank" + std::to_string(rank);
        } else if (spec.markers == MarkerScheme::Class) {
          Cell c = tax.cell(label);
          if (rng.bernoulli(spec.p_confuse) && !neighbors[label].empty()) {
            c = neighbors[label][rng.below(neighbors[label].size())];
          }
          text += "v" + std::to_string(c.valence) + "a" + std::to_string(c.arousal);
        } else {
          const bool valence_axis = rng.bernoulli(0.5);
          const Cell c = tax.cell(label);
          int level = valence_axis ? c.valence : c.arousal;
          if (rng.bernoulli(spec.p_confuse)) level = adjacent_level(level, levels, rng);
          text += (valence_axis ? "valence" : "arousal") + std::to_string(level);
        }
      }
      corpus.records.push_back({std::move(text), tax.label(label)});
    }
  }
  return corpus;
}

}  // namespace ordemo
