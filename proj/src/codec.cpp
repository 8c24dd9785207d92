#include "ordemo/codec.hpp"

#include <cmath>
#include <string>

#include "ordemo/error.hpp"

namespace ordemo {

std::string_view to_string(HeadMode mode) {
  switch (mode) {
    case HeadMode::Softmax: return "softmax";
    case HeadMode::Ordinal1D: return "ordinal-1d";
    case HeadMode::Ordinal2D: return "ordinal-2d";
  }
  return "unknown";
}

HeadMode parse_head_mode(std::string_view name) {
  if (name == "softmax") return HeadMode::Softmax;
  if (name == "ordinal-1d") return HeadMode::Ordinal1D;
  if (name == "ordinal-2d") return HeadMode::Ordinal2D;
  throw ValidationError("unknown head mode: " + std::string(name) +
                        " (expected softmax, ordinal-1d or ordinal-2d)");
}

bool compatible(HeadMode head, TaxonomyMode taxonomy) {
  switch (head) {
    case HeadMode::Softmax: return true;
    case HeadMode::Ordinal1D: return taxonomy == TaxonomyMode::OneD;
    case HeadMode::Ordinal2D: return taxonomy == TaxonomyMode::TwoD;
  }
  return false;
}

void require_compatible(HeadMode head, const EmotionTaxonomy& taxonomy) {
  if (!compatible(head, taxonomy.mode())) {
    throw ValidationError(std::string("head mode ") + std::string(to_string(head)) +
                          " is incompatible with a " +
                          (taxonomy.mode() == TaxonomyMode::OneD ? "1d" : "2d") + " taxonomy");
  }
}

std::size_t output_width(HeadMode head, const EmotionTaxonomy& taxonomy) {
  require_compatible(head, taxonomy);
  switch (head) {
    case HeadMode::Softmax: return taxonomy.size();
    case HeadMode::Ordinal1D: return taxonomy.size() - 1;
    case HeadMode::Ordinal2D: return 2 * static_cast<std::size_t>(taxonomy.grid_size() - 1);
  }
  return 0;
}

std::vector<double> encode_onehot(std::size_t k, std::size_t count) {
  if (k >= count) {
    throw ValidationError("one-hot index " + std::to_string(k) + " out of range for " +
                          std::to_string(count) + " classes");
  }
  std::vector<double> v(count, 0.0);
  v[k] = 1.0;
  return v;
}

OrdinalCode encode_thermometer(int level, int levels) {
  if (levels < 2) throw ValidationError("thermometer code needs at least 2 levels");
  if (level < 0 || level >= levels) {
    throw ValidationError("ordinal level " + std::to_string(level) + " out of range for " +
                          std::to_string(levels) + " levels");
  }
  OrdinalCode code;
  code.levels = levels;
  code.values.assign(static_cast<std::size_t>(levels - 1), 0.0);
  for (int i = 0; i < level; ++i) code.values[i] = 1.0;
  return code;
}

namespace {

template <typename T>
int decode_impl(std::span<const T> values) {
  if (values.empty()) throw ValidationError("cannot decode an empty ordinal code");
  for (const T v : values) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw ValidationError("cannot decode a non-finite ordinal code");
    }
  }
  const std::size_t length = values.size();
  int best = 0;
  double best_distance = 0.0;
  for (std::size_t k = 0; k <= length; ++k) {
    double d = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
      const double target = i < k ? 1.0 : 0.0;
      const double diff = static_cast<double>(values[i]) - target;
      d += diff * diff;
    }
    if (k == 0 || d < best_distance) {
      best = static_cast<int>(k);
      best_distance = d;
    }
  }
  return best;
}

}  // namespace

int decode_thermometer(std::span<const double> values) { return decode_impl(values); }
int decode_thermometer(std::span<const float> values) { return decode_impl(values); }

std::vector<double> TargetVector::flatten() const {
  if (const auto* onehot = std::get_if<OneHot>(&payload)) return *onehot;
  if (const auto* code = std::get_if<OrdinalCode>(&payload)) return code->values;
  const auto& [valence, arousal] = std::get<CodePair>(payload);
  std::vector<double> row = valence.values;
  row.insert(row.end(), arousal.values.begin(), arousal.values.end());
  return row;
}

TargetVector target_for(const EmotionTaxonomy& taxonomy, std::size_t label_index, HeadMode mode) {
  require_compatible(mode, taxonomy);
  if (label_index >= taxonomy.size()) throw ValidationError("label index out of range");
  TargetVector target;
  target.mode = mode;
  switch (mode) {
    case HeadMode::Softmax:
      target.payload = encode_onehot(label_index, taxonomy.size());
      break;
    case HeadMode::Ordinal1D:
      target.payload =
          encode_thermometer(taxonomy.rank(label_index), static_cast<int>(taxonomy.size()));
      break;
    case HeadMode::Ordinal2D: {
      const Cell c = taxonomy.cell(label_index);
      const int g = taxonomy.grid_size();
      target.payload = CodePair{encode_thermometer(c.valence, g), encode_thermometer(c.arousal, g)};
      break;
    }
  }
  return target;
}

TargetVector target_for(const EmotionTaxonomy& taxonomy, std::string_view label, HeadMode mode) {
  return target_for(taxonomy, taxonomy.index_of(label), mode);
}

}  // namespace ordemo
