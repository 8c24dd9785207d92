#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ordemo/taxonomy.hpp"

namespace ordemo {

enum class HeadMode { Softmax, Ordinal1D, Ordinal2D };

std::string_view to_string(HeadMode mode);
// Accepts "softmax", "ordinal-1d", "ordinal-2d".
HeadMode parse_head_mode(std::string_view name);
// Softmax runs on either taxonomy; ordinal heads need the matching mode.
bool compatible(HeadMode head, TaxonomyMode taxonomy);
void require_compatible(HeadMode head, const EmotionTaxonomy& taxonomy);
// K (softmax), K-1 (ordinal-1d), 2(G-1) (ordinal-2d).
std::size_t output_width(HeadMode head, const EmotionTaxonomy& taxonomy);

// Thermometer code: level k of `levels` is a length levels-1 vector whose
// first k entries are 1. Squared distance between codewords i and j is |i-j|.
struct OrdinalCode {
  std::vector<double> values;
  int levels = 2;

  bool operator==(const OrdinalCode&) const = default;
};

std::vector<double> encode_onehot(std::size_t k, std::size_t count);
OrdinalCode encode_thermometer(int level, int levels);

// Nearest valid codeword by squared distance, ties to the smaller level.
int decode_thermometer(std::span<const double> values);
int decode_thermometer(std::span<const float> values);

using OneHot = std::vector<double>;
using CodePair = std::pair<OrdinalCode, OrdinalCode>;  // valence, arousal

struct TargetVector {
  HeadMode mode = HeadMode::Softmax;
  std::variant<OneHot, OrdinalCode, CodePair> payload;

  // Concatenated row matching the model's output layout.
  std::vector<double> flatten() const;
};

TargetVector target_for(const EmotionTaxonomy& taxonomy, std::string_view label, HeadMode mode);
TargetVector target_for(const EmotionTaxonomy& taxonomy, std::size_t label_index, HeadMode mode);

}  // namespace ordemo
