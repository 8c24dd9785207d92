#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordemo/model.hpp"

namespace ordemo {

struct LayerGradError {
  std::string layer;
  double max_relative_error = 0.0;
  std::size_t entries = 0;
};

struct GradcheckReport {
  HeadMode mode = HeadMode::Softmax;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::vector<LayerGradError> layers;

  bool passed() const;
  // Stable text rendering; identical for identical inputs.
  std::string to_text() const;
};

struct GradcheckOptions {
  std::size_t batch = 3;
  double perturbation = 1e-5;
  double tolerance = 1e-4;
  // Negative control: perturbs one analytic gradient before comparing.
  bool corrupt = false;
};

// Tiny architecture (every width <= 8, T = 12) for the given head.
ModelConfig tiny_config(HeadMode mode);

// Compares reverse-mode gradients with central finite differences in
// double precision. Entry error is |a - n| / max(|a|, |n|, 1e-6). When a
// perturbation flips a ReLU gate the step is shrunk (down to 1e-9) so the
// comparison stays on one linear piece.
GradcheckReport check_gradients(const ModelConfig& config, std::uint64_t seed,
                                 const GradcheckOptions& options = {});

}  // namespace ordemo
