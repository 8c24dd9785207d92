#include "ordemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ordemo/random.hpp"

namespace ordemo {

bool GradcheckReport::passed() const {
  return std::all_of(layers.begin(), layers.end(), [&](const LayerGradError& l) {
    return std::isfinite(l.max_relative_error) && l.max_relative_error <= tolerance;
  });
}

std::string GradcheckReport::to_text() const {
  std::ostringstream out;
  char buffer[160];
  std::snprintf(buffer, sizeof buffer, "gradcheck mode=%s seed=%llu tolerance=%.1e\n",
                std::string(to_string(mode)).c_str(), static_cast<unsigned long long>(seed),
                tolerance);
  out << buffer;
  for (const auto& l : layers) {
    std::snprintf(buffer, sizeof buffer, "  %-14s entries=%-5zu max_rel_err=%.3e %s\n",
                  l.layer.c_str(), l.entries, l.max_relative_error,
                  l.max_relative_error <= tolerance ? "ok" : "FAIL");
    out << buffer;
  }
  out << (passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

ModelConfig tiny_config(HeadMode mode) {
  ModelConfig c;
  c.vocab_size = 12;
  c.embed_dim = 4;
  c.kernel1 = 6;
  c.filters1 = 5;
  c.kernel2 = 4;
  c.filters2 = 6;
  c.hidden1 = 7;
  c.hidden2 = 5;
  c.max_seq_length = 12;
  c.head = mode;
  c.output_width = mode == HeadMode::Softmax ? 5 : mode == HeadMode::Ordinal1D ? 4 : 8;
  return c;
}

namespace {

Tensor<double> random_targets(const ModelConfig& c, std::size_t rows, Rng& rng) {
  const std::size_t width = c.output_width;
  Tensor<double> targets({rows, width});
  for (std::size_t b = 0; b < rows; ++b) {
    switch (c.head) {
      case HeadMode::Softmax:
        targets(b, rng.below(width)) = 1.0;
        break;
      case HeadMode::Ordinal1D: {
        const auto level = rng.below(width + 1);
        for (std::size_t j = 0; j < level; ++j) targets(b, j) = 1.0;
        break;
      }
      case HeadMode::Ordinal2D: {
        const std::size_t half = width / 2;
        const auto valence = rng.below(half + 1), arousal = rng.below(half + 1);
        for (std::size_t j = 0; j < valence; ++j) targets(b, j) = 1.0;
        for (std::size_t j = 0; j < arousal; ++j) targets(b, half + j) = 1.0;
        break;
      }
    }
  }
  return targets;
}

}  // namespace

GradcheckReport check_gradients(const ModelConfig& config, std::uint64_t seed,
                                const GradcheckOptions& options) {
  config.validate();
  Rng rng(mix_seed(seed, 1));
  auto model = ClassifierModel<double>::initialized(config, mix_seed(seed, 0));

  TokenBatch batch;
  batch.rows = options.batch;
  batch.length = config.max_seq_length;
  batch.ids.assign(batch.rows * batch.length, 0);
  for (std::size_t b = 0; b < batch.rows; ++b) {
    const std::size_t real = 1 + rng.below(batch.length);
    for (std::size_t t = 0; t < real; ++t) {
      batch.ids[b * batch.length + t] =
          static_cast<std::int32_t>(1 + rng.below(config.vocab_size - 1));
    }
  }
  const Tensor<double> targets = random_targets(config, batch.rows, rng);

  const auto base = forward(model, batch);
  const auto loss = compute_loss(base.outputs, targets, config.head);
  Gradients<double> analytic = backward(model, base.cache, loss.grad);
  if (options.corrupt) {
    for (auto& v : analytic[kFc2Weight].data()) v *= 1.5;
  }
  const auto base_pattern = activation_pattern(base.cache);

  const auto evaluate = [&](std::vector<std::uint8_t>* pattern) {
    const auto r = forward(model, batch);
    if (pattern) *pattern = activation_pattern(r.cache);
    return compute_loss(r.outputs, targets, config.head).value;
  };

  GradcheckReport report;
  report.mode = config.head;
  report.seed = seed;
  report.tolerance = options.tolerance;
  for (std::size_t id = 0; id < kParamCount; ++id) {
    LayerGradError layer;
    layer.layer = model.parameters()[id].name;
    layer.entries = model.parameters()[id].value.size();
    for (std::size_t j = 0; j < layer.entries; ++j) {
      const double original = model.param(static_cast<ParamId>(id))[j];
      double h = options.perturbation;
      double numeric = 0.0;
      for (;;) {
        std::vector<std::uint8_t> plus_pattern, minus_pattern;
        model.mutable_param(static_cast<ParamId>(id))[j] = original + h;
        const double plus = evaluate(&plus_pattern);
        model.mutable_param(static_cast<ParamId>(id))[j] = original - h;
        const double minus = evaluate(&minus_pattern);
        model.mutable_param(static_cast<ParamId>(id))[j] = original;
        numeric = (plus - minus) / (2.0 * h);
        const bool kink = plus_pattern != base_pattern || minus_pattern != base_pattern;
        if (!kink || h < 1e-9) break;
        h /= 10.0;
      }
      const double a = analytic[id][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      layer.max_relative_error = std::max(layer.max_relative_error, std::abs(a - numeric) / denom);
    }
    report.layers.push_back(layer);
  }
  return report;
}

}  // namespace ordemo
