#include "ordemo/model.hpp"

#include <algorithm>
#include <cmath>

#include "ordemo/error.hpp"
#include "ordemo/random.hpp"

namespace ordemo {

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ValidationError("vocabulary must hold at least one real token");
  if (embed_dim == 0 || filters1 == 0 || filters2 == 0 || hidden1 == 0 || hidden2 == 0 ||
      kernel1 == 0 || kernel2 == 0 || output_width == 0) {
    throw ValidationError("model widths and kernels must be positive");
  }
  if (max_seq_length < kernel1 + kernel2 - 1) {
    throw ValidationError("max_seq_length " + std::to_string(max_seq_length) +
                          " is shorter than the receptive field " +
                          std::to_string(kernel1 + kernel2 - 1));
  }
  if (head == HeadMode::Ordinal2D && output_width % 2 != 0) {
    throw ValidationError("ordinal-2d output width must be even");
  }
}

namespace {

template <typename T>
std::vector<Parameter<T>> make_parameters(const ModelConfig& c) {
  std::vector<Parameter<T>> p;
  p.reserve(kParamCount);
  p.push_back({"embedding", Tensor<T>({c.vocab_size, c.embed_dim})});
  p.push_back({"conv1.weight", Tensor<T>({c.filters1, c.kernel1, c.embed_dim})});
  p.push_back({"conv1.bias", Tensor<T>({c.filters1})});
  p.push_back({"conv2.weight", Tensor<T>({c.filters2, c.kernel2, c.filters1})});
  p.push_back({"conv2.bias", Tensor<T>({c.filters2})});
  p.push_back({"fc1.weight", Tensor<T>({c.hidden1, c.filters2})});
  p.push_back({"fc1.bias", Tensor<T>({c.hidden1})});
  p.push_back({"fc2.weight", Tensor<T>({c.hidden2, c.hidden1})});
  p.push_back({"fc2.bias", Tensor<T>({c.hidden2})});
  p.push_back({"fc3.weight", Tensor<T>({c.output_width, c.hidden2})});
  p.push_back({"fc3.bias", Tensor<T>({c.output_width})});
  return p;
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T relu(T x) {
  return x > T{0} ? x : T{0};
}

// out[b, t, c] = relu(bias[c] + <weight[c], in[b, t : t + k, :]>)
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& bias) {
  const std::size_t rows = in.extent(0), length = in.extent(1), channels = in.extent(2);
  const std::size_t filters = weight.extent(0), kernel = weight.extent(1);
  const std::size_t out_length = length - kernel + 1;
  const std::size_t window = kernel * channels;
  Tensor<T> out({rows, out_length, filters});
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < out_length; ++t) {
      const T* x = &in(b, t, 0);
      T* y = &out(b, t, 0);
      for (std::size_t c = 0; c < filters; ++c) {
        y[c] = relu(bias[c] + dot(weight.raw() + c * window, x, window));
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients and returns d loss / d input, given
// d loss / d post-ReLU output and the post-ReLU output itself.
template <typename T>
Tensor<T> conv_backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& grad_out,
                        const Tensor<T>& weight, Tensor<T>& grad_weight, Tensor<T>& grad_bias,
                        bool need_input_grad) {
  const std::size_t rows = in.extent(0), channels = in.extent(2);
  const std::size_t filters = weight.extent(0), kernel = weight.extent(1);
  const std::size_t out_length = out.extent(1);
  const std::size_t window = kernel * channels;
  Tensor<T> grad_in(in.shape());
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < out_length; ++t) {
      const T* x = &in(b, t, 0);
      T* gx = &grad_in(b, t, 0);
      for (std::size_t c = 0; c < filters; ++c) {
        if (!(out(b, t, c) > T{0})) continue;
        const T g = grad_out(b, t, c);
        if (g == T{0}) continue;
        grad_bias[c] += g;
        axpy(g, x, grad_weight.raw() + c * window, window);
        if (need_input_grad) axpy(g, weight.raw() + c * window, gx, window);
      }
    }
  }
  return grad_in;
}

// out[b, j] = act(bias[j] + <weight[j], in[b]>), act = ReLU or identity.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& bias,
                        bool apply_relu) {
  const std::size_t rows = in.extent(0), width = in.extent(1), units = weight.extent(0);
  Tensor<T> out({rows, units});
  for (std::size_t b = 0; b < rows; ++b) {
    const T* x = &in(b, 0);
    for (std::size_t j = 0; j < units; ++j) {
      const T z = bias[j] + dot(weight.raw() + j * width, x, width);
      out(b, j) = apply_relu ? relu(z) : z;
    }
  }
  return out;
}

// grad_pre is d loss / d pre-activation.
template <typename T>
Tensor<T> dense_backward(const Tensor<T>& in, const Tensor<T>& grad_pre, const Tensor<T>& weight,
                         Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const std::size_t rows = in.extent(0), width = in.extent(1), units = weight.extent(0);
  Tensor<T> grad_in(in.shape());
  for (std::size_t b = 0; b < rows; ++b) {
    const T* x = &in(b, 0);
    T* gx = &grad_in(b, 0);
    for (std::size_t j = 0; j < units; ++j) {
      const T g = grad_pre(b, j);
      if (g == T{0}) continue;
      grad_bias[j] += g;
      axpy(g, x, grad_weight.raw() + j * width, width);
      axpy(g, weight.raw() + j * width, gx, width);
    }
  }
  return grad_in;
}

template <typename T>
void mask_relu(Tensor<T>& grad, const Tensor<T>& activated) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activated[i] > T{0})) grad[i] = T{0};
  }
}

}  // namespace

template <typename T>
ClassifierModel<T>::ClassifierModel(ModelConfig config)
    : config_(config), params_(make_parameters<T>(config)) {
  config_.validate();
}

template <typename T>
ClassifierModel<T> ClassifierModel<T>::initialized(ModelConfig config, std::uint64_t seed) {
  ClassifierModel model(config);
  Rng rng(seed);
  auto& p = model.params_;
  for (std::size_t i = 0; i < p[kEmbedding].value.size(); ++i) {
    p[kEmbedding].value[i] = static_cast<T>(rng.uniform(-0.05, 0.05));
  }
  for (std::size_t j = 0; j < config.embed_dim; ++j) p[kEmbedding].value(0, j) = T{0};

  const auto init_layer = [&](ParamId weight, ParamId bias, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : p[weight].value.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& v : p[bias].value.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  };
  init_layer(kConv1Weight, kConv1Bias, config.kernel1 * config.embed_dim);
  init_layer(kConv2Weight, kConv2Bias, config.kernel2 * config.filters1);
  init_layer(kFc1Weight, kFc1Bias, config.filters2);
  init_layer(kFc2Weight, kFc2Bias, config.hidden1);
  init_layer(kFc3Weight, kFc3Bias, config.hidden2);
  return model;
}

template <typename T>
std::size_t ClassifierModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
ForwardResult<T> forward(const ClassifierModel<T>& model, const TokenBatch& batch) {
  const ModelConfig& cfg = model.config();
  if (batch.length != cfg.max_seq_length) {
    throw ValidationError("token sequence length " + std::to_string(batch.length) +
                          " does not match the model's " + std::to_string(cfg.max_seq_length));
  }
  if (batch.rows == 0 || batch.ids.size() != batch.rows * batch.length) {
    throw ValidationError("malformed token batch");
  }
  const std::size_t rows = batch.rows, length = batch.length, embed = cfg.embed_dim;

  ForwardCache<T> cache;
  cache.owner = &model;
  cache.version = model.version();
  cache.tokens = batch;

  const Tensor<T>& table = model.param(kEmbedding);
  cache.embedded = Tensor<T>({rows, length, embed});
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      const std::int32_t id = batch.ids[b * length + t];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
        throw ValidationError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                              std::to_string(cfg.vocab_size));
      }
      if (id == 0) continue;  // padding contributes zeros
      std::copy_n(&table(static_cast<std::size_t>(id), 0), embed, &cache.embedded(b, t, 0));
    }
  }

  cache.conv1 = conv_forward(cache.embedded, model.param(kConv1Weight), model.param(kConv1Bias));
  cache.conv2 = conv_forward(cache.conv1, model.param(kConv2Weight), model.param(kConv2Bias));

  // A pooled position counts when its receptive field holds a real token.
  const std::size_t pooled_length = cfg.conv2_length(), field = cfg.receptive_field();
  const std::size_t channels = cfg.filters2;
  cache.pool_mask.assign(rows * pooled_length, 0);
  cache.pool_count.assign(rows, T{0});
  cache.pooled = Tensor<T>({rows, channels});
  for (std::size_t b = 0; b < rows; ++b) {
    std::size_t count = 0;
    for (std::size_t t = 0; t < pooled_length; ++t) {
      bool real = false;
      for (std::size_t k = 0; k < field && !real; ++k) real = batch.ids[b * length + t + k] != 0;
      cache.pool_mask[b * pooled_length + t] = real ? 1 : 0;
      if (!real) continue;
      ++count;
      axpy(T{1}, &cache.conv2(b, t, 0), &cache.pooled(b, 0), channels);
    }
    if (count == 0) {
      throw ValidationError("token row " + std::to_string(b) + " is entirely padding");
    }
    cache.pool_count[b] = static_cast<T>(count);
    for (std::size_t c = 0; c < channels; ++c) cache.pooled(b, c) /= cache.pool_count[b];
  }

  cache.hidden1 = dense_forward(cache.pooled, model.param(kFc1Weight), model.param(kFc1Bias), true);
  cache.hidden2 = dense_forward(cache.hidden1, model.param(kFc2Weight), model.param(kFc2Bias), true);
  Tensor<T> out = dense_forward(cache.hidden2, model.param(kFc3Weight), model.param(kFc3Bias), false);

  const std::size_t width = cfg.output_width;
  if (cfg.head == HeadMode::Softmax) {
    for (std::size_t b = 0; b < rows; ++b) {
      T* z = &out(b, 0);
      const T peak = *std::max_element(z, z + width);
      T total{0};
      for (std::size_t j = 0; j < width; ++j) {
        z[j] = std::exp(z[j] - peak);
        total += z[j];
      }
      for (std::size_t j = 0; j < width; ++j) z[j] /= total;
    }
  } else {
    for (auto& v : out.data()) v = T{1} / (T{1} + std::exp(-v));
  }
  if (!out.all_finite()) throw RuntimeFailure("forward pass produced non-finite outputs");
  cache.outputs = out;
  return {std::move(out), std::move(cache)};
}

template <typename T>
LossResult<T> compute_loss(const Tensor<T>& outputs, const Tensor<T>& targets, HeadMode mode,
                           std::array<double, 2> head_weights) {
  if (outputs.shape() != targets.shape() || outputs.rank() != 2) {
    throw ValidationError("loss: output and target shapes differ");
  }
  const std::size_t rows = outputs.extent(0), width = outputs.extent(1);
  LossResult<T> result;
  result.grad = Tensor<T>(outputs.shape());
  double total = 0.0;

  if (mode == HeadMode::Softmax) {
    const double scale = 1.0 / static_cast<double>(rows);
    for (std::size_t b = 0; b < rows; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        const double t = static_cast<double>(targets(b, j));
        if (t == 0.0) continue;
        const double p = static_cast<double>(outputs(b, j));
        const double clamped = std::max(p, kLogClamp);
        total -= t * std::log(clamped);
        result.grad(b, j) = p > kLogClamp ? static_cast<T>(-t * scale / p) : T{0};
      }
    }
    result.value = total * scale;
    return result;
  }

  // Squared error over one contiguous block of columns, weighted.
  const auto mse_block = [&](std::size_t begin, std::size_t end, double weight) {
    const double scale = weight / static_cast<double>(rows * (end - begin));
    double sum = 0.0;
    for (std::size_t b = 0; b < rows; ++b) {
      for (std::size_t j = begin; j < end; ++j) {
        const double diff = static_cast<double>(outputs(b, j)) - static_cast<double>(targets(b, j));
        sum += diff * diff;
        result.grad(b, j) = static_cast<T>(2.0 * diff * scale);
      }
    }
    return sum * scale;
  };
  if (mode == HeadMode::Ordinal1D) {
    result.value = mse_block(0, width, 1.0);
  } else {
    if (width % 2 != 0) throw ValidationError("ordinal-2d outputs need an even width");
    result.value = mse_block(0, width / 2, head_weights[0]) +
                   mse_block(width / 2, width, head_weights[1]);
  }
  return result;
}

template <typename T>
Gradients<T> backward(const ClassifierModel<T>& model, const ForwardCache<T>& cache,
                      const Tensor<T>& grad_outputs) {
  if (cache.owner == nullptr) throw ValidationError("backward called without a forward cache");
  if (cache.owner != &model || cache.version != model.version()) {
    throw ValidationError("backward called with a stale forward cache");
  }
  if (grad_outputs.shape() != cache.outputs.shape()) {
    throw ValidationError("backward: output gradient shape mismatch");
  }
  const ModelConfig& cfg = model.config();
  const std::size_t rows = cache.tokens.rows, width = cfg.output_width;

  Gradients<T> grads;
  grads.reserve(kParamCount);
  for (const auto& p : model.parameters()) grads.emplace_back(p.value.shape());

  // Through the head activation to pre-activation logits.
  Tensor<T> grad_logits(grad_outputs.shape());
  if (cfg.head == HeadMode::Softmax) {
    for (std::size_t b = 0; b < rows; ++b) {
      T inner{0};
      for (std::size_t j = 0; j < width; ++j) inner += grad_outputs(b, j) * cache.outputs(b, j);
      for (std::size_t j = 0; j < width; ++j) {
        grad_logits(b, j) = cache.outputs(b, j) * (grad_outputs(b, j) - inner);
      }
    }
  } else {
    for (std::size_t i = 0; i < grad_logits.size(); ++i) {
      const T s = cache.outputs[i];
      grad_logits[i] = grad_outputs[i] * s * (T{1} - s);
    }
  }

  Tensor<T> g_h2 = dense_backward(cache.hidden2, grad_logits, model.param(kFc3Weight),
                                  grads[kFc3Weight], grads[kFc3Bias]);
  mask_relu(g_h2, cache.hidden2);
  Tensor<T> g_h1 = dense_backward(cache.hidden1, g_h2, model.param(kFc2Weight), grads[kFc2Weight],
                                  grads[kFc2Bias]);
  mask_relu(g_h1, cache.hidden1);
  Tensor<T> g_pooled = dense_backward(cache.pooled, g_h1, model.param(kFc1Weight),
                                      grads[kFc1Weight], grads[kFc1Bias]);

  const std::size_t pooled_length = cfg.conv2_length(), channels = cfg.filters2;
  Tensor<T> g_conv2(cache.conv2.shape());
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < pooled_length; ++t) {
      if (!cache.pool_mask[b * pooled_length + t]) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        g_conv2(b, t, c) = g_pooled(b, c) / cache.pool_count[b];
      }
    }
  }
  Tensor<T> g_conv1 = conv_backward(cache.conv1, cache.conv2, g_conv2, model.param(kConv2Weight),
                                    grads[kConv2Weight], grads[kConv2Bias], true);
  Tensor<T> g_embedded = conv_backward(cache.embedded, cache.conv1, g_conv1,
                                       model.param(kConv1Weight), grads[kConv1Weight],
                                       grads[kConv1Bias], true);

  const std::size_t length = cache.tokens.length, embed = cfg.embed_dim;
  Tensor<T>& g_table = grads[kEmbedding];
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      const std::int32_t id = cache.tokens.ids[b * length + t];
      if (id == 0) continue;
      axpy(T{1}, &g_embedded(b, t, 0), &g_table(static_cast<std::size_t>(id), 0), embed);
    }
  }
  return grads;
}

template <typename T>
std::vector<std::uint8_t> activation_pattern(const ForwardCache<T>& cache) {
  std::vector<std::uint8_t> bits;
  for (const Tensor<T>* t : {&cache.conv1, &cache.conv2, &cache.hidden1, &cache.hidden2}) {
    for (const T v : t->data()) bits.push_back(v > T{0} ? 1 : 0);
  }
  return bits;
}

template class ClassifierModel<float>;
template class ClassifierModel<double>;
template ForwardResult<float> forward(const ClassifierModel<float>&, const TokenBatch&);
template ForwardResult<double> forward(const ClassifierModel<double>&, const TokenBatch&);
template LossResult<float> compute_loss(const Tensor<float>&, const Tensor<float>&, HeadMode,
                                        std::array<double, 2>);
template LossResult<double> compute_loss(const Tensor<double>&, const Tensor<double>&, HeadMode,
                                         std::array<double, 2>);
template Gradients<float> backward(const ClassifierModel<float>&, const ForwardCache<float>&,
                                   const Tensor<float>&);
template Gradients<double> backward(const ClassifierModel<double>&, const ForwardCache<double>&,
                                    const Tensor<double>&);
template std::vector<std::uint8_t> activation_pattern(const ForwardCache<float>&);
template std::vector<std::uint8_t> activation_pattern(const ForwardCache<double>&);

}  // namespace ordemo
