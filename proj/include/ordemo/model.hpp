#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ordemo/codec.hpp"
#include "ordemo/tensor.hpp"

namespace ordemo {

// Architecture of the text classifier:
//   embedding -> conv(kernel1) -> ReLU -> conv(kernel2) -> ReLU
//   -> masked mean-pool over time -> dense(hidden1) -> ReLU
//   -> dense(hidden2) -> ReLU -> dense(output_width) -> softmax | logistic
// Convolutions are valid (no padding), stride 1, so each shortens the
// sequence by kernel - 1.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t kernel1 = 6;
  std::size_t filters1 = 32;
  std::size_t kernel2 = 4;
  std::size_t filters2 = 64;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::size_t max_seq_length = 32;
  HeadMode head = HeadMode::Softmax;
  std::size_t output_width = 0;

  void validate() const;
  std::size_t conv1_length() const { return max_seq_length - kernel1 + 1; }
  std::size_t conv2_length() const { return conv1_length() - kernel2 + 1; }
  // Token positions covered by one pooled position.
  std::size_t receptive_field() const { return kernel1 + kernel2 - 1; }

  bool operator==(const ModelConfig&) const = default;
};

enum ParamId : std::size_t {
  kEmbedding = 0,
  kConv1Weight,  // [filters1, kernel1, embed_dim]
  kConv1Bias,
  kConv2Weight,  // [filters2, kernel2, filters1]
  kConv2Bias,
  kFc1Weight,  // [hidden1, filters2]
  kFc1Bias,
  kFc2Weight,  // [hidden2, hidden1]
  kFc2Bias,
  kFc3Weight,  // [output_width, hidden2]
  kFc3Bias,
  kParamCount
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;

  bool operator==(const Parameter&) const = default;
};

template <typename T>
using Gradients = std::vector<Tensor<T>>;

template <typename T>
class ClassifierModel {
 public:
  // All parameters zero.
  explicit ClassifierModel(ModelConfig config);
  // Embedding uniform(-0.05, 0.05) with the padding row zeroed; convolution
  // and dense weights and biases uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static ClassifierModel initialized(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  const Tensor<T>& param(ParamId id) const { return params_[id].value; }

  // Mutable access invalidates any forward cache taken earlier.
  std::vector<Parameter<T>>& mutable_parameters() {
    ++version_;
    return params_;
  }
  Tensor<T>& mutable_param(ParamId id) {
    ++version_;
    return params_[id].value;
  }

  std::uint64_t version() const { return version_; }
  std::size_t parameter_count() const;

  template <typename U>
  ClassifierModel<U> cast() const {
    ClassifierModel<U> out(config_);
    auto& dst = out.mutable_parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i].value = params_[i].value.template cast<U>();
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<Parameter<T>> params_;
  std::uint64_t version_ = 0;
};

// Token-id matrix, row-major [rows x length]; id 0 is padding.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t length = 0;
  std::vector<std::int32_t> ids;
};

template <typename T>
struct ForwardCache {
  const void* owner = nullptr;
  std::uint64_t version = 0;
  TokenBatch tokens;
  Tensor<T> embedded;  // [B, T, E]
  Tensor<T> conv1;     // [B, T1, C1] after ReLU
  Tensor<T> conv2;     // [B, T2, C2] after ReLU
  std::vector<std::uint8_t> pool_mask;  // [B, T2]
  std::vector<T> pool_count;            // [B]
  Tensor<T> pooled;    // [B, C2]
  Tensor<T> hidden1;   // [B, H1] after ReLU
  Tensor<T> hidden2;   // [B, H2] after ReLU
  Tensor<T> outputs;   // [B, out] after the head activation
};

template <typename T>
struct ForwardResult {
  Tensor<T> outputs;
  ForwardCache<T> cache;
};

// Throws ValidationError on out-of-range ids, a wrong sequence length, or a
// row that is entirely padding.
template <typename T>
ForwardResult<T> forward(const ClassifierModel<T>& model, const TokenBatch& batch);

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  // d loss / d outputs (post-activation)
};

inline constexpr double kLogClamp = 1e-12;

// softmax: mean over rows of -sum_j t_j log(max(p_j, 1e-12)).
// ordinal-1d: mean squared error over rows and code entries.
// ordinal-2d: w_v * MSE(valence half) + w_a * MSE(arousal half).
template <typename T>
LossResult<T> compute_loss(const Tensor<T>& outputs, const Tensor<T>& targets, HeadMode mode,
                           std::array<double, 2> head_weights = {1.0, 1.0});

// Reverse-mode gradients of the loss w.r.t. every parameter, given
// d loss / d outputs. Throws if the cache is missing or the model changed
// since the forward pass.
template <typename T>
Gradients<T> backward(const ClassifierModel<T>& model, const ForwardCache<T>& cache,
                      const Tensor<T>& grad_outputs);

// Bit pattern of every ReLU gate in a forward pass; used by the gradient
// checker to notice when a perturbation crosses a kink.
template <typename T>
std::vector<std::uint8_t> activation_pattern(const ForwardCache<T>& cache);

}  // namespace ordemo
