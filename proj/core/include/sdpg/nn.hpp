#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdpg/matrix.hpp"

namespace sdpg::nn {

enum class Activation { Elu, Tanh, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected network: hidden layers carry the activation, the output
// layer is affine.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_widths;
  int output_dim = 0;
  Activation activation = Activation::Elu;

  // [input_dim, hidden..., output_dim]
  std::vector<int> layer_widths() const;
  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int param_count() const;
  // Offset of layer l's weight block; biases follow the weights.
  int weight_offset(int layer) const;
  int bias_offset(int layer) const;
  void validate() const;
};

struct ConvLayerSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

// Small image encoder: valid (unpadded) strided convolutions with the
// activation after every conv, then a linear projection to feature_dim.
struct ConvSpec {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  std::vector<ConvLayerSpec> layers;
  int feature_dim = 0;
  Activation activation = Activation::Elu;

  struct Stage {
    int channels, height, width;
    int size() const { return channels * height * width; }
  };
  // Shapes entering each layer plus the final conv output; length layers+1.
  std::vector<Stage> stages() const;
  int flat_output_size() const;
  int param_count() const;
  int conv_weight_offset(int layer) const;
  int conv_bias_offset(int layer) const;
  int linear_weight_offset() const;
  int linear_bias_offset() const;
  void validate() const;
};

// Flat parameter store shared by every approximator.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(int n) : values(static_cast<size_t>(n), 0.0) {}

  int size() const { return static_cast<int>(values.size()); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }
};

// Throws std::runtime_error naming the first offending index if any
// component is not finite.
void assert_finite(const ParamVector& p, const std::string& what);

struct MlpGradients {
  ParamVector param_grad;
  Matrix input_grad;
};

Matrix mlp_forward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs);
// Reverse-mode gradient of sum_rows <upstream, output> w.r.t. params and inputs.
MlpGradients mlp_backward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs,
                          const Matrix& upstream);

struct ConvGradients {
  ParamVector param_grad;
  Matrix input_grad;
};

Matrix conv_forward(const ParamVector& params, const ConvSpec& spec, const Matrix& images);
ConvGradients conv_backward(const ParamVector& params, const ConvSpec& spec, const Matrix& images,
                            const Matrix& upstream);

// Gaussian init with std 1/sqrt(fan_in); biases zero. final_layer_scale
// shrinks the output layer (actor heads start near-zero actions).
ParamVector init_mlp_params(const MlpSpec& spec, uint64_t seed, double final_layer_scale = 1.0);
ParamVector init_conv_params(const ConvSpec& spec, uint64_t seed);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  static AdamState make(int param_count, double lr);
};

// Clips grads to max_norm (L2), applies one bias-corrected Adam update.
// Throws on non-finite grads (naming the component) and on non-finite
// params after the update.
void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads, double max_norm,
               double lr_multiplier);

struct LrSchedule {
  enum class Kind { Constant, CosineWithWarmup, LinearDecay };
  Kind kind = Kind::Constant;
  int total_epochs = 1;
  // CosineWithWarmup: ramps to 1 over warmup_epochs, then cosine to min_multiplier.
  int warmup_epochs = 0;
  double min_multiplier = 1.0;
  // LinearDecay endpoints.
  double start_frac = 1.0;
  double end_frac = 1.0;

  double multiplier(int epoch) const;
  void validate() const;
};

}  // namespace sdpg::nn
