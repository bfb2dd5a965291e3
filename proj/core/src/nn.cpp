#include "sdpg/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sdpg/rng.hpp"

namespace sdpg::nn {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Elu:
      return x > 0.0 ? x : std::expm1(x);
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Identity:
      return x;
  }
  return x;
}

// Derivative expressed through the pre-activation value.
double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::Elu:
      return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Elu:
      return "elu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "elu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "elu") return Activation::Elu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + name);
}

std::vector<int> MlpSpec::layer_widths() const {
  std::vector<int> w;
  w.reserve(hidden_widths.size() + 2);
  w.push_back(input_dim);
  for (int h : hidden_widths) w.push_back(h);
  w.push_back(output_dim);
  return w;
}

int MlpSpec::param_count() const {
  const auto w = layer_widths();
  int n = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) n += w[l] * w[l + 1] + w[l + 1];
  return n;
}

int MlpSpec::weight_offset(int layer) const {
  const auto w = layer_widths();
  int off = 0;
  for (int l = 0; l < layer; ++l) off += w[l] * w[l + 1] + w[l + 1];
  return off;
}

int MlpSpec::bias_offset(int layer) const {
  const auto w = layer_widths();
  return weight_offset(layer) + w[layer] * w[layer + 1];
}

void MlpSpec::validate() const {
  require(input_dim > 0, "MlpSpec: input_dim must be positive");
  require(output_dim > 0, "MlpSpec: output_dim must be positive");
  for (int h : hidden_widths) require(h > 0, "MlpSpec: hidden widths must be positive");
}

std::vector<ConvSpec::Stage> ConvSpec::stages() const {
  std::vector<Stage> s;
  s.push_back({in_channels, in_height, in_width});
  for (const auto& l : layers) {
    const Stage& prev = s.back();
    const int h = (prev.height - l.kernel) / l.stride + 1;
    const int w = (prev.width - l.kernel) / l.stride + 1;
    s.push_back({l.out_channels, h, w});
  }
  return s;
}

int ConvSpec::flat_output_size() const { return stages().back().size(); }

int ConvSpec::param_count() const {
  return linear_bias_offset() + feature_dim;
}

int ConvSpec::conv_weight_offset(int layer) const {
  const auto s = stages();
  int off = 0;
  for (int l = 0; l < layer; ++l) {
    off += layers[l].out_channels * s[l].channels * layers[l].kernel * layers[l].kernel +
           layers[l].out_channels;
  }
  return off;
}

int ConvSpec::conv_bias_offset(int layer) const {
  const auto s = stages();
  return conv_weight_offset(layer) +
         layers[layer].out_channels * s[layer].channels * layers[layer].kernel * layers[layer].kernel;
}

int ConvSpec::linear_weight_offset() const { return conv_weight_offset(static_cast<int>(layers.size())); }

int ConvSpec::linear_bias_offset() const {
  return linear_weight_offset() + feature_dim * flat_output_size();
}

void ConvSpec::validate() const {
  require(in_channels > 0 && in_height > 0 && in_width > 0, "ConvSpec: bad input shape");
  require(feature_dim > 0, "ConvSpec: feature_dim must be positive");
  for (const auto& s : stages()) {
    require(s.height >= 1 && s.width >= 1, "ConvSpec: spatial dims collapse below 1");
  }
  for (const auto& l : layers) {
    require(l.out_channels > 0 && l.kernel > 0 && l.stride > 0, "ConvSpec: bad layer");
  }
}

void assert_finite(const ParamVector& p, const std::string& what) {
  for (size_t i = 0; i < p.values.size(); ++i) {
    if (!std::isfinite(p.values[i])) {
      throw std::runtime_error(what + ": non-finite value at component " + std::to_string(i));
    }
  }
}

Matrix mlp_forward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs) {
  require(inputs.cols == spec.input_dim, "mlp_forward: input width does not match spec.input_dim");
  require(params.size() == spec.param_count(), "mlp_forward: parameter count mismatch");

  const auto widths = spec.layer_widths();
  const int n_layers = spec.layer_count();
  Matrix cur = inputs;
  for (int l = 0; l < n_layers; ++l) {
    const int in_w = widths[l];
    const int out_w = widths[l + 1];
    const double* W = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    const bool hidden = l + 1 < n_layers;
    Matrix next(cur.rows, out_w);
    for (int r = 0; r < cur.rows; ++r) {
      const double* x = cur.row(r).data();
      double* y = next.row(r).data();
      for (int o = 0; o < out_w; ++o) {
        const double* wrow = W + static_cast<size_t>(o) * in_w;
        double acc = b[o];
        for (int i = 0; i < in_w; ++i) acc += wrow[i] * x[i];
        y[o] = hidden ? activate(spec.activation, acc) : acc;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

MlpGradients mlp_backward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs,
                          const Matrix& upstream) {
  require(inputs.cols == spec.input_dim, "mlp_backward: input width does not match spec.input_dim");
  require(upstream.cols == spec.output_dim, "mlp_backward: upstream width does not match output_dim");
  require(upstream.rows == inputs.rows, "mlp_backward: upstream batch size mismatch");
  require(params.size() == spec.param_count(), "mlp_backward: parameter count mismatch");

  const auto widths = spec.layer_widths();
  const int n_layers = spec.layer_count();

  // Forward pass keeping pre-activations per layer.
  std::vector<Matrix> acts(n_layers + 1);  // acts[l] feeds layer l
  std::vector<Matrix> pre(n_layers);
  acts[0] = inputs;
  for (int l = 0; l < n_layers; ++l) {
    const int in_w = widths[l];
    const int out_w = widths[l + 1];
    const double* W = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    const bool hidden = l + 1 < n_layers;
    pre[l] = Matrix(inputs.rows, out_w);
    acts[l + 1] = Matrix(inputs.rows, out_w);
    for (int r = 0; r < inputs.rows; ++r) {
      const double* x = acts[l].row(r).data();
      for (int o = 0; o < out_w; ++o) {
        const double* wrow = W + static_cast<size_t>(o) * in_w;
        double acc = b[o];
        for (int i = 0; i < in_w; ++i) acc += wrow[i] * x[i];
        pre[l].at(r, o) = acc;
        acts[l + 1].at(r, o) = hidden ? activate(spec.activation, acc) : acc;
      }
    }
  }

  MlpGradients g;
  g.param_grad = ParamVector(spec.param_count());
  Matrix delta = upstream;  // gradient w.r.t. layer output, walked backwards
  for (int l = n_layers - 1; l >= 0; --l) {
    const int in_w = widths[l];
    const int out_w = widths[l + 1];
    const bool hidden = l + 1 < n_layers;
    double* gW = g.param_grad.data() + spec.weight_offset(l);
    double* gb = g.param_grad.data() + spec.bias_offset(l);
    const double* W = params.data() + spec.weight_offset(l);
    Matrix prev_delta(inputs.rows, in_w);
    for (int r = 0; r < inputs.rows; ++r) {
      const double* x = acts[l].row(r).data();
      double* pd = prev_delta.row(r).data();
      for (int o = 0; o < out_w; ++o) {
        double d = delta.at(r, o);
        if (hidden) d *= activate_grad(spec.activation, pre[l].at(r, o));
        gb[o] += d;
        double* gwrow = gW + static_cast<size_t>(o) * in_w;
        const double* wrow = W + static_cast<size_t>(o) * in_w;
        for (int i = 0; i < in_w; ++i) {
          gwrow[i] += d * x[i];
          pd[i] += d * wrow[i];
        }
      }
    }
    delta = std::move(prev_delta);
  }
  g.input_grad = std::move(delta);
  return g;
}

namespace {

// Conv helper: forward one layer without activation.
void conv_layer_forward(const double* W, const double* b, const ConvLayerSpec& l,
                        const ConvSpec::Stage& in, const ConvSpec::Stage& out, const double* x,
                        double* y) {
  for (int oc = 0; oc < out.channels; ++oc) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < in.channels; ++ic) {
          for (int ky = 0; ky < l.kernel; ++ky) {
            const int iy = oy * l.stride + ky;
            const double* xrow = x + (static_cast<size_t>(ic) * in.height + iy) * in.width;
            const double* wrow =
                W + ((static_cast<size_t>(oc) * in.channels + ic) * l.kernel + ky) * l.kernel;
            const int ix0 = ox * l.stride;
            for (int kx = 0; kx < l.kernel; ++kx) acc += wrow[kx] * xrow[ix0 + kx];
          }
        }
        y[(static_cast<size_t>(oc) * out.height + oy) * out.width + ox] = acc;
      }
    }
  }
}

}  // namespace

Matrix conv_forward(const ParamVector& params, const ConvSpec& spec, const Matrix& images) {
  const auto stages = spec.stages();
  require(images.cols == stages[0].size(), "conv_forward: image size does not match spec");
  require(params.size() == spec.param_count(), "conv_forward: parameter count mismatch");

  const int n_conv = static_cast<int>(spec.layers.size());
  Matrix features(images.rows, spec.feature_dim);
  std::vector<double> buf_in, buf_out;
  for (int r = 0; r < images.rows; ++r) {
    buf_in.assign(images.row(r).begin(), images.row(r).end());
    for (int l = 0; l < n_conv; ++l) {
      buf_out.assign(static_cast<size_t>(stages[l + 1].size()), 0.0);
      conv_layer_forward(params.data() + spec.conv_weight_offset(l),
                         params.data() + spec.conv_bias_offset(l), spec.layers[l], stages[l],
                         stages[l + 1], buf_in.data(), buf_out.data());
      for (double& v : buf_out) v = activate(spec.activation, v);
      buf_in.swap(buf_out);
    }
    const double* W = params.data() + spec.linear_weight_offset();
    const double* b = params.data() + spec.linear_bias_offset();
    const int flat = spec.flat_output_size();
    for (int o = 0; o < spec.feature_dim; ++o) {
      const double* wrow = W + static_cast<size_t>(o) * flat;
      double acc = b[o];
      for (int i = 0; i < flat; ++i) acc += wrow[i] * buf_in[i];
      features.at(r, o) = acc;
    }
  }
  return features;
}

ConvGradients conv_backward(const ParamVector& params, const ConvSpec& spec, const Matrix& images,
                            const Matrix& upstream) {
  const auto stages = spec.stages();
  require(images.cols == stages[0].size(), "conv_backward: image size does not match spec");
  require(upstream.cols == spec.feature_dim, "conv_backward: upstream width mismatch");
  require(upstream.rows == images.rows, "conv_backward: upstream batch size mismatch");
  require(params.size() == spec.param_count(), "conv_backward: parameter count mismatch");

  const int n_conv = static_cast<int>(spec.layers.size());
  ConvGradients g;
  g.param_grad = ParamVector(spec.param_count());
  g.input_grad = Matrix(images.rows, images.cols);

  // Per-sample pre-activation caches, reused across the batch.
  std::vector<std::vector<double>> pre(n_conv);
  std::vector<std::vector<double>> act(n_conv + 1);
  for (int r = 0; r < images.rows; ++r) {
    act[0].assign(images.row(r).begin(), images.row(r).end());
    for (int l = 0; l < n_conv; ++l) {
      pre[l].assign(static_cast<size_t>(stages[l + 1].size()), 0.0);
      conv_layer_forward(params.data() + spec.conv_weight_offset(l),
                         params.data() + spec.conv_bias_offset(l), spec.layers[l], stages[l],
                         stages[l + 1], act[l].data(), pre[l].data());
      act[l + 1].resize(pre[l].size());
      for (size_t i = 0; i < pre[l].size(); ++i) act[l + 1][i] = activate(spec.activation, pre[l][i]);
    }

    // Linear projection backwards.
    const int flat = spec.flat_output_size();
    const double* W = params.data() + spec.linear_weight_offset();
    double* gW = g.param_grad.data() + spec.linear_weight_offset();
    double* gb = g.param_grad.data() + spec.linear_bias_offset();
    std::vector<double> delta(static_cast<size_t>(flat), 0.0);
    for (int o = 0; o < spec.feature_dim; ++o) {
      const double d = upstream.at(r, o);
      gb[o] += d;
      const double* wrow = W + static_cast<size_t>(o) * flat;
      double* gwrow = gW + static_cast<size_t>(o) * flat;
      const double* x = act[n_conv].data();
      for (int i = 0; i < flat; ++i) {
        gwrow[i] += d * x[i];
        delta[i] += d * wrow[i];
      }
    }

    // Conv layers backwards.
    for (int l = n_conv - 1; l >= 0; --l) {
      const ConvLayerSpec& ls = spec.layers[l];
      const auto& in = stages[l];
      const auto& out = stages[l + 1];
      const double* Wc = params.data() + spec.conv_weight_offset(l);
      double* gWc = g.param_grad.data() + spec.conv_weight_offset(l);
      double* gbc = g.param_grad.data() + spec.conv_bias_offset(l);
      std::vector<double> prev_delta(static_cast<size_t>(in.size()), 0.0);
      for (int oc = 0; oc < out.channels; ++oc) {
        for (int oy = 0; oy < out.height; ++oy) {
          for (int ox = 0; ox < out.width; ++ox) {
            const size_t oi = (static_cast<size_t>(oc) * out.height + oy) * out.width + ox;
            const double d = delta[oi] * activate_grad(spec.activation, pre[l][oi]);
            if (d == 0.0) continue;
            gbc[oc] += d;
            for (int ic = 0; ic < in.channels; ++ic) {
              for (int ky = 0; ky < ls.kernel; ++ky) {
                const int iy = oy * ls.stride + ky;
                const double* xrow = act[l].data() + (static_cast<size_t>(ic) * in.height + iy) * in.width;
                double* pdrow = prev_delta.data() + (static_cast<size_t>(ic) * in.height + iy) * in.width;
                const double* wrow =
                    Wc + ((static_cast<size_t>(oc) * in.channels + ic) * ls.kernel + ky) * ls.kernel;
                double* gwrow =
                    gWc + ((static_cast<size_t>(oc) * in.channels + ic) * ls.kernel + ky) * ls.kernel;
                const int ix0 = ox * ls.stride;
                for (int kx = 0; kx < ls.kernel; ++kx) {
                  gwrow[kx] += d * xrow[ix0 + kx];
                  pdrow[ix0 + kx] += d * wrow[kx];
                }
              }
            }
          }
        }
      }
      delta.swap(prev_delta);
    }
    for (int i = 0; i < images.cols; ++i) g.input_grad.at(r, i) = delta[i];
  }
  return g;
}

ParamVector init_mlp_params(const MlpSpec& spec, uint64_t seed, double final_layer_scale) {
  spec.validate();
  ParamVector p(spec.param_count());
  const auto widths = spec.layer_widths();
  rng::Stream stream(rng::mix(seed, 0x6d6c70));
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in_w = widths[l];
    const int out_w = widths[l + 1];
    double std = 1.0 / std::sqrt(static_cast<double>(in_w));
    if (l + 1 == spec.layer_count()) std *= final_layer_scale;
    double* W = p.data() + spec.weight_offset(l);
    for (int i = 0; i < in_w * out_w; ++i) W[i] = std * stream.normal();
    // biases stay zero
  }
  return p;
}

ParamVector init_conv_params(const ConvSpec& spec, uint64_t seed) {
  spec.validate();
  ParamVector p(spec.param_count());
  const auto stages = spec.stages();
  rng::Stream stream(rng::mix(seed, 0x636e76));
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& ls = spec.layers[l];
    const int fan_in = stages[l].channels * ls.kernel * ls.kernel;
    const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* W = p.data() + spec.conv_weight_offset(static_cast<int>(l));
    const int n = ls.out_channels * fan_in;
    for (int i = 0; i < n; ++i) W[i] = std * stream.normal();
  }
  const int flat = spec.flat_output_size();
  const double std = 1.0 / std::sqrt(static_cast<double>(flat));
  double* W = p.data() + spec.linear_weight_offset();
  for (int i = 0; i < flat * spec.feature_dim; ++i) W[i] = std * stream.normal();
  return p;
}

AdamState AdamState::make(int param_count, double lr) {
  AdamState s;
  s.m.assign(static_cast<size_t>(param_count), 0.0);
  s.v.assign(static_cast<size_t>(param_count), 0.0);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, ParamVector& params, const ParamVector& grads, double max_norm,
               double lr_multiplier) {
  require(static_cast<int>(state.m.size()) == params.size(), "adam_step: state size mismatch");
  require(grads.size() == params.size(), "adam_step: grad size mismatch");
  require(max_norm > 0.0, "adam_step: max_norm must be positive");
  for (size_t i = 0; i < grads.values.size(); ++i) {
    if (!std::isfinite(grads.values[i])) {
      throw std::runtime_error("adam_step: non-finite gradient at component " + std::to_string(i));
    }
  }

  const double norm = l2_norm(grads.span());
  const double scale = norm > max_norm ? max_norm / norm : 1.0;

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double lr = state.lr * lr_multiplier;
  for (size_t i = 0; i < params.values.size(); ++i) {
    const double g = grads.values[i] * scale;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params.values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  assert_finite(params, "adam_step: parameters after update");
}

double LrSchedule::multiplier(int epoch) const {
  switch (kind) {
    case Kind::Constant:
      return 1.0;
    case Kind::CosineWithWarmup: {
      if (warmup_epochs > 0 && epoch < warmup_epochs) {
        return static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
      }
      const int span = total_epochs - 1 - warmup_epochs;
      if (span <= 0) return epoch >= total_epochs - 1 ? min_multiplier : 1.0;
      const double progress =
          std::min(1.0, static_cast<double>(epoch - warmup_epochs) / static_cast<double>(span));
      return min_multiplier +
             (1.0 - min_multiplier) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    }
    case Kind::LinearDecay: {
      if (total_epochs <= 1) return start_frac;
      const double progress = std::min(
          1.0, static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
      return start_frac + (end_frac - start_frac) * progress;
    }
  }
  return 1.0;
}

void LrSchedule::validate() const {
  require(total_epochs >= 1, "LrSchedule: total_epochs must be >= 1");
  if (kind == Kind::CosineWithWarmup) {
    require(min_multiplier > 0.0, "LrSchedule: min_multiplier must be positive");
  }
  if (kind == Kind::LinearDecay) {
    require(start_frac > 0.0 && end_frac > 0.0, "LrSchedule: fractions must be positive");
  }
}

}  // namespace sdpg::nn
