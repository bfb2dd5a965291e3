#include "sdpg/policy.hpp"

#include <algorithm>
#include <stdexcept>

#include "sdpg/rng.hpp"

namespace sdpg::policy {

ObsBatch ObsBatch::with_rows(const ObsBatch& like, int rows) {
  ObsBatch b;
  b.mode = like.mode;
  if (b.mode == envs::ObsMode::State) {
    b.state = Matrix(rows, like.state.cols);
  } else {
    b.frames = Matrix(rows, like.frames.cols);
    b.proprio = Matrix(rows, like.proprio.cols);
  }
  return b;
}

void ObsBatch::set_row(int r, const envs::Observation& o) {
  if (mode == envs::ObsMode::State) {
    std::copy(o.state.begin(), o.state.end(), state.row(r).begin());
  } else {
    std::copy(o.frames.begin(), o.frames.end(), frames.row(r).begin());
    std::copy(o.proprio.begin(), o.proprio.end(), proprio.row(r).begin());
  }
}

int ActorNet::param_count() const { return encoder_param_count() + head.param_count(); }

namespace {

// Assemble the head input for pixel mode: conv features then proprio.
Matrix head_input(const Matrix& features, const Matrix& proprio) {
  Matrix in(features.rows, features.cols + proprio.cols);
  for (int r = 0; r < features.rows; ++r) {
    auto dst = in.row(r);
    auto f = features.row(r);
    std::copy(f.begin(), f.end(), dst.begin());
    auto p = proprio.row(r);
    std::copy(p.begin(), p.end(), dst.begin() + features.cols);
  }
  return in;
}

nn::ParamVector slice_params(const nn::ParamVector& params, int offset, int count) {
  nn::ParamVector out(count);
  std::copy(params.values.begin() + offset, params.values.begin() + offset + count,
            out.values.begin());
  return out;
}

}  // namespace

Matrix ActorNet::forward(const nn::ParamVector& params, const ObsBatch& obs) const {
  if (params.size() != param_count()) {
    throw std::invalid_argument("ActorNet::forward: parameter count mismatch");
  }
  if (mode == envs::ObsMode::State) {
    return nn::mlp_forward(params, head, obs.state);
  }
  const auto enc_params = slice_params(params, 0, encoder_param_count());
  const auto head_params = slice_params(params, encoder_param_count(), head.param_count());
  const Matrix features = nn::conv_forward(enc_params, *encoder, obs.frames);
  return nn::mlp_forward(head_params, head, head_input(features, obs.proprio));
}

nn::ParamVector ActorNet::backward(const nn::ParamVector& params, const ObsBatch& obs,
                                   const Matrix& upstream, Matrix* obs_grad) const {
  if (params.size() != param_count()) {
    throw std::invalid_argument("ActorNet::backward: parameter count mismatch");
  }
  if (mode == envs::ObsMode::State) {
    auto g = nn::mlp_backward(params, head, obs.state, upstream);
    if (obs_grad) *obs_grad = std::move(g.input_grad);
    return std::move(g.param_grad);
  }
  const auto enc_params = slice_params(params, 0, encoder_param_count());
  const auto head_params = slice_params(params, encoder_param_count(), head.param_count());
  const Matrix features = nn::conv_forward(enc_params, *encoder, obs.frames);
  const Matrix in = head_input(features, obs.proprio);
  auto head_g = nn::mlp_backward(head_params, head, in, upstream);
  // Split head-input gradient into the feature part flowing into the encoder.
  Matrix feat_grad(features.rows, features.cols);
  for (int r = 0; r < features.rows; ++r) {
    auto src = head_g.input_grad.row(r);
    std::copy(src.begin(), src.begin() + features.cols, feat_grad.row(r).begin());
  }
  auto enc_g = nn::conv_backward(enc_params, *encoder, obs.frames, feat_grad);

  nn::ParamVector grad(param_count());
  std::copy(enc_g.param_grad.values.begin(), enc_g.param_grad.values.end(), grad.values.begin());
  std::copy(head_g.param_grad.values.begin(), head_g.param_grad.values.end(),
            grad.values.begin() + encoder_param_count());
  if (obs_grad) *obs_grad = std::move(head_g.input_grad);
  return grad;
}

nn::ParamVector ActorNet::init_params(uint64_t seed) const {
  // Final actor layer shrunk so initial mean actions sit near zero.
  nn::ParamVector head_params = nn::init_mlp_params(head, rng::mix(seed, 0x41), 0.01);
  if (mode == envs::ObsMode::State) return head_params;
  nn::ParamVector enc_params = nn::init_conv_params(*encoder, rng::mix(seed, 0x42));
  nn::ParamVector out(param_count());
  std::copy(enc_params.values.begin(), enc_params.values.end(), out.values.begin());
  std::copy(head_params.values.begin(), head_params.values.end(),
            out.values.begin() + encoder_param_count());
  return out;
}

ActorNet ActorNet::make(envs::ObsMode mode, int obs_dim, int proprio_dim, int action_dim,
                        const std::vector<int>& hidden, int conv_feature_dim) {
  ActorNet net;
  net.mode = mode;
  if (mode == envs::ObsMode::Pixels) {
    nn::ConvSpec conv;
    conv.in_channels = envs::kFrameStack;
    conv.in_height = envs::kFrameSize;
    conv.in_width = envs::kFrameSize;
    conv.layers = {{8, 3, 2}, {16, 3, 2}};
    conv.feature_dim = conv_feature_dim;
    conv.validate();
    net.encoder = conv;
    net.head.input_dim = conv_feature_dim + proprio_dim;
  } else {
    net.head.input_dim = obs_dim;
  }
  net.head.hidden_widths = hidden;
  net.head.output_dim = action_dim;
  net.head.activation = nn::Activation::Elu;
  net.head.validate();
  return net;
}

std::vector<double> critic_values(const nn::ParamVector& params, const nn::MlpSpec& spec,
                                  const Matrix& states) {
  const Matrix out = nn::mlp_forward(params, spec, states);
  std::vector<double> v(static_cast<size_t>(out.rows));
  for (int r = 0; r < out.rows; ++r) v[r] = out.at(r, 0);
  return v;
}

nn::MlpSpec make_critic_spec(int state_dim, const std::vector<int>& hidden) {
  nn::MlpSpec spec;
  spec.input_dim = state_dim;
  spec.hidden_widths = hidden;
  spec.output_dim = 1;
  spec.activation = nn::Activation::Elu;
  spec.validate();
  return spec;
}

}  // namespace sdpg::policy
