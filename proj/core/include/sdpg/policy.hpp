#pragma once

#include <optional>
#include <vector>

#include "sdpg/envs.hpp"
#include "sdpg/matrix.hpp"
#include "sdpg/nn.hpp"

namespace sdpg::policy {

// Column-batched observations; the layout matching an ActorNet's input.
struct ObsBatch {
  envs::ObsMode mode = envs::ObsMode::State;
  Matrix state;    // state mode: rows x obs_dim
  Matrix frames;   // pixel mode: rows x (stack * frame pixels)
  Matrix proprio;  // pixel mode: rows x proprio_dim (may be zero columns)

  int rows() const { return mode == envs::ObsMode::State ? state.rows : frames.rows; }
  static ObsBatch with_rows(const ObsBatch& like, int rows);
  void set_row(int r, const envs::Observation& o);
};

// Actor mean network. Pixel mode runs the conv encoder, concatenates the
// proprioceptive sub-vector, and feeds the MLP head; state mode is the head
// alone. Parameters are one flat vector: [encoder | head].
struct ActorNet {
  envs::ObsMode mode = envs::ObsMode::State;
  std::optional<nn::ConvSpec> encoder;
  nn::MlpSpec head;

  int param_count() const;
  int encoder_param_count() const { return encoder ? encoder->param_count() : 0; }
  int action_dim() const { return head.output_dim; }

  Matrix forward(const nn::ParamVector& params, const ObsBatch& obs) const;
  // Gradient of sum <upstream, output> w.r.t. the flat parameters; if
  // obs_grad is non-null it receives the gradient w.r.t. the head inputs
  // (features+proprio in pixel mode, raw state otherwise).
  nn::ParamVector backward(const nn::ParamVector& params, const ObsBatch& obs,
                           const Matrix& upstream, Matrix* obs_grad = nullptr) const;

  nn::ParamVector init_params(uint64_t seed) const;

  static ActorNet make(envs::ObsMode mode, int obs_dim, int proprio_dim, int action_dim,
                       const std::vector<int>& hidden, int conv_feature_dim);
};

// Value head over privileged states.
std::vector<double> critic_values(const nn::ParamVector& params, const nn::MlpSpec& spec,
                                  const Matrix& states);

nn::MlpSpec make_critic_spec(int state_dim, const std::vector<int>& hidden);

}  // namespace sdpg::policy
