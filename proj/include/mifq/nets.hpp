#pragma once

#include "mifq/autodiff.hpp"
#include "mifq/common.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mifq {

/// Fully-connected stack with ReLU between layers and a linear output.
struct Mlp {
  struct Layer {
    ad::Tensor W;  // in x out
    ad::Tensor b;  // 1 x out
  };
  std::vector<Layer> layers;

  /// dims = {in, hidden..., out}; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp make(const std::vector<int>& dims, Rng& rng);

  ad::Var forward(ad::Graph& g, ad::Var x);
  Matrix forward_nograd(const Matrix& x) const;

  int in_dim() const { return static_cast<int>(layers.front().W.value.rows()); }
  int out_dim() const { return static_cast<int>(layers.back().W.value.cols()); }

  std::vector<ad::Tensor*> params();
  std::vector<std::pair<std::string, ad::Tensor*>> named_params(const std::string& prefix);
  void copy_from(const Mlp& other);
  void set_zero();
};

/// Action-value head. When id_dims > 0 the net is shared across agents and
/// rows carry the agent's one-hot id after the observation; id_dims == 0
/// builds an independent per-agent head with no id input.
struct LocalQNet {
  Mlp net;
  int obs_dim = 0;
  int id_dims = 0;
  int num_actions = 0;

  static LocalQNet make(int obs_dim, int id_dims, int num_actions, int hidden, Rng& rng);

  /// Single observation -> Q(o_i, .) as a 1 x |A| row.
  Matrix q_values(const Vector& obs, int agent_id) const;

  /// Row layout for batched forwards: obs, then the one-hot id when shared.
  Matrix input_row(const Vector& obs, int agent_id) const;
};

/// Per-state weight bundle for one two-layer mixing head.
struct MixingWeights {
  Matrix w1;   // m x h, raw (may be negative)
  Vector b1;   // h
  Vector w2;   // h, raw
  double b2 = 0.0;

  Vector flatten() const;
  static MixingWeights unflatten(const Vector& flat, int m, int h);
  static int flat_size(int m, int h) { return m * h + h + h + 1; }
};

/// Two fully-connected layers with a ReLU between; maps the global state to
/// the flattened MixingWeights of one mixing head.
struct HyperNet {
  Mlp net;
  int state_dim = 0;
  int num_agents = 0;
  int mix_hidden = 0;

  static HyperNet make(int state_dim, int num_agents, int mix_hidden, int hidden, Rng& rng);

  MixingWeights weights_for(const Vector& state) const;
};

/// elu(x * |W1| + b1) * |w2| + b2 for one sample. Non-negativity is applied
/// here, not in the hyper-net output.
double mixing_forward(const Vector& x, const MixingWeights& w);

/// Batched differentiable mixer: x is B x m, hyper_out is B x flat_size.
ad::Var mixing_forward(ad::Graph& g, ad::Var x, ad::Var hyper_out, int m, int h);

/// Batched hyper-net forward (graph path): states are B x d_S rows.
ad::Var hyper_forward(ad::Graph& g, HyperNet& h, ad::Var states);

/// Joint value from local values: M_{psi(state)}(x) with psi = hyper(state).
/// The reward head receives already-negated local rewards.
double hyper_mix(const Vector& x, const Vector& state, const HyperNet& h);

// ---- checkpoints ----

struct Checkpoint {
  std::string algo;
  std::string env_id;
  std::string env_params_json;  // compact JSON text
  uint64_t env_hash = 0;
  std::map<std::string, Matrix> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mifq
