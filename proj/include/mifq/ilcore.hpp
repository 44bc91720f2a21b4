#pragma once

#include "mifq/autodiff.hpp"
#include "mifq/common.hpp"
#include "mifq/envs.hpp"
#include "mifq/expert.hpp"
#include "mifq/nets.hpp"

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace mifq {

struct TrainConfig {
  double gamma = 0.99;
  double lr_theta = 5e-4;
  double lr_omega = 5e-4;
  int batch_size = 128;
  int hidden_dim = 128;
  int mix_hidden = 32;
  int buffer_capacity = 5000;
  int target_sync = 4;
  int collect_steps_per_loop = 8;
  int train_steps_per_loop = 8;
  long max_steps = 100000;  // environment steps
  long eval_every = 10000;  // environment steps between eval points
  int eval_episodes = 32;
  uint64_t seed = 0;
  bool greedy_eval = false;
  bool deterministic_timing = false;
  bool force_identity_mixer = false;  // single-agent reduction runs only
  // Decoupled pull of the hyper-net weights toward their initialization,
  // applied after each optimizer step at rate lr_omega * omega_anchor. The
  // imitation objective is linear in each mixer's output, so unanchored
  // hyper-nets can drift into constant mixers that carry no learning signal.
  double omega_anchor = 100.0;
  int bc_epochs = 200;
  double bc_val_fraction = 0.1;

  void validate() const;
};

enum class AlgoKind { Mifq, Bc, Iiq, Iqvdn, Masqil };
AlgoKind algo_from_string(const std::string& s);
std::string to_string(AlgoKind k);

enum class MixerKind { HyperElu, FixedLinear, Identity };

/// Fixed-capacity ring; uniform sampling with replacement over live contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  void push(Transition t);
  std::vector<const Transition*> sample(int n, Rng& rng) const;
  size_t size() const { return data_.size(); }
  int capacity() const { return capacity_; }

 private:
  std::vector<Transition> data_;
  int capacity_;
  size_t cursor_ = 0;
};

/// Everything a run trains: local Q heads (shared or per-agent), the two
/// hyper-nets, and hard-copied target networks.
struct MifqParams {
  DecPomdpSpec env_spec;
  MixerKind mixer = MixerKind::HyperElu;
  bool per_agent = false;
  Vector linear_weights;  // FixedLinear only

  std::vector<LocalQNet> theta;
  std::vector<LocalQNet> theta_target;
  HyperNet hyper_r, hyper_r_target;  // expert/reward head (TD head for masqil)
  HyperNet hyper_v, hyper_v_target;
  std::vector<Matrix> omega_init;  // hyper-net values at creation
  long train_steps_done = 0;

  static MifqParams make(const DecPomdpSpec& spec, MixerKind mixer, bool per_agent, int hidden,
                         int mix_hidden, Rng& rng);

  LocalQNet& q_net(int agent) { return theta[per_agent ? agent : 0]; }
  const LocalQNet& q_net(int agent) const { return theta[per_agent ? agent : 0]; }
  const LocalQNet& q_net_target(int agent) const { return theta_target[per_agent ? agent : 0]; }

  void sync_targets();
  /// value += -rate * (value - init) on every hyper-net tensor.
  void anchor_omega(double rate);
  std::vector<ad::Tensor*> theta_params();
  std::vector<ad::Tensor*> omega_params();
  std::vector<std::pair<std::string, ad::Tensor*>> named_params();
};

// ---- building blocks ----

/// V_i = logsumexp_a Q_i(o_i, a) per agent, from the live nets.
Vector local_state_values(const MifqParams& params, const std::vector<Vector>& obs);

/// r_i = q_i - gamma * v'_i with the bootstrap masked at terminals.
Vector inverse_bellman(const Vector& q_taken, const Vector& v_next, bool done, double gamma);

using ad::chi2;

struct LossOptions {
  MixerKind mixer = MixerKind::HyperElu;
  bool independent = false;  // no mixing: sum of per-agent objectives
  bool use_chi2 = true;
};

struct LossBreakdown {
  ad::Var total;
  double expert_term = 0.0;
  double value_term = 0.0;
  std::vector<double> per_agent;  // independent mode only
};

/// Imitation objective over an expert batch and a replay batch:
/// mean phi(M_R(-R^Q)) + mean[V^tot(S) - gamma V^tot(S') (targets)].
LossBreakdown build_il_loss(ad::Graph& g, MifqParams& params,
                            const std::vector<const Transition*>& expert_batch,
                            const std::vector<const Transition*>& replay_batch,
                            const LossOptions& opt);

/// MIFQ practical loss with the params' own mixer and the chi^2 regularizer.
LossBreakdown mifq_loss(ad::Graph& g, MifqParams& params,
                        const std::vector<const Transition*>& expert_batch,
                        const std::vector<const Transition*>& replay_batch);

/// Single-agent IQ objective for agent i (no mixing), same phi and
/// telescoped value treatment as the joint loss.
ad::Var iiq_loss(ad::Graph& g, MifqParams& params, int agent,
                 const std::vector<const Transition*>& expert_batch,
                 const std::vector<const Transition*>& replay_batch, bool use_chi2 = true);

/// TD objective on membership rewards: (Q^tot - [r + gamma V^tot'])^2.
/// `synthetic_reward` holds one value per batch entry.
ad::Var masqil_loss(ad::Graph& g, MifqParams& params,
                    const std::vector<const Transition*>& batch,
                    const std::vector<double>& synthetic_reward);

/// Exact check of (1-gamma) E[V(S0)] = E_rho[V(S) - gamma E V(S')] under the
/// discounted occupancy of `policy` (rows: per-state joint-action probs).
std::pair<double, double> v0_telescope_check(const TabularModel& model, const Matrix& policy,
                                             const Vector& v, double gamma);

/// pi_i(.|o_i) = softmax Q_i(o_i, .), from the live nets.
Vector recover_policy(const MifqParams& params, const Vector& obs, int agent);

/// Per-agent reward implied by the live Q nets on one transition.
Vector recover_reward(const MifqParams& params, const Transition& t);

/// Softmax (or greedy) execution policy over the live local Q nets.
JointPolicy net_policy(const MifqParams& params, bool greedy = false);

// ---- training ----

struct MetricsRow {
  long step = 0;
  uint64_t seed = 0;
  double mean_return = 0.0;
  double solve_rate = 0.0;
  double loss_total = 0.0;
  double loss_expert_term = 0.0;
  double loss_value_term = 0.0;
  double wallclock = 0.0;
};

struct TrainResult {
  MifqParams params;
  std::vector<MetricsRow> metrics;
  std::vector<double> loss_trace;  // one entry per gradient step
};

/// Algorithm loop for the online imitation learners (mifq, iiq, iqvdn,
/// masqil): alternate collection with the softmax policy and gradient steps
/// on minibatches, syncing targets every cfg.target_sync updates.
TrainResult train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg, AlgoKind algo);

/// Evaluation rollouts disjoint from the training streams.
std::pair<double, double> evaluate_policy(Env& env, const JointPolicy& policy, int n_episodes,
                                          uint64_t seed);

}  // namespace mifq
