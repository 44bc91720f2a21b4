#pragma once

#include "mifq/common.hpp"
#include "mifq/envs.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mifq {

/// Joint policy: maps (global state, local observations) to one action per
/// agent, drawing any randomness from the supplied stream.
using JointPolicy =
    std::function<std::vector<int>(const Vector& state, const std::vector<Vector>& obs, Rng& rng)>;

/// Soft Q-table over (state, joint action) at temperature 1.
struct TabularSoftQ {
  Matrix q;  // num_states x joint_actions
  double gamma = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;

  /// V(s) = logsumexp over joint actions of Q(s, .).
  Vector state_values() const;
};

/// Fixed-point iteration Q <- R + gamma * P V with V = logsumexp(Q).
/// Throws (with the last residual) if the tolerance is not met in time.
TabularSoftQ soft_value_iteration(const TabularModel& model, double gamma, double tol = 1e-8,
                                  int max_iters = 10000);

/// Joint softmax policy over Q rows.
JointPolicy expert_policy(const TabularSoftQ& softq, const TabularModel& model);

/// Per-state joint-action distribution of the softmax expert.
Matrix expert_policy_table(const TabularSoftQ& softq);

JointPolicy scripted_expert(const Env& env);
JointPolicy uniform_random_policy(std::vector<int> action_counts);

/// Exact reward implied by a soft Q-table: Q - gamma * P V.
Matrix recovered_reward_table(const TabularSoftQ& softq, const TabularModel& model);

struct DemonstrationSet {
  uint64_t env_hash = 0;
  uint64_t seed = 0;
  std::string expert_id;
  std::vector<std::vector<Transition>> episodes;

  int transition_count() const;
  std::vector<const Transition*> flat() const;
  void validate() const;
};

/// Runs n complete episodes; episode e uses the derived seed mix(seed, e)
/// for both the env and the policy so collection is order-deterministic.
DemonstrationSet collect_demonstrations(const JointPolicy& policy, Env& env, int n_episodes,
                                        uint64_t seed, const std::string& expert_id);

// Line-delimited UTF-8: a header object, then one transition object per line
// with keys ep, t, S, obs, A, r, Sn, obsn, done; floats carry 17 significant
// digits so files round-trip bit-exactly.
void save_demos(const DemonstrationSet& demos, const std::string& path);
DemonstrationSet load_demos(const std::string& path);

struct EpisodeStats {
  double ret = 0.0;
  bool solved = false;
  int steps = 0;
};

/// Resets the env with ep_seed and plays the policy to termination.
EpisodeStats rollout(Env& env, const JointPolicy& policy, uint64_t ep_seed);

}  // namespace mifq
