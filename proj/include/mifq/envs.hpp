#pragma once

#include "mifq/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mifq {

struct DecPomdpSpec {
  int num_agents = 0;
  int state_dim = 0;
  int obs_dim = 0;
  std::vector<int> action_counts;
  int horizon = 0;
  double gamma = 0.99;

  void validate() const;
  /// All built-in envs use one action count for every agent.
  int actions_per_agent() const { return action_counts.front(); }
  int joint_action_count() const;
};

/// One environment step, stored with everything any learner consumes:
/// global states for the mixers, local observations for the Q nets.
struct Transition {
  Vector state;
  std::vector<Vector> obs;
  std::vector<int> actions;
  double reward = 0.0;
  Vector next_state;
  std::vector<Vector> next_obs;
  bool done = false;
};

struct StepResult {
  Vector state;
  std::vector<Vector> obs;
  double reward = 0.0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const DecPomdpSpec& spec() const = 0;
  virtual std::string id() const = 0;
  virtual std::string params_json() const = 0;

  virtual void reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& actions) = 0;

  virtual Vector state() const = 0;
  virtual bool done() const = 0;
  /// Success flag at the final step, where the env defines one.
  virtual bool solved() const { return false; }

  /// Observations are a pure function of the global state.
  virtual std::vector<Vector> observations_for(const Vector& state) const = 0;
  std::vector<Vector> observations() const { return observations_for(state()); }

  virtual std::unique_ptr<Env> clone_fresh() const = 0;

  /// Identifies the env family and all parameters; stamped into data files.
  uint64_t spec_hash() const;

 protected:
  void check_actions(const std::vector<int>& actions) const;
};

/// Exact tabular view of a small env: row s*|JA|+ja of `trans` is the
/// next-state distribution, reward(s, ja) the shared reward.
struct TabularModel {
  int num_states = 0;
  int num_agents = 0;
  std::vector<int> action_counts;
  Matrix trans;    // (num_states * joint_actions) x num_states
  Matrix reward;   // num_states x joint_actions
  Vector initial;  // num_states

  int joint_action_count() const;
  int joint_index(const std::vector<int>& actions) const;
  std::vector<int> decode_joint(int ja) const;
};

/// m agents cover m landmarks on a grid; reward is the negated sum of each
/// landmark's distance to its nearest agent minus one per colliding pair.
class SpreadLite : public Env {
 public:
  SpreadLite(int num_agents = 3, int grid = 5, int horizon = 25, double gamma = 0.99);

  const DecPomdpSpec& spec() const override { return spec_; }
  std::string id() const override { return "spread"; }
  std::string params_json() const override;
  void reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  Vector state() const override;
  bool done() const override { return done_; }
  bool solved() const override;
  std::vector<Vector> observations_for(const Vector& state) const override;
  std::unique_ptr<Env> clone_fresh() const override;

 private:
  DecPomdpSpec spec_;
  int grid_;
  std::vector<int> ax_, ay_, lx_, ly_;
  int t_ = 0;
  bool done_ = true;
  bool solved_ = false;
};

/// Two miners gather value-bearing piles under a per-agent carry capacity;
/// the team shares the collected value each step.
class MinerLite : public Env {
 public:
  MinerLite(int grid = 7, int num_piles = 8, int capacity = 10, int horizon = 50,
            double gamma = 0.99);

  const DecPomdpSpec& spec() const override { return spec_; }
  std::string id() const override { return "miner"; }
  std::string params_json() const override;
  void reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  Vector state() const override;
  bool done() const override { return done_; }
  bool solved() const override;
  std::vector<Vector> observations_for(const Vector& state) const override;
  std::unique_ptr<Env> clone_fresh() const override;

 private:
  double gold_at(const Vector& state, int x, int y) const;
  DecPomdpSpec spec_;
  int grid_, num_piles_, capacity_;
  std::vector<int> ax_, ay_;
  std::vector<double> cap_;
  std::vector<double> gold_;  // grid_*grid_ cells
  int t_ = 0;
  bool done_ = true;
  bool solved_ = false;
};

/// Three states, two agents with two actions each, two steps. Agent 0's
/// first move picks (stochastically) which payoff matrix is played next;
/// fully enumerable, used as the exact oracle environment.
class TwoStepTeam : public Env {
 public:
  explicit TwoStepTeam(double gamma = 0.99);

  const DecPomdpSpec& spec() const override { return spec_; }
  std::string id() const override { return "two_step"; }
  std::string params_json() const override;
  void reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  Vector state() const override;
  bool done() const override { return done_; }
  std::vector<Vector> observations_for(const Vector& state) const override;
  std::unique_ptr<Env> clone_fresh() const override;

  TabularModel model() const;
  static Vector encode_state(int s);
  static int decode_state(const Vector& v);

 private:
  DecPomdpSpec spec_;
  int s_ = 0;
  int t_ = 0;
  bool done_ = true;
  std::unique_ptr<Rng> rng_;
};

/// Exact model of a tabular env; throws for envs without one.
TabularModel enumerate_model(const Env& env);

std::unique_ptr<Env> make_env(const std::string& id, const std::string& params_json = "{}");

}  // namespace mifq
