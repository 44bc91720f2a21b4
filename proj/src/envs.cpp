#include "mifq/envs.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mifq {

using json = nlohmann::json;

void DecPomdpSpec::validate() const {
  if (num_agents < 1) throw std::invalid_argument("DecPomdpSpec: need at least one agent");
  if (horizon < 1) throw std::invalid_argument("DecPomdpSpec: horizon must be at least 1");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("DecPomdpSpec: gamma must lie in (0, 1)");
  if (static_cast<int>(action_counts.size()) != num_agents)
    throw std::invalid_argument("DecPomdpSpec: one action count per agent required");
  for (int k : action_counts)
    if (k < 1) throw std::invalid_argument("DecPomdpSpec: action counts must be positive");
}

int DecPomdpSpec::joint_action_count() const {
  int n = 1;
  for (int k : action_counts) n *= k;
  return n;
}

uint64_t Env::spec_hash() const {
  const DecPomdpSpec& s = spec();
  std::ostringstream os;
  os << id() << "|" << s.num_agents << "|" << s.state_dim << "|" << s.obs_dim << "|";
  for (int k : s.action_counts) os << k << ",";
  os << "|" << s.horizon << "|" << format_g17(s.gamma) << "|" << params_json();
  return fnv1a64(os.str());
}

void Env::check_actions(const std::vector<int>& actions) const {
  if (done()) throw std::logic_error("Env::step: episode already finished; call reset");
  const DecPomdpSpec& s = spec();
  if (static_cast<int>(actions.size()) != s.num_agents)
    throw std::invalid_argument("Env::step: expected " + std::to_string(s.num_agents) +
                                " actions, got " + std::to_string(actions.size()));
  for (int i = 0; i < s.num_agents; ++i)
    if (actions[i] < 0 || actions[i] >= s.action_counts[i])
      throw std::invalid_argument("Env::step: action " + std::to_string(actions[i]) +
                                  " out of range for agent " + std::to_string(i));
}

int TabularModel::joint_action_count() const {
  int n = 1;
  for (int k : action_counts) n *= k;
  return n;
}

int TabularModel::joint_index(const std::vector<int>& actions) const {
  int ja = 0;
  for (size_t i = 0; i < actions.size(); ++i) ja = ja * action_counts[i] + actions[i];
  return ja;
}

std::vector<int> TabularModel::decode_joint(int ja) const {
  std::vector<int> a(action_counts.size());
  for (int i = static_cast<int>(action_counts.size()) - 1; i >= 0; --i) {
    a[i] = ja % action_counts[i];
    ja /= action_counts[i];
  }
  return a;
}

namespace {

// Moves: stay, up, down, left, right. y grows downward.
constexpr int kDx[5] = {0, 0, 0, -1, 1};
constexpr int kDy[5] = {0, -1, 1, 0, 0};

int clamp_coord(int v, int grid) { return std::max(0, std::min(grid - 1, v)); }

}  // namespace

// ---- SpreadLite ----

SpreadLite::SpreadLite(int num_agents, int grid, int horizon, double gamma) : grid_(grid) {
  if (grid < 2) throw std::invalid_argument("SpreadLite: grid must be at least 2");
  if (num_agents < 1 || 2 * num_agents > grid * grid)
    throw std::invalid_argument("SpreadLite: agents and landmarks must fit on the grid");
  spec_.num_agents = num_agents;
  spec_.state_dim = 4 * num_agents;  // agent xy + landmark xy
  spec_.obs_dim = 2 + 2 * num_agents;
  spec_.action_counts.assign(num_agents, 5);
  spec_.horizon = horizon;
  spec_.gamma = gamma;
  spec_.validate();
}

std::string SpreadLite::params_json() const {
  std::ostringstream os;
  os << "{\"agents\":" << spec_.num_agents << ",\"grid\":" << grid_
     << ",\"horizon\":" << spec_.horizon << ",\"gamma\":" << format_g17(spec_.gamma) << "}";
  return os.str();
}

void SpreadLite::reset(uint64_t seed) {
  Rng rng(mix_seed(seed, "spread.reset"));
  const int m = spec_.num_agents;
  // distinct cells for all agents and landmarks
  std::vector<int> cells(grid_ * grid_);
  std::iota(cells.begin(), cells.end(), 0);
  for (int i = 0; i < 2 * m; ++i) {
    int j = i + rng.uniform_int(static_cast<int>(cells.size()) - i);
    std::swap(cells[i], cells[j]);
  }
  ax_.resize(m);
  ay_.resize(m);
  lx_.resize(m);
  ly_.resize(m);
  for (int i = 0; i < m; ++i) {
    ax_[i] = cells[i] % grid_;
    ay_[i] = cells[i] / grid_;
    lx_[i] = cells[m + i] % grid_;
    ly_[i] = cells[m + i] / grid_;
  }
  t_ = 0;
  done_ = false;
  solved_ = false;
}

Vector SpreadLite::state() const {
  const int m = spec_.num_agents;
  Vector s(spec_.state_dim);
  for (int i = 0; i < m; ++i) {
    s(2 * i) = ax_[i];
    s(2 * i + 1) = ay_[i];
    s(2 * m + 2 * i) = lx_[i];
    s(2 * m + 2 * i + 1) = ly_[i];
  }
  return s;
}

std::vector<Vector> SpreadLite::observations_for(const Vector& state) const {
  const int m = spec_.num_agents;
  std::vector<Vector> obs(m, Vector(spec_.obs_dim));
  for (int i = 0; i < m; ++i) {
    const double x = state(2 * i), y = state(2 * i + 1);
    obs[i](0) = x;
    obs[i](1) = y;
    for (int j = 0; j < m; ++j) {
      obs[i](2 + 2 * j) = state(2 * m + 2 * j) - x;
      obs[i](2 + 2 * j + 1) = state(2 * m + 2 * j + 1) - y;
    }
  }
  return obs;
}

StepResult SpreadLite::step(const std::vector<int>& actions) {
  check_actions(actions);
  const int m = spec_.num_agents;
  for (int i = 0; i < m; ++i) {
    ax_[i] = clamp_coord(ax_[i] + kDx[actions[i]], grid_);
    ay_[i] = clamp_coord(ay_[i] + kDy[actions[i]], grid_);
  }
  double dist_sum = 0.0;
  bool covered = true;
  for (int j = 0; j < m; ++j) {
    int best = grid_ * 2;
    for (int i = 0; i < m; ++i)
      best = std::min(best, std::abs(ax_[i] - lx_[j]) + std::abs(ay_[i] - ly_[j]));
    dist_sum += best;
    if (best > 0) covered = false;
  }
  int collisions = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (ax_[i] == ax_[j] && ay_[i] == ay_[j]) ++collisions;
  ++t_;
  done_ = (t_ >= spec_.horizon);
  if (done_) solved_ = covered;
  StepResult r;
  r.reward = -dist_sum - collisions;
  r.state = state();
  r.obs = observations_for(r.state);
  r.done = done_;
  return r;
}

bool SpreadLite::solved() const { return solved_; }

std::unique_ptr<Env> SpreadLite::clone_fresh() const {
  return std::make_unique<SpreadLite>(spec_.num_agents, grid_, spec_.horizon, spec_.gamma);
}

// ---- MinerLite ----

MinerLite::MinerLite(int grid, int num_piles, int capacity, int horizon, double gamma)
    : grid_(grid), num_piles_(num_piles), capacity_(capacity) {
  if (grid < 3) throw std::invalid_argument("MinerLite: grid must be at least 3");
  if (num_piles < 1 || num_piles + 2 > grid * grid)
    throw std::invalid_argument("MinerLite: piles and agents must fit on the grid");
  if (capacity < 1) throw std::invalid_argument("MinerLite: capacity must be positive");
  spec_.num_agents = 2;
  spec_.state_dim = 4 + 2 + grid * grid;  // agent xy, capacities, gold map
  spec_.obs_dim = 2 + 9 + 1;              // own xy, 3x3 gold window, remaining capacity
  spec_.action_counts.assign(2, 5);
  spec_.horizon = horizon;
  spec_.gamma = gamma;
  spec_.validate();
}

std::string MinerLite::params_json() const {
  std::ostringstream os;
  os << "{\"grid\":" << grid_ << ",\"piles\":" << num_piles_ << ",\"capacity\":" << capacity_
     << ",\"horizon\":" << spec_.horizon << ",\"gamma\":" << format_g17(spec_.gamma) << "}";
  return os.str();
}

void MinerLite::reset(uint64_t seed) {
  Rng rng(mix_seed(seed, "miner.reset"));
  std::vector<int> cells(grid_ * grid_);
  std::iota(cells.begin(), cells.end(), 0);
  for (int i = 0; i < 2 + num_piles_; ++i) {
    int j = i + rng.uniform_int(static_cast<int>(cells.size()) - i);
    std::swap(cells[i], cells[j]);
  }
  ax_ = {cells[0] % grid_, cells[1] % grid_};
  ay_ = {cells[0] / grid_, cells[1] / grid_};
  cap_.assign(2, static_cast<double>(capacity_));
  gold_.assign(grid_ * grid_, 0.0);
  for (int p = 0; p < num_piles_; ++p)
    gold_[cells[2 + p]] = static_cast<double>(1 + rng.uniform_int(3));
  t_ = 0;
  done_ = false;
  solved_ = false;
}

Vector MinerLite::state() const {
  Vector s(spec_.state_dim);
  s(0) = ax_[0];
  s(1) = ay_[0];
  s(2) = ax_[1];
  s(3) = ay_[1];
  s(4) = cap_[0];
  s(5) = cap_[1];
  for (int c = 0; c < grid_ * grid_; ++c) s(6 + c) = gold_[c];
  return s;
}

double MinerLite::gold_at(const Vector& state, int x, int y) const {
  if (x < 0 || x >= grid_ || y < 0 || y >= grid_) return 0.0;
  return state(6 + y * grid_ + x);
}

std::vector<Vector> MinerLite::observations_for(const Vector& state) const {
  std::vector<Vector> obs(2, Vector(spec_.obs_dim));
  for (int i = 0; i < 2; ++i) {
    const int x = static_cast<int>(state(2 * i));
    const int y = static_cast<int>(state(2 * i + 1));
    obs[i](0) = x;
    obs[i](1) = y;
    int k = 2;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) obs[i](k++) = gold_at(state, x + dx, y + dy);
    obs[i](11) = state(4 + i);
  }
  return obs;
}

StepResult MinerLite::step(const std::vector<int>& actions) {
  check_actions(actions);
  for (int i = 0; i < 2; ++i) {
    ax_[i] = clamp_coord(ax_[i] + kDx[actions[i]], grid_);
    ay_[i] = clamp_coord(ay_[i] + kDy[actions[i]], grid_);
  }
  double reward = 0.0;
  // lower-indexed agent digs first when both stand on the same pile
  for (int i = 0; i < 2; ++i) {
    const int cell = ay_[i] * grid_ + ax_[i];
    const double take = std::min(gold_[cell], cap_[i]);
    if (take > 0.0) {
      gold_[cell] -= take;
      cap_[i] -= take;
      reward += take;
    }
  }
  const double remaining = std::accumulate(gold_.begin(), gold_.end(), 0.0);
  ++t_;
  done_ = (t_ >= spec_.horizon) || remaining == 0.0;
  if (done_) solved_ = (remaining == 0.0);
  StepResult r;
  r.reward = reward;
  r.state = state();
  r.obs = observations_for(r.state);
  r.done = done_;
  return r;
}

bool MinerLite::solved() const { return solved_; }

std::unique_ptr<Env> MinerLite::clone_fresh() const {
  return std::make_unique<MinerLite>(grid_, num_piles_, capacity_, spec_.horizon, spec_.gamma);
}

// ---- TwoStepTeam ----

namespace {

// Payoffs at the two matrix states; state 1 pays 7 everywhere, state 2 pays
// 8 only when both agents coordinate on action 1.
constexpr double kMatrix1[2][2] = {{7.0, 7.0}, {7.0, 7.0}};
constexpr double kMatrix2[2][2] = {{0.0, 1.0}, {1.0, 8.0}};
constexpr double kBranchProb = 0.9;

}  // namespace

TwoStepTeam::TwoStepTeam(double gamma) {
  spec_.num_agents = 2;
  spec_.state_dim = 3;
  spec_.obs_dim = 3;
  spec_.action_counts = {2, 2};
  spec_.horizon = 2;
  spec_.gamma = gamma;
  spec_.validate();
}

std::string TwoStepTeam::params_json() const {
  return "{\"gamma\":" + format_g17(spec_.gamma) + "}";
}

Vector TwoStepTeam::encode_state(int s) {
  Vector v = Vector::Zero(3);
  v(s) = 1.0;
  return v;
}

int TwoStepTeam::decode_state(const Vector& v) {
  for (int s = 0; s < 3; ++s)
    if (v(s) == 1.0) return s;
  throw std::invalid_argument("TwoStepTeam: not a one-hot state");
}

void TwoStepTeam::reset(uint64_t seed) {
  rng_ = std::make_unique<Rng>(mix_seed(seed, "two_step.reset"));
  s_ = 0;
  t_ = 0;
  done_ = false;
}

Vector TwoStepTeam::state() const { return encode_state(s_); }

std::vector<Vector> TwoStepTeam::observations_for(const Vector& state) const {
  return {state, state};
}

StepResult TwoStepTeam::step(const std::vector<int>& actions) {
  check_actions(actions);
  double reward = 0.0;
  int next = 0;
  if (s_ == 0) {
    const double p_s1 = actions[0] == 0 ? kBranchProb : 1.0 - kBranchProb;
    next = rng_->uniform() < p_s1 ? 1 : 2;
  } else {
    reward = (s_ == 1 ? kMatrix1 : kMatrix2)[actions[0]][actions[1]];
    next = 0;
  }
  s_ = next;
  ++t_;
  done_ = (t_ >= spec_.horizon);
  StepResult r;
  r.reward = reward;
  r.state = state();
  r.obs = observations_for(r.state);
  r.done = done_;
  return r;
}

std::unique_ptr<Env> TwoStepTeam::clone_fresh() const {
  return std::make_unique<TwoStepTeam>(spec_.gamma);
}

TabularModel TwoStepTeam::model() const {
  TabularModel tm;
  tm.num_states = 3;
  tm.num_agents = 2;
  tm.action_counts = {2, 2};
  tm.trans = Matrix::Zero(3 * 4, 3);
  tm.reward = Matrix::Zero(3, 4);
  tm.initial = Vector::Zero(3);
  tm.initial(0) = 1.0;
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a1 = 0; a1 < 2; ++a1) {
      const int ja = a0 * 2 + a1;
      const double p_s1 = a0 == 0 ? kBranchProb : 1.0 - kBranchProb;
      tm.trans(0 * 4 + ja, 1) = p_s1;
      tm.trans(0 * 4 + ja, 2) = 1.0 - p_s1;
      tm.trans(1 * 4 + ja, 0) = 1.0;
      tm.trans(2 * 4 + ja, 0) = 1.0;
      tm.reward(1, ja) = kMatrix1[a0][a1];
      tm.reward(2, ja) = kMatrix2[a0][a1];
    }
  return tm;
}

TabularModel enumerate_model(const Env& env) {
  const auto* ts = dynamic_cast<const TwoStepTeam*>(&env);
  if (!ts) throw std::invalid_argument("enumerate_model: env '" + env.id() + "' is not tabular");
  return ts->model();
}

std::unique_ptr<Env> make_env(const std::string& id, const std::string& params_json) {
  json p = params_json.empty() ? json::object() : json::parse(params_json);
  if (id == "two_step") {
    return std::make_unique<TwoStepTeam>(p.value("gamma", 0.99));
  }
  if (id == "spread") {
    return std::make_unique<SpreadLite>(p.value("agents", 3), p.value("grid", 5),
                                        p.value("horizon", 25), p.value("gamma", 0.99));
  }
  if (id == "miner") {
    return std::make_unique<MinerLite>(p.value("grid", 7), p.value("piles", 8),
                                       p.value("capacity", 10), p.value("horizon", 50),
                                       p.value("gamma", 0.99));
  }
  throw std::invalid_argument("make_env: unknown env id '" + id + "'");
}

}  // namespace mifq
