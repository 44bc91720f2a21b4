#include "mifq/expert.hpp"

#include "mifq/autodiff.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mifq {

using json = nlohmann::json;

Vector TabularSoftQ::state_values() const {
  Matrix v = ad::logsumexp_rows_value(q);
  return Vector(v.col(0));
}

TabularSoftQ soft_value_iteration(const TabularModel& model, double gamma, double tol,
                                  int max_iters) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("soft_value_iteration: gamma must lie in [0, 1)");
  const int S = model.num_states;
  const int A = model.joint_action_count();
  TabularSoftQ out;
  out.gamma = gamma;
  out.q = Matrix::Zero(S, A);
  for (int it = 1; it <= max_iters; ++it) {
    Vector v = out.state_values();
    Matrix next(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        next(s, a) = model.reward(s, a) + gamma * model.trans.row(s * A + a).dot(v.transpose());
    const double residual = (next - out.q).cwiseAbs().maxCoeff();
    out.q = next;
    out.iterations = it;
    out.residual = residual;
    out.residual_history.push_back(residual);
    if (residual <= tol) return out;
  }
  throw std::runtime_error("soft_value_iteration: no convergence after " +
                           std::to_string(max_iters) + " sweeps (residual " +
                           format_g17(out.residual) + ")");
}

Matrix expert_policy_table(const TabularSoftQ& softq) {
  return ad::softmax_rows_value(softq.q);
}

namespace {

int sample_from_row(const Matrix& probs, int row, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < probs.cols(); ++a) {
    acc += probs(row, a);
    if (u < acc) return static_cast<int>(a);
  }
  return static_cast<int>(probs.cols()) - 1;
}

}  // namespace

JointPolicy expert_policy(const TabularSoftQ& softq, const TabularModel& model) {
  Matrix probs = expert_policy_table(softq);
  TabularModel m = model;
  return [probs, m](const Vector& state, const std::vector<Vector>&, Rng& rng) {
    const int s = TwoStepTeam::decode_state(state);
    return m.decode_joint(sample_from_row(probs, s, rng));
  };
}

Matrix recovered_reward_table(const TabularSoftQ& softq, const TabularModel& model) {
  const int S = model.num_states;
  const int A = model.joint_action_count();
  Vector v = softq.state_values();
  Matrix r(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      r(s, a) = softq.q(s, a) - softq.gamma * model.trans.row(s * A + a).dot(v.transpose());
  return r;
}

namespace {

// Step toward the target along the axis with the larger remaining distance.
int greedy_move(int x, int y, int tx, int ty) {
  const int dx = tx - x, dy = ty - y;
  if (dx == 0 && dy == 0) return 0;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? 4 : 3;
  return dy > 0 ? 2 : 1;
}

// Repeatedly assign the globally closest (agent, target) pair.
std::vector<int> greedy_assignment(const std::vector<int>& ax, const std::vector<int>& ay,
                                   const std::vector<int>& tx, const std::vector<int>& ty,
                                   const std::vector<bool>& target_alive) {
  const int m = static_cast<int>(ax.size());
  std::vector<int> assign(m, -1);
  std::vector<bool> agent_used(m, false), target_used(tx.size(), false);
  for (size_t round = 0; round < tx.size(); ++round) {
    int best_d = std::numeric_limits<int>::max(), bi = -1, bj = -1;
    for (int i = 0; i < m; ++i) {
      if (agent_used[i]) continue;
      for (size_t j = 0; j < tx.size(); ++j) {
        if (target_used[j] || !target_alive[j]) continue;
        const int d = std::abs(ax[i] - tx[j]) + std::abs(ay[i] - ty[j]);
        if (d < best_d) {
          best_d = d;
          bi = i;
          bj = static_cast<int>(j);
        }
      }
    }
    if (bi < 0) break;
    assign[bi] = bj;
    agent_used[bi] = true;
    target_used[bj] = true;
  }
  return assign;
}

// Agent i covers landmark i. The convention is a pure function of each
// agent's own observation, so decentralized learners can actually realize
// the demonstrated policy; position-dependent assignments are not
// recoverable when agents cannot see each other.
JointPolicy scripted_spread(int m) {
  return [m](const Vector& state, const std::vector<Vector>&, Rng&) {
    std::vector<int> actions(m, 0);
    for (int i = 0; i < m; ++i) {
      const int ax = static_cast<int>(state(2 * i));
      const int ay = static_cast<int>(state(2 * i + 1));
      const int lx = static_cast<int>(state(2 * m + 2 * i));
      const int ly = static_cast<int>(state(2 * m + 2 * i + 1));
      actions[i] = greedy_move(ax, ay, lx, ly);
    }
    return actions;
  };
}

JointPolicy scripted_miner(int grid) {
  return [grid](const Vector& state, const std::vector<Vector>&, Rng&) {
    std::vector<int> ax = {static_cast<int>(state(0)), static_cast<int>(state(2))};
    std::vector<int> ay = {static_cast<int>(state(1)), static_cast<int>(state(3))};
    std::vector<double> cap = {state(4), state(5)};
    std::vector<int> px, py;
    for (int c = 0; c < grid * grid; ++c)
      if (state(6 + c) > 0.0) {
        px.push_back(c % grid);
        py.push_back(c / grid);
      }
    std::vector<int> actions(2, 0);
    if (px.empty()) return actions;
    std::vector<bool> alive(px.size(), true);
    std::vector<int> ax_f, ay_f, idx;
    for (int i = 0; i < 2; ++i)
      if (cap[i] > 0.0) {
        ax_f.push_back(ax[i]);
        ay_f.push_back(ay[i]);
        idx.push_back(i);
      }
    std::vector<int> assign = greedy_assignment(ax_f, ay_f, px, py, alive);
    for (size_t k = 0; k < idx.size(); ++k) {
      int j = assign[k];
      if (j < 0) {
        // more agents than piles; chase the nearest one anyway
        int best_d = std::numeric_limits<int>::max();
        for (size_t p = 0; p < px.size(); ++p) {
          const int d = std::abs(ax_f[k] - px[p]) + std::abs(ay_f[k] - py[p]);
          if (d < best_d) {
            best_d = d;
            j = static_cast<int>(p);
          }
        }
      }
      actions[idx[k]] = greedy_move(ax_f[k], ay_f[k], px[j], py[j]);
    }
    return actions;
  };
}

}  // namespace

JointPolicy scripted_expert(const Env& env) {
  if (env.id() == "spread") return scripted_spread(env.spec().num_agents);
  if (env.id() == "miner") {
    const int grid = static_cast<int>(std::lround(
        std::sqrt(static_cast<double>(env.spec().state_dim - 6))));
    return scripted_miner(grid);
  }
  throw std::invalid_argument("scripted_expert: no script for env '" + env.id() + "'");
}

JointPolicy uniform_random_policy(std::vector<int> action_counts) {
  return [counts = std::move(action_counts)](const Vector&, const std::vector<Vector>&,
                                             Rng& rng) {
    std::vector<int> actions(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) actions[i] = rng.uniform_int(counts[i]);
    return actions;
  };
}

int DemonstrationSet::transition_count() const {
  int n = 0;
  for (const auto& ep : episodes) n += static_cast<int>(ep.size());
  return n;
}

std::vector<const Transition*> DemonstrationSet::flat() const {
  std::vector<const Transition*> out;
  out.reserve(transition_count());
  for (const auto& ep : episodes)
    for (const auto& t : ep) out.push_back(&t);
  return out;
}

void DemonstrationSet::validate() const {
  for (size_t e = 0; e < episodes.size(); ++e) {
    if (episodes[e].empty())
      throw std::runtime_error("DemonstrationSet: episode " + std::to_string(e) + " is empty");
    for (size_t t = 0; t + 1 < episodes[e].size(); ++t)
      if (episodes[e][t].done)
        throw std::runtime_error("DemonstrationSet: episode " + std::to_string(e) +
                                 " has an interior terminal at step " + std::to_string(t));
    if (!episodes[e].back().done)
      throw std::runtime_error("DemonstrationSet: episode " + std::to_string(e) +
                               " does not terminate");
  }
}

EpisodeStats rollout(Env& env, const JointPolicy& policy, uint64_t ep_seed) {
  env.reset(ep_seed);
  Rng policy_rng(mix_seed(ep_seed, "policy"));
  EpisodeStats stats;
  while (!env.done()) {
    Vector s = env.state();
    std::vector<Vector> obs = env.observations();
    StepResult r = env.step(policy(s, obs, policy_rng));
    stats.ret += r.reward;
    ++stats.steps;
  }
  stats.solved = env.solved();
  return stats;
}

DemonstrationSet collect_demonstrations(const JointPolicy& policy, Env& env, int n_episodes,
                                        uint64_t seed, const std::string& expert_id) {
  if (n_episodes < 1)
    throw std::invalid_argument("collect_demonstrations: need at least one episode");
  DemonstrationSet demos;
  demos.env_hash = env.spec_hash();
  demos.seed = seed;
  demos.expert_id = expert_id;
  demos.episodes.resize(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    const uint64_t ep_seed = mix_seed(seed, static_cast<uint64_t>(e));
    env.reset(ep_seed);
    Rng policy_rng(mix_seed(ep_seed, "policy"));
    while (!env.done()) {
      Transition tr;
      tr.state = env.state();
      tr.obs = env.observations();
      tr.actions = policy(tr.state, tr.obs, policy_rng);
      StepResult r = env.step(tr.actions);
      tr.reward = r.reward;
      tr.next_state = r.state;
      tr.next_obs = r.obs;
      tr.done = r.done;
      demos.episodes[e].push_back(std::move(tr));
    }
  }
  demos.validate();
  return demos;
}

namespace {

void emit_vector(std::ostream& os, const Vector& v) {
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << format_g17(v(i));
  }
  os << "]";
}

void emit_vectors(std::ostream& os, const std::vector<Vector>& vs) {
  os << "[";
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) os << ",";
    emit_vector(os, vs[i]);
  }
  os << "]";
}

Vector parse_vector(const json& arr) {
  Vector v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

std::vector<Vector> parse_vectors(const json& arr) {
  std::vector<Vector> out;
  out.reserve(arr.size());
  for (const auto& a : arr) out.push_back(parse_vector(a));
  return out;
}

}  // namespace

void save_demos(const DemonstrationSet& demos, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_demos: cannot open " + path);
  out << "{\"version\":1,\"env\":\"" << to_hex(demos.env_hash)
      << "\",\"episodes\":" << demos.episodes.size()
      << ",\"transitions\":" << demos.transition_count() << ",\"seed\":" << demos.seed
      << ",\"expert\":" << json(demos.expert_id).dump() << "}\n";
  for (size_t e = 0; e < demos.episodes.size(); ++e) {
    for (size_t t = 0; t < demos.episodes[e].size(); ++t) {
      const Transition& tr = demos.episodes[e][t];
      out << "{\"ep\":" << e << ",\"t\":" << t << ",\"S\":";
      emit_vector(out, tr.state);
      out << ",\"obs\":";
      emit_vectors(out, tr.obs);
      out << ",\"A\":[";
      for (size_t i = 0; i < tr.actions.size(); ++i) {
        if (i) out << ",";
        out << tr.actions[i];
      }
      out << "],\"r\":" << format_g17(tr.reward) << ",\"Sn\":";
      emit_vector(out, tr.next_state);
      out << ",\"obsn\":";
      emit_vectors(out, tr.next_obs);
      out << ",\"done\":" << (tr.done ? "true" : "false") << "}\n";
    }
  }
  if (!out) throw std::runtime_error("save_demos: write failed for " + path);
}

DemonstrationSet load_demos(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_demos: cannot open " + path);
  std::string line;
  int line_no = 0;
  auto parse_line = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_demos: parse error at line " + std::to_string(line_no) +
                               " of " + path + ": " + e.what());
    }
  };
  if (!std::getline(in, line)) throw std::runtime_error("load_demos: " + path + " is empty");
  ++line_no;
  json header = parse_line(line);
  if (header.value("version", 0) != 1)
    throw std::runtime_error("load_demos: unsupported version in " + path);
  DemonstrationSet demos;
  demos.env_hash = std::stoull(header.at("env").get<std::string>(), nullptr, 16);
  demos.seed = header.value("seed", 0ull);
  demos.expert_id = header.value("expert", "");
  const int n_episodes = header.at("episodes").get<int>();
  const int n_transitions = header.at("transitions").get<int>();
  demos.episodes.resize(n_episodes);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row = parse_line(line);
    const int e = row.at("ep").get<int>();
    if (e < 0 || e >= n_episodes)
      throw std::runtime_error("load_demos: episode index out of range at line " +
                               std::to_string(line_no));
    Transition tr;
    tr.state = parse_vector(row.at("S"));
    tr.obs = parse_vectors(row.at("obs"));
    tr.actions = row.at("A").get<std::vector<int>>();
    tr.reward = row.at("r").get<double>();
    tr.next_state = parse_vector(row.at("Sn"));
    tr.next_obs = parse_vectors(row.at("obsn"));
    tr.done = row.at("done").get<bool>();
    demos.episodes[e].push_back(std::move(tr));
  }
  if (demos.transition_count() != n_transitions)
    throw std::runtime_error("load_demos: header declares " + std::to_string(n_transitions) +
                             " transitions but " + std::to_string(demos.transition_count()) +
                             " were read from " + path);
  demos.validate();
  return demos;
}

}  // namespace mifq
