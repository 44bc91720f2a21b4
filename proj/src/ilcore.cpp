#include "mifq/ilcore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mifq {

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("TrainConfig: gamma must lie in (0, 1)");
  if (lr_theta <= 0.0 || lr_omega <= 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (hidden_dim < 1 || mix_hidden < 1)
    throw std::invalid_argument("TrainConfig: hidden dims must be positive");
  if (buffer_capacity < 1)
    throw std::invalid_argument("TrainConfig: buffer_capacity must be positive");
  if (target_sync < 1) throw std::invalid_argument("TrainConfig: target_sync must be positive");
  if (collect_steps_per_loop < 1 || train_steps_per_loop < 1)
    throw std::invalid_argument("TrainConfig: loop step counts must be positive");
  if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be non-negative");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be positive");
  if (eval_episodes < 1)
    throw std::invalid_argument("TrainConfig: eval_episodes must be positive");
  if (bc_epochs < 1) throw std::invalid_argument("TrainConfig: bc_epochs must be positive");
  if (!(bc_val_fraction >= 0.0 && bc_val_fraction < 1.0))
    throw std::invalid_argument("TrainConfig: bc_val_fraction must lie in [0, 1)");
  if (omega_anchor < 0.0)
    throw std::invalid_argument("TrainConfig: omega_anchor must be non-negative");
}

AlgoKind algo_from_string(const std::string& s) {
  if (s == "mifq") return AlgoKind::Mifq;
  if (s == "bc") return AlgoKind::Bc;
  if (s == "iiq") return AlgoKind::Iiq;
  if (s == "iqvdn") return AlgoKind::Iqvdn;
  if (s == "masqil") return AlgoKind::Masqil;
  throw std::invalid_argument("unknown algorithm '" + s +
                              "' (expected mifq, bc, iiq, iqvdn or masqil)");
}

std::string to_string(AlgoKind k) {
  switch (k) {
    case AlgoKind::Mifq: return "mifq";
    case AlgoKind::Bc: return "bc";
    case AlgoKind::Iiq: return "iiq";
    case AlgoKind::Iqvdn: return "iqvdn";
    case AlgoKind::Masqil: return "masqil";
  }
  return "?";
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  data_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (static_cast<int>(data_.size()) < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % static_cast<size_t>(capacity_);
}

std::vector<const Transition*> ReplayBuffer::sample(int n, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::vector<const Transition*> out(n);
  for (int i = 0; i < n; ++i) out[i] = &data_[rng.uniform_int(static_cast<int>(data_.size()))];
  return out;
}

MifqParams MifqParams::make(const DecPomdpSpec& spec, MixerKind mixer, bool per_agent,
                            int hidden, int mix_hidden, Rng& rng) {
  spec.validate();
  MifqParams p;
  p.env_spec = spec;
  p.mixer = mixer;
  p.per_agent = per_agent;
  const int m = spec.num_agents;
  const int k = spec.actions_per_agent();
  // one-hot ids only when one net serves several agents
  const int id_dims = (per_agent || m == 1) ? 0 : m;
  const int n_nets = per_agent ? m : 1;
  for (int i = 0; i < n_nets; ++i)
    p.theta.push_back(LocalQNet::make(spec.obs_dim, id_dims, k, hidden, rng));
  if (mixer == MixerKind::HyperElu) {
    p.hyper_r = HyperNet::make(spec.state_dim, m, mix_hidden, hidden, rng);
    p.hyper_v = HyperNet::make(spec.state_dim, m, mix_hidden, hidden, rng);
  } else if (mixer == MixerKind::FixedLinear) {
    p.linear_weights = Vector::Ones(m);
  } else if (mixer == MixerKind::Identity && m != 1) {
    throw std::invalid_argument("MifqParams: identity mixer requires a single agent");
  }
  p.theta_target = p.theta;
  p.hyper_r_target = p.hyper_r;
  p.hyper_v_target = p.hyper_v;
  for (ad::Tensor* t : p.omega_params()) p.omega_init.push_back(t->value);
  return p;
}

void MifqParams::anchor_omega(double rate) {
  if (rate <= 0.0) return;
  size_t k = 0;
  for (ad::Tensor* t : omega_params()) t->value -= rate * (t->value - omega_init[k++]);
}

void MifqParams::sync_targets() {
  for (size_t i = 0; i < theta.size(); ++i) theta_target[i].net.copy_from(theta[i].net);
  if (mixer == MixerKind::HyperElu) {
    hyper_r_target.net.copy_from(hyper_r.net);
    hyper_v_target.net.copy_from(hyper_v.net);
  }
}

std::vector<ad::Tensor*> MifqParams::theta_params() {
  std::vector<ad::Tensor*> out;
  for (auto& q : theta)
    for (ad::Tensor* t : q.net.params()) out.push_back(t);
  return out;
}

std::vector<ad::Tensor*> MifqParams::omega_params() {
  std::vector<ad::Tensor*> out;
  if (mixer == MixerKind::HyperElu) {
    for (ad::Tensor* t : hyper_r.net.params()) out.push_back(t);
    for (ad::Tensor* t : hyper_v.net.params()) out.push_back(t);
  }
  return out;
}

std::vector<std::pair<std::string, ad::Tensor*>> MifqParams::named_params() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  for (size_t i = 0; i < theta.size(); ++i)
    for (auto& np : theta[i].net.named_params("theta." + std::to_string(i))) out.push_back(np);
  if (mixer == MixerKind::HyperElu) {
    for (auto& np : hyper_r.net.named_params("hyper_r")) out.push_back(np);
    for (auto& np : hyper_v.net.named_params("hyper_v")) out.push_back(np);
  }
  return out;
}

Vector local_state_values(const MifqParams& params, const std::vector<Vector>& obs) {
  const int m = params.env_spec.num_agents;
  if (static_cast<int>(obs.size()) != m)
    throw std::invalid_argument("local_state_values: expected one observation per agent");
  Vector v(m);
  for (int i = 0; i < m; ++i) {
    Matrix q = params.q_net(i).q_values(obs[i], i);
    v(i) = ad::logsumexp_rows_value(q)(0, 0);
  }
  return v;
}

Vector inverse_bellman(const Vector& q_taken, const Vector& v_next, bool done, double gamma) {
  if (q_taken.size() != v_next.size())
    throw std::invalid_argument("inverse_bellman: vector lengths differ");
  if (done) return q_taken;
  return q_taken - gamma * v_next;
}

namespace {

// Stacked net inputs for a batch, agent-major within each sample: row b*m+i.
Matrix stack_inputs(const std::vector<const Transition*>& batch, const LocalQNet& net, int m,
                    bool next) {
  const int B = static_cast<int>(batch.size());
  Matrix rows(static_cast<Eigen::Index>(B) * m, net.obs_dim + net.id_dims);
  for (int b = 0; b < B; ++b) {
    const auto& obs = next ? batch[b]->next_obs : batch[b]->obs;
    for (int i = 0; i < m; ++i) rows.row(static_cast<Eigen::Index>(b) * m + i) = net.input_row(obs[i], i);
  }
  return rows;
}

Matrix agent_inputs(const std::vector<const Transition*>& batch, const LocalQNet& net, int agent,
                    bool next) {
  const int B = static_cast<int>(batch.size());
  Matrix rows(B, net.obs_dim + net.id_dims);
  for (int b = 0; b < B; ++b) {
    const auto& obs = next ? batch[b]->next_obs : batch[b]->obs;
    rows.row(b) = net.input_row(obs[agent], agent);
  }
  return rows;
}

Matrix stack_states(const std::vector<const Transition*>& batch, bool next) {
  const int B = static_cast<int>(batch.size());
  Matrix rows(B, batch[0]->state.size());
  for (int b = 0; b < B; ++b)
    rows.row(b) = (next ? batch[b]->next_state : batch[b]->state).transpose();
  return rows;
}

std::vector<int> stacked_actions(const std::vector<const Transition*>& batch, int m) {
  std::vector<int> idx(batch.size() * m);
  for (size_t b = 0; b < batch.size(); ++b)
    for (int i = 0; i < m; ++i) idx[b * m + i] = batch[b]->actions[i];
  return idx;
}

std::vector<int> agent_actions(const std::vector<const Transition*>& batch, int agent) {
  std::vector<int> idx(batch.size());
  for (size_t b = 0; b < batch.size(); ++b) idx[b] = batch[b]->actions[agent];
  return idx;
}

// Two-layer mixer applied row-by-row with per-row weights, value level.
Matrix mix_rows_value(const Matrix& x, const Matrix& hyper_out, int m, int h) {
  const Eigen::Index B = x.rows();
  Matrix out(B, 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    MixingWeights w = MixingWeights::unflatten(Vector(hyper_out.row(b).transpose()), m, h);
    out(b, 0) = mixing_forward(Vector(x.row(b).transpose()), w);
  }
  return out;
}

// Per-agent local state values of a batch under the given (target or live)
// nets, value level: B x m.
Matrix local_values_nograd(const MifqParams& p, const std::vector<const Transition*>& batch,
                           bool next, bool targets) {
  const int m = p.env_spec.num_agents;
  const int B = static_cast<int>(batch.size());
  Matrix out(B, m);
  if (!p.per_agent) {
    const LocalQNet& net = targets ? p.q_net_target(0) : p.q_net(0);
    Matrix q = net.net.forward_nograd(stack_inputs(batch, net, m, next));
    Matrix v = ad::logsumexp_rows_value(q);
    out = Eigen::Map<const Matrix>(v.data(), B, m);
  } else {
    for (int i = 0; i < m; ++i) {
      const LocalQNet& net = targets ? p.q_net_target(i) : p.q_net(i);
      Matrix q = net.net.forward_nograd(agent_inputs(batch, net, i, next));
      out.col(i) = ad::logsumexp_rows_value(q).col(0);
    }
  }
  return out;
}

struct Assembled {
  ad::Var q_taken;  // B x m, live nets
  ad::Var v_local;  // B x m, live nets
};

// Graph-side per-agent quantities of a batch from the live nets.
Assembled assemble(ad::Graph& g, MifqParams& p, const std::vector<const Transition*>& batch,
                   bool next, bool want_q_taken, bool want_v_local) {
  const int m = p.env_spec.num_agents;
  const int B = static_cast<int>(batch.size());
  Assembled out;
  if (!p.per_agent) {
    LocalQNet& net = p.theta[0];
    ad::Var q = net.net.forward(g, g.input(stack_inputs(batch, net, m, next)));
    if (want_q_taken)
      out.q_taken = ad::reshape(ad::pick(q, stacked_actions(batch, m)), B, m);
    if (want_v_local) out.v_local = ad::reshape(ad::logsumexp_rows(q), B, m);
  } else {
    std::vector<ad::Var> qt, vl;
    for (int i = 0; i < m; ++i) {
      LocalQNet& net = p.theta[i];
      ad::Var q = net.net.forward(g, g.input(agent_inputs(batch, net, i, next)));
      if (want_q_taken) qt.push_back(ad::pick(q, agent_actions(batch, i)));
      if (want_v_local) vl.push_back(ad::logsumexp_rows(q));
    }
    if (want_q_taken) out.q_taken = ad::hcat(qt);
    if (want_v_local) out.v_local = ad::hcat(vl);
  }
  return out;
}

// gamma * (1 - done_b) replicated across the m agent columns.
Matrix bootstrap_mask(const std::vector<const Transition*>& batch, int m, double gamma) {
  Matrix mask(static_cast<Eigen::Index>(batch.size()), m);
  for (size_t b = 0; b < batch.size(); ++b)
    mask.row(b).setConstant(batch[b]->done ? 0.0 : gamma);
  return mask;
}

// Mixes B x m columns into B x 1 with the requested head on the graph.
ad::Var mix_graph(ad::Graph& g, MifqParams& p, ad::Var x, HyperNet& head,
                  const Matrix& states) {
  switch (p.mixer) {
    case MixerKind::HyperElu: {
      ad::Var psi = hyper_forward(g, head, g.input(states));
      return mixing_forward(g, x, psi, p.env_spec.num_agents, head.mix_hidden);
    }
    case MixerKind::FixedLinear: {
      Matrix alpha(p.linear_weights.size(), 1);
      alpha.col(0) = p.linear_weights;
      return ad::matmul(x, g.input(alpha));
    }
    case MixerKind::Identity:
      return x;
  }
  throw std::logic_error("mix_graph: unreachable");
}

// Value-level twin of mix_graph for target-side terms.
Matrix mix_value(const MifqParams& p, const Matrix& x, const HyperNet& head,
                 const Matrix& states) {
  switch (p.mixer) {
    case MixerKind::HyperElu: {
      Matrix psi = head.net.forward_nograd(states);
      return mix_rows_value(x, psi, p.env_spec.num_agents, head.mix_hidden);
    }
    case MixerKind::FixedLinear: {
      Matrix alpha(p.linear_weights.size(), 1);
      alpha.col(0) = p.linear_weights;
      return x * alpha;
    }
    case MixerKind::Identity:
      return x;
  }
  throw std::logic_error("mix_value: unreachable");
}

}  // namespace

LossBreakdown build_il_loss(ad::Graph& g, MifqParams& params,
                            const std::vector<const Transition*>& expert_batch,
                            const std::vector<const Transition*>& replay_batch,
                            const LossOptions& opt) {
  if (expert_batch.empty() || replay_batch.empty())
    throw std::invalid_argument("build_il_loss: empty batch");
  const int m = params.env_spec.num_agents;
  const double gamma = params.env_spec.gamma;
  const MixerKind saved = params.mixer;
  params.mixer = opt.mixer;

  // Next-state values stay on the graph: R^Q and the value difference are
  // functions of the live Q nets, which is what keeps the chi^2 term able
  // to hold the value scale in place.
  Assembled ex = assemble(g, params, expert_batch, /*next=*/false, /*q_taken=*/true,
                          /*v_local=*/false);
  Assembled exn = assemble(g, params, expert_batch, /*next=*/true, /*q_taken=*/false,
                           /*v_local=*/true);
  ad::Var boot_e = ad::mul(g.input(bootstrap_mask(expert_batch, m, gamma)), exn.v_local);
  ad::Var neg_r = ad::neg(ad::sub(ex.q_taken, boot_e));

  Assembled re = assemble(g, params, replay_batch, /*next=*/false, /*q_taken=*/false,
                          /*v_local=*/true);
  Assembled ren = assemble(g, params, replay_batch, /*next=*/true, /*q_taken=*/false,
                           /*v_local=*/true);

  LossBreakdown out;
  if (opt.independent) {
    Matrix mask_r = bootstrap_mask(replay_batch, m, gamma);
    ad::Var total;
    for (int i = 0; i < m; ++i) {
      ad::Var neg_ri = ad::slice_cols(neg_r, i, 1);
      if (opt.use_chi2) neg_ri = ad::chi2(neg_ri);
      ad::Var expert_i = ad::mean_all(neg_ri);
      ad::Var boot_i =
          ad::mul(g.input(Matrix(mask_r.col(i))), ad::slice_cols(ren.v_local, i, 1));
      ad::Var value_i = ad::mean_all(ad::sub(ad::slice_cols(re.v_local, i, 1), boot_i));
      ad::Var j_i = ad::add(expert_i, value_i);
      out.per_agent.push_back(j_i.value()(0, 0));
      out.expert_term += expert_i.value()(0, 0);
      out.value_term += value_i.value()(0, 0);
      total = (i == 0) ? j_i : ad::add(total, j_i);
    }
    out.total = total;
  } else {
    ad::Var mixed_r =
        mix_graph(g, params, neg_r, params.hyper_r, stack_states(expert_batch, false));
    if (opt.use_chi2) mixed_r = ad::chi2(mixed_r);
    ad::Var expert_term = ad::mean_all(mixed_r);

    ad::Var v_tot =
        mix_graph(g, params, re.v_local, params.hyper_v, stack_states(replay_batch, false));
    ad::Var v_tot_next =
        mix_graph(g, params, ren.v_local, params.hyper_v, stack_states(replay_batch, true));
    Matrix mask_col(replay_batch.size(), 1);
    for (size_t b = 0; b < replay_batch.size(); ++b)
      mask_col(b, 0) = replay_batch[b]->done ? 0.0 : gamma;
    ad::Var value_term =
        ad::mean_all(ad::sub(v_tot, ad::mul(g.input(mask_col), v_tot_next)));

    out.total = ad::add(expert_term, value_term);
    out.expert_term = expert_term.value()(0, 0);
    out.value_term = value_term.value()(0, 0);
  }
  params.mixer = saved;
  return out;
}

LossBreakdown mifq_loss(ad::Graph& g, MifqParams& params,
                        const std::vector<const Transition*>& expert_batch,
                        const std::vector<const Transition*>& replay_batch) {
  LossOptions opt;
  opt.mixer = params.mixer;
  opt.independent = false;
  opt.use_chi2 = true;
  return build_il_loss(g, params, expert_batch, replay_batch, opt);
}

ad::Var iiq_loss(ad::Graph& g, MifqParams& params, int agent,
                 const std::vector<const Transition*>& expert_batch,
                 const std::vector<const Transition*>& replay_batch, bool use_chi2) {
  if (expert_batch.empty() || replay_batch.empty())
    throw std::invalid_argument("iiq_loss: empty batch");
  const double gamma = params.env_spec.gamma;
  LocalQNet& net = params.theta[params.per_agent ? agent : 0];

  ad::Var q = net.net.forward(g, g.input(agent_inputs(expert_batch, net, agent, false)));
  ad::Var q_taken = ad::pick(q, agent_actions(expert_batch, agent));
  ad::Var qn = net.net.forward(g, g.input(agent_inputs(expert_batch, net, agent, true)));
  ad::Var boot = ad::mul(g.input(Matrix(bootstrap_mask(expert_batch, 1, gamma))),
                         ad::logsumexp_rows(qn));
  ad::Var neg_r = ad::neg(ad::sub(q_taken, boot));
  if (use_chi2) neg_r = ad::chi2(neg_r);
  ad::Var expert_term = ad::mean_all(neg_r);

  ad::Var qr = net.net.forward(g, g.input(agent_inputs(replay_batch, net, agent, false)));
  ad::Var v_live = ad::logsumexp_rows(qr);
  ad::Var qrn = net.net.forward(g, g.input(agent_inputs(replay_batch, net, agent, true)));
  ad::Var boot_r = ad::mul(g.input(Matrix(bootstrap_mask(replay_batch, 1, gamma))),
                           ad::logsumexp_rows(qrn));
  ad::Var value_term = ad::mean_all(ad::sub(v_live, boot_r));
  return ad::add(expert_term, value_term);
}

ad::Var masqil_loss(ad::Graph& g, MifqParams& params,
                    const std::vector<const Transition*>& batch,
                    const std::vector<double>& synthetic_reward) {
  if (batch.empty()) throw std::invalid_argument("masqil_loss: empty batch");
  if (synthetic_reward.size() != batch.size())
    throw std::invalid_argument("masqil_loss: one synthetic reward per sample required");
  const double gamma = params.env_spec.gamma;
  const int B = static_cast<int>(batch.size());

  Assembled a = assemble(g, params, batch, /*next=*/false, /*q_taken=*/true,
                         /*v_local=*/false);
  ad::Var q_tot = mix_graph(g, params, a.q_taken, params.hyper_r, stack_states(batch, false));

  Matrix v_next = local_values_nograd(params, batch, /*next=*/true, /*targets=*/true);
  Matrix v_tot_next =
      mix_value(params, v_next, params.hyper_r_target, stack_states(batch, true));
  Matrix target(B, 1);
  for (int b = 0; b < B; ++b)
    target(b, 0) = synthetic_reward[b] +
                   (batch[b]->done ? 0.0 : gamma * v_tot_next(b, 0));
  return ad::mean_all(ad::square(ad::sub(q_tot, g.input(target))));
}

std::pair<double, double> v0_telescope_check(const TabularModel& model, const Matrix& policy,
                                             const Vector& v, double gamma) {
  const int S = model.num_states;
  const int A = model.joint_action_count();
  if (policy.rows() != S || policy.cols() != A)
    throw std::invalid_argument("v0_telescope_check: policy table has wrong shape");
  if (v.size() != S) throw std::invalid_argument("v0_telescope_check: V-table has wrong length");

  // state-to-state kernel under the policy
  Matrix p_pi = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) p_pi.row(s) += policy(s, a) * model.trans.row(s * A + a);

  // unnormalized discounted visitation d = (I - gamma P^T)^{-1} mu0
  Matrix lhs_mat = Matrix::Identity(S, S) - gamma * p_pi.transpose();
  Vector d = lhs_mat.fullPivLu().solve(model.initial);

  const double lhs = (1.0 - gamma) * model.initial.dot(v);
  double rhs = 0.0;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double occ = (1.0 - gamma) * d(s) * policy(s, a);
      rhs += occ * (v(s) - gamma * model.trans.row(s * A + a).dot(v));
    }
  return {lhs, rhs};
}

Vector recover_policy(const MifqParams& params, const Vector& obs, int agent) {
  Matrix q = params.q_net(agent).q_values(obs, agent);
  Matrix p = ad::softmax_rows_value(q);
  return Vector(p.row(0).transpose());
}

Vector recover_reward(const MifqParams& params, const Transition& t) {
  const int m = params.env_spec.num_agents;
  Vector q_taken(m), v_next(m);
  for (int i = 0; i < m; ++i) {
    Matrix q = params.q_net(i).q_values(t.obs[i], i);
    q_taken(i) = q(0, t.actions[i]);
    Matrix qn = params.q_net(i).q_values(t.next_obs[i], i);
    v_next(i) = ad::logsumexp_rows_value(qn)(0, 0);
  }
  return inverse_bellman(q_taken, v_next, t.done, params.env_spec.gamma);
}

JointPolicy net_policy(const MifqParams& params, bool greedy) {
  const MifqParams* p = &params;
  return [p, greedy](const Vector&, const std::vector<Vector>& obs, Rng& rng) {
    const int m = p->env_spec.num_agents;
    std::vector<int> actions(m);
    for (int i = 0; i < m; ++i) {
      Matrix q = p->q_net(i).q_values(obs[i], i);
      if (greedy) {
        Eigen::Index best;
        q.row(0).maxCoeff(&best);
        actions[i] = static_cast<int>(best);
      } else {
        Matrix probs = ad::softmax_rows_value(q);
        double u = rng.uniform();
        double acc = 0.0;
        actions[i] = p->q_net(i).num_actions - 1;
        for (Eigen::Index a = 0; a < probs.cols(); ++a) {
          acc += probs(0, a);
          if (u < acc) {
            actions[i] = static_cast<int>(a);
            break;
          }
        }
      }
    }
    return actions;
  };
}

std::pair<double, double> evaluate_policy(Env& env, const JointPolicy& policy, int n_episodes,
                                          uint64_t seed) {
  double ret_sum = 0.0;
  int solved = 0;
  const uint64_t stream = mix_seed(seed, "eval");
  for (int e = 0; e < n_episodes; ++e) {
    EpisodeStats st = rollout(env, policy, mix_seed(stream, static_cast<uint64_t>(e)));
    ret_sum += st.ret;
    solved += st.solved ? 1 : 0;
  }
  return {ret_sum / n_episodes, static_cast<double>(solved) / n_episodes};
}

namespace {

uint64_t discretized_sa_key(const Vector& state, const std::vector<int>& actions) {
  std::string buf;
  buf.reserve(state.size() * 8 + actions.size() * 4);
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const long long q = std::llround(state(i) * 1024.0);
    buf.append(reinterpret_cast<const char*>(&q), sizeof q);
  }
  for (int a : actions) buf.append(reinterpret_cast<const char*>(&a), sizeof a);
  return fnv1a64(buf);
}

}  // namespace

TrainResult train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg,
                  AlgoKind algo) {
  cfg.validate();
  if (algo == AlgoKind::Bc)
    throw std::invalid_argument("train: bc is offline; use bc_train");
  if (demos.episodes.empty()) throw std::invalid_argument("train: demonstration set is empty");
  if (demos.env_hash != env.spec_hash())
    throw std::invalid_argument("train: demonstrations were recorded on a different env");
  demos.validate();

  DecPomdpSpec spec = env.spec();
  spec.gamma = cfg.gamma;
  MixerKind mixer = MixerKind::HyperElu;
  bool per_agent = false;
  bool use_chi2 = true;
  switch (algo) {
    case AlgoKind::Mifq:
      mixer = cfg.force_identity_mixer ? MixerKind::Identity : MixerKind::HyperElu;
      break;
    case AlgoKind::Iiq:
      per_agent = true;
      break;
    case AlgoKind::Iqvdn:
      mixer = MixerKind::FixedLinear;
      break;
    case AlgoKind::Masqil:
      break;
    case AlgoKind::Bc:
      break;
  }
  if (cfg.force_identity_mixer && spec.num_agents != 1)
    throw std::invalid_argument("train: identity mixer requires a single-agent env");

  Rng init_rng(mix_seed(cfg.seed, "init"));
  TrainResult result{
      MifqParams::make(spec, mixer, per_agent, cfg.hidden_dim, cfg.mix_hidden, init_rng), {}};
  MifqParams& params = result.params;

  ad::AdamOptimizer opt;
  opt.add_group(params.theta_params(), cfg.lr_theta);
  opt.add_group(params.omega_params(), cfg.lr_omega);

  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng collect_rng(mix_seed(cfg.seed, "collect"));
  Rng sample_rng(mix_seed(cfg.seed, "sample"));
  const uint64_t episode_stream = mix_seed(cfg.seed, "episode");

  std::vector<const Transition*> expert_flat = demos.flat();
  std::unordered_set<uint64_t> expert_keys;
  if (algo == AlgoKind::Masqil)
    for (const Transition* t : expert_flat)
      expert_keys.insert(discretized_sa_key(t->state, t->actions));

  const auto t0 = std::chrono::steady_clock::now();
  auto wallclock = [&]() {
    if (cfg.deterministic_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  double last_total = 0.0, last_expert = 0.0, last_value = 0.0;
  std::unique_ptr<Env> eval_env = env.clone_fresh();
  JointPolicy exec_policy = net_policy(params, /*greedy=*/false);
  JointPolicy eval_pol = net_policy(params, cfg.greedy_eval);

  auto emit = [&](long step) {
    auto [ret, solve] = evaluate_policy(*eval_env, eval_pol, cfg.eval_episodes, cfg.seed);
    MetricsRow row;
    row.step = step;
    row.seed = cfg.seed;
    row.mean_return = ret;
    row.solve_rate = solve;
    row.loss_total = last_total;
    row.loss_expert_term = last_expert;
    row.loss_value_term = last_value;
    row.wallclock = wallclock();
    result.metrics.push_back(row);
  };

  emit(0);
  long env_steps = 0;
  long next_eval = cfg.eval_every;
  uint64_t episode_counter = 0;
  bool episode_open = false;

  auto sample_expert = [&](int n) {
    std::vector<const Transition*> out(n);
    for (int i = 0; i < n; ++i)
      out[i] = expert_flat[sample_rng.uniform_int(static_cast<int>(expert_flat.size()))];
    return out;
  };

  LossOptions opt_loss;
  opt_loss.mixer = mixer;
  opt_loss.independent = (algo == AlgoKind::Iiq);
  opt_loss.use_chi2 = use_chi2;

  while (env_steps < cfg.max_steps) {
    for (int c = 0; c < cfg.collect_steps_per_loop && env_steps < cfg.max_steps; ++c) {
      if (!episode_open || env.done()) {
        env.reset(mix_seed(episode_stream, episode_counter++));
        episode_open = true;
      }
      Transition tr;
      tr.state = env.state();
      tr.obs = env.observations();
      tr.actions = exec_policy(tr.state, tr.obs, collect_rng);
      StepResult r = env.step(tr.actions);
      tr.reward = r.reward;
      tr.next_state = r.state;
      tr.next_obs = r.obs;
      tr.done = r.done;
      buffer.push(std::move(tr));
      ++env_steps;
    }

    if (static_cast<int>(buffer.size()) >= cfg.batch_size) {
      for (int t = 0; t < cfg.train_steps_per_loop; ++t) {
        ad::Graph g;
        ad::Var total;
        if (algo == AlgoKind::Masqil) {
          const int n_exp = cfg.batch_size / 2;
          const int n_rep = cfg.batch_size - n_exp;
          std::vector<const Transition*> batch = sample_expert(n_exp);
          std::vector<const Transition*> rep = buffer.sample(n_rep, sample_rng);
          std::vector<double> synth(batch.size(), 1.0);
          for (const Transition* tr : rep) {
            batch.push_back(tr);
            synth.push_back(
                expert_keys.count(discretized_sa_key(tr->state, tr->actions)) ? 1.0 : 0.0);
          }
          total = masqil_loss(g, params, batch, synth);
          last_total = total.value()(0, 0);
          last_expert = 0.0;
          last_value = last_total;
        } else {
          auto expert_batch = sample_expert(cfg.batch_size);
          auto replay_batch = buffer.sample(cfg.batch_size, sample_rng);
          LossBreakdown loss = build_il_loss(g, params, expert_batch, replay_batch, opt_loss);
          total = loss.total;
          last_total = total.value()(0, 0);
          last_expert = loss.expert_term;
          last_value = loss.value_term;
        }
        opt.zero_grad();
        g.backward(total);
        opt.step();
        params.anchor_omega(cfg.omega_anchor * cfg.lr_omega);
        result.loss_trace.push_back(last_total);
        ++params.train_steps_done;
        if (params.train_steps_done % cfg.target_sync == 0) params.sync_targets();
      }
    }

    if (env_steps >= next_eval) {
      emit(env_steps);
      while (next_eval <= env_steps) next_eval += cfg.eval_every;
    }
  }
  if (!result.metrics.empty() && result.metrics.back().step < env_steps) emit(env_steps);
  return result;
}

}  // namespace mifq
