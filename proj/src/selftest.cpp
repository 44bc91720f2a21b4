#include "mifq/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace mifq {

namespace {

struct SuiteRunner {
  int failures = 0;
  void run(const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  }
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

// central finite differences through an arbitrary scalar-valued rebuild
double fd_gradient(const std::function<double()>& eval, double* coord, double h = 1e-5) {
  const double saved = *coord;
  *coord = saved + h;
  const double up = eval();
  *coord = saved - h;
  const double dn = eval();
  *coord = saved;
  return (up - dn) / (2.0 * h);
}

// small random loss over a local Q net, a hyper net and a mixer
struct LossFixture {
  DecPomdpSpec spec;
  MifqParams params;
  DemonstrationSet demos;
  std::vector<Transition> replay_storage;

  static LossFixture make(uint64_t seed) {
    TwoStepTeam env(0.9);
    Rng init(mix_seed(seed, "fixture"));
    LossFixture f{env.spec(),
                  MifqParams::make(env.spec(), MixerKind::HyperElu, false, 16, 4, init),
                  {},
                  {}};
    TabularModel model = env.model();
    TabularSoftQ softq = soft_value_iteration(model, 0.9);
    JointPolicy pol = expert_policy(softq, model);
    f.demos = collect_demonstrations(pol, env, 8, seed, "tabular_soft");
    TwoStepTeam env2(0.9);
    JointPolicy rnd = uniform_random_policy(env.spec().action_counts);
    DemonstrationSet r = collect_demonstrations(rnd, env2, 8, seed + 1, "uniform");
    for (auto& ep : r.episodes)
      for (auto& t : ep) f.replay_storage.push_back(t);
    return f;
  }

  std::vector<const Transition*> expert_batch() const { return demos.flat(); }
  std::vector<const Transition*> replay_batch() const {
    std::vector<const Transition*> out;
    for (const auto& t : replay_storage) out.push_back(&t);
    return out;
  }

  double loss_value() {
    ad::Graph g;
    return mifq_loss(g, params, expert_batch(), replay_batch()).total.value()(0, 0);
  }
};

bool suite_autodiff_gradients(std::string& detail) {
  LossFixture f = LossFixture::make(11);
  ad::Graph g;
  LossBreakdown loss = mifq_loss(g, f.params, f.expert_batch(), f.replay_batch());
  for (ad::Tensor* t : f.params.theta_params()) t->zero_grad();
  for (ad::Tensor* t : f.params.omega_params()) t->zero_grad();
  g.backward(loss.total);

  Rng pickr(99);
  std::vector<ad::Tensor*> all = f.params.theta_params();
  for (ad::Tensor* t : f.params.omega_params()) all.push_back(t);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    ad::Tensor* t = all[pickr.uniform_int(static_cast<int>(all.size()))];
    const int j = pickr.uniform_int(static_cast<int>(t->size()));
    const double analytic = t->grad.data()[j];
    const double fd = fd_gradient([&] { return f.loss_value(); }, t->value.data() + j);
    worst = std::max(worst, rel_err(analytic, fd));
  }
  detail = "worst rel err " + format_g17(worst);
  return worst <= 1e-4;
}

bool suite_logsumexp(std::string& detail) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + rng.uniform_int(6);
    Matrix v(1, k), w(1, k);
    for (int j = 0; j < k; ++j) {
      v(0, j) = rng.uniform(-30, 30);
      w(0, j) = rng.uniform(-30, 30);
    }
    const double lse = ad::logsumexp_rows_value(v)(0, 0);
    const double mx = v.maxCoeff();
    if (!(lse >= mx - 1e-12 && lse <= mx + std::log(static_cast<double>(k)) + 1e-12)) {
      detail = "bounds violated";
      return false;
    }
    const double a = rng.uniform(0.01, 0.99);
    Matrix mid = a * v + (1 - a) * w;
    const double lhs = a * lse + (1 - a) * ad::logsumexp_rows_value(w)(0, 0);
    if (lhs < ad::logsumexp_rows_value(mid)(0, 0) - 1e-9) {
      detail = "convexity violated";
      return false;
    }
    Matrix shifted = v.array() + 1000.0;
    Matrix s0 = ad::softmax_rows_value(v), s1 = ad::softmax_rows_value(shifted);
    if ((s0 - s1).cwiseAbs().maxCoeff() > 1e-12 || std::abs(s0.sum() - 1.0) > 1e-12) {
      detail = "softmax shift/normalization violated";
      return false;
    }
  }
  return true;
}

bool suite_autodiff_determinism(std::string& detail) {
  auto run = [](uint64_t seed) {
    LossFixture f = LossFixture::make(seed);
    ad::Graph g;
    LossBreakdown loss = mifq_loss(g, f.params, f.expert_batch(), f.replay_batch());
    for (ad::Tensor* t : f.params.theta_params()) t->zero_grad();
    g.backward(loss.total);
    std::ostringstream os;
    os.precision(17);
    os << loss.total.value()(0, 0);
    for (ad::Tensor* t : f.params.theta_params())
      for (Eigen::Index i = 0; i < t->grad.size(); ++i) os << "," << t->grad.data()[i];
    return os.str();
  };
  if (run(3) != run(3)) {
    detail = "same seed produced different values";
    return false;
  }
  return true;
}

bool suite_mixing_monotone_convex(std::string& detail) {
  Rng rng(7);
  const int m = 3, h = 8;
  HyperNet hyper = HyperNet::make(4, m, h, 16, rng);
  double worst_mono = 0.0, worst_conv = 0.0, worst_grad = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Vector state(4);
    for (int j = 0; j < 4; ++j) state(j) = rng.uniform(-2, 2);
    MixingWeights w = hyper.weights_for(state);
    Vector x(m), y(m);
    for (int j = 0; j < m; ++j) {
      x(j) = rng.uniform(-4, 4);
      y(j) = rng.uniform(-4, 4);
    }
    const double fx = mixing_forward(x, w);
    // per-coordinate bumps never decrease the output
    const int i = rng.uniform_int(m);
    Vector xb = x;
    xb(i) += rng.uniform(0.0, 2.0);
    worst_mono = std::max(worst_mono, fx - mixing_forward(xb, w));
    // midpoint convexity
    const double a = rng.uniform(0.01, 0.99);
    const double lhs = a * fx + (1 - a) * mixing_forward(y, w);
    worst_conv = std::max(worst_conv, mixing_forward(a * x + (1 - a) * y, w) - lhs);
    // analytic gradient in x stays non-negative
    Matrix pre = (x.transpose() * w.w1.cwiseAbs());
    pre.row(0) += w.b1.transpose();
    for (int j = 0; j < m; ++j) {
      double grad = 0.0;
      for (int u = 0; u < h; ++u) {
        const double dact = pre(0, u) >= 0.0 ? 1.0 : std::exp(pre(0, u));
        grad += std::abs(w.w1(j, u)) * dact * std::abs(w.w2(u));
      }
      worst_grad = std::min(worst_grad, grad);
    }
  }
  detail = "monotone slack " + format_g17(worst_mono) + ", convexity slack " +
           format_g17(worst_conv);
  return worst_mono <= 1e-9 && worst_conv <= 1e-9 && worst_grad >= -1e-12;
}

// J(Q) = sum_E M_R(-R^Q) + (1-gamma) mean_0 M_V(V^Q), frozen weights
struct CompositeInstance {
  int n_obs = 2, k = 3, m = 2;
  double gamma = 0.9;
  struct Sample {
    int o[2], a[2], on[2];
    bool done;
  };
  std::vector<Sample> expert;
  std::vector<std::array<int, 2>> starts;
  std::vector<MixingWeights> psi_r, psi_v;

  static CompositeInstance make(uint64_t seed) {
    CompositeInstance c;
    Rng rng(seed);
    HyperNet hr = HyperNet::make(3, 2, 4, 8, rng);
    HyperNet hv = HyperNet::make(3, 2, 4, 8, rng);
    for (int e = 0; e < 6; ++e) {
      Sample s;
      for (int i = 0; i < 2; ++i) {
        s.o[i] = rng.uniform_int(c.n_obs);
        s.a[i] = rng.uniform_int(c.k);
        s.on[i] = rng.uniform_int(c.n_obs);
      }
      s.done = rng.uniform() < 0.25;
      c.expert.push_back(s);
      Vector st(3);
      for (int j = 0; j < 3; ++j) st(j) = rng.uniform(-1, 1);
      c.psi_r.push_back(hr.weights_for(st));
    }
    for (int e = 0; e < 4; ++e) {
      c.starts.push_back({rng.uniform_int(c.n_obs), rng.uniform_int(c.n_obs)});
      Vector st(3);
      for (int j = 0; j < 3; ++j) st(j) = rng.uniform(-1, 1);
      c.psi_v.push_back(hv.weights_for(st));
    }
    return c;
  }

  // q is flat: agent-major tables of n_obs x k
  double value(const Vector& q) const {
    auto Q = [&](int agent, int o, int a) { return q(agent * n_obs * k + o * k + a); };
    auto V = [&](int agent, int o) {
      double mx = -1e300;
      for (int a = 0; a < k; ++a) mx = std::max(mx, Q(agent, o, a));
      double s = 0.0;
      for (int a = 0; a < k; ++a) s += std::exp(Q(agent, o, a) - mx);
      return mx + std::log(s);
    };
    double j = 0.0;
    for (size_t e = 0; e < expert.size(); ++e) {
      Vector neg_r(m);
      for (int i = 0; i < m; ++i) {
        const double boot = expert[e].done ? 0.0 : gamma * V(i, expert[e].on[i]);
        neg_r(i) = -(Q(i, expert[e].o[i], expert[e].a[i]) - boot);
      }
      j += mixing_forward(neg_r, psi_r[e]);
    }
    double v0 = 0.0;
    for (size_t e = 0; e < starts.size(); ++e) {
      Vector v(m);
      for (int i = 0; i < m; ++i) v(i) = V(i, starts[e][i]);
      v0 += mixing_forward(v, psi_v[e]);
    }
    return j + (1.0 - gamma) * v0 / static_cast<double>(starts.size());
  }
};

bool suite_composite_convexity(std::string& detail) {
  CompositeInstance inst = CompositeInstance::make(21);
  Rng rng(22);
  const int dim = inst.m * inst.n_obs * inst.k;
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Vector q1(dim), q2(dim);
    for (int j = 0; j < dim; ++j) {
      q1(j) = rng.uniform(-3, 3);
      q2(j) = rng.uniform(-3, 3);
    }
    const double a = rng.uniform(0.01, 0.99);
    const double lhs = a * inst.value(q1) + (1 - a) * inst.value(q2);
    const double rhs = inst.value(a * q1 + (1 - a) * q2);
    worst = std::max(worst, rhs - lhs);
  }
  detail = "worst midpoint violation " + format_g17(worst);
  return worst <= 1e-8;
}

bool suite_env_purity(std::string& detail) {
  for (const char* id : {"two_step", "spread", "miner"}) {
    auto a = make_env(id), b = make_env(id);
    Rng act(13);
    a->reset(42);
    b->reset(42);
    for (int t = 0; t < 40 && !a->done(); ++t) {
      std::vector<int> actions(a->spec().num_agents);
      for (auto& x : actions) x = act.uniform_int(a->spec().action_counts[0]);
      StepResult ra = a->step(actions);
      StepResult rb = b->step(actions);
      if (ra.reward != rb.reward || ra.state != rb.state || ra.done != rb.done) {
        detail = std::string(id) + ": diverged under identical seeds";
        return false;
      }
      auto obs = a->observations_for(ra.state);
      for (size_t i = 0; i < obs.size(); ++i)
        if (obs[i] != ra.obs[i]) {
          detail = std::string(id) + ": observations not a function of state";
          return false;
        }
    }
  }
  return true;
}

bool suite_soft_vi(std::string& detail) {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  if (softq.residual > 1e-8) {
    detail = "residual " + format_g17(softq.residual);
    return false;
  }
  for (size_t i = 10; i + 1 < softq.residual_history.size(); ++i) {
    const double ratio = softq.residual_history[i + 1] / softq.residual_history[i];
    if (ratio > 0.99 + 0.01 + 1e-9) {
      detail = "contraction ratio " + format_g17(ratio);
      return false;
    }
  }
  Matrix r = recovered_reward_table(softq, model);
  if ((r - model.reward).cwiseAbs().maxCoeff() > 1e-6) {
    detail = "recovered reward off by " +
             format_g17((r - model.reward).cwiseAbs().maxCoeff());
    return false;
  }
  return true;
}

bool suite_demo_roundtrip(std::string& detail) {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  DemonstrationSet demos =
      collect_demonstrations(expert_policy(softq, model), env, 16, 7, "tabular_soft");
  const auto dir = std::filesystem::temp_directory_path() / "mifq_selftest";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "demos.jsonl").string();
  save_demos(demos, path);
  DemonstrationSet back = load_demos(path);
  if (back.episodes.size() != demos.episodes.size() || back.env_hash != demos.env_hash) {
    detail = "round trip changed structure";
    return false;
  }
  for (size_t e = 0; e < demos.episodes.size(); ++e)
    for (size_t t = 0; t < demos.episodes[e].size(); ++t) {
      const Transition& x = demos.episodes[e][t];
      const Transition& y = back.episodes[e][t];
      if (x.state != y.state || x.reward != y.reward || x.actions != y.actions ||
          x.done != y.done) {
        detail = "round trip changed a transition";
        return false;
      }
    }
  std::filesystem::remove(path);
  return true;
}

bool suite_expert_floor(std::string& detail) {
  for (const char* id : {"two_step", "spread", "miner"}) {
    auto env = make_env(id);
    JointPolicy expert;
    if (std::string(id) == "two_step") {
      TabularModel model = enumerate_model(*env);
      TabularSoftQ softq = soft_value_iteration(model, 0.99);
      expert = expert_policy(softq, model);
    } else {
      expert = scripted_expert(*env);
    }
    JointPolicy rnd = uniform_random_policy(env->spec().action_counts);
    const int n = 256;
    double se = 0.0, sr = 0.0, se2 = 0.0, sr2 = 0.0;
    for (int e = 0; e < n; ++e) {
      double re = rollout(*env, expert, mix_seed(1000, e)).ret;
      double rr = rollout(*env, rnd, mix_seed(1000, e)).ret;
      se += re;
      se2 += re * re;
      sr += rr;
      sr2 += rr * rr;
    }
    const double me = se / n, mr = sr / n;
    const double var = (se2 / n - me * me) / n + (sr2 / n - mr * mr) / n;
    // one-sided z test at 99%
    if (me - mr < 2.33 * std::sqrt(std::max(var, 1e-12))) {
      detail = std::string(id) + ": expert not above random (" + format_g17(me) + " vs " +
               format_g17(mr) + ")";
      return false;
    }
  }
  return true;
}

bool suite_linear_decomposition(std::string& detail) {
  LossFixture f = LossFixture::make(31);
  Rng rng(32);
  MifqParams joint = MifqParams::make(f.spec, MixerKind::FixedLinear, /*per_agent=*/true, 12,
                                      4, rng);
  for (int i = 0; i < f.spec.num_agents; ++i) joint.linear_weights(i) = rng.uniform(0.2, 2.0);
  joint.sync_targets();

  auto expert = f.expert_batch();
  auto replay = f.replay_batch();

  LossOptions opt;
  opt.mixer = MixerKind::FixedLinear;
  opt.independent = false;
  opt.use_chi2 = false;
  ad::Graph g;
  LossBreakdown loss = build_il_loss(g, joint, expert, replay, opt);
  for (ad::Tensor* t : joint.theta_params()) t->zero_grad();
  g.backward(loss.total);
  std::vector<std::vector<Matrix>> joint_grads;
  for (int i = 0; i < f.spec.num_agents; ++i) {
    std::vector<Matrix> gs;
    for (ad::Tensor* t : joint.theta[i].net.params()) gs.push_back(t->grad);
    joint_grads.push_back(gs);
  }

  double worst = 0.0;
  for (int i = 0; i < f.spec.num_agents; ++i) {
    ad::Graph gi;
    ad::Var j_i = iiq_loss(gi, joint, i, expert, replay, /*use_chi2=*/false);
    for (ad::Tensor* t : joint.theta_params()) t->zero_grad();
    gi.backward(j_i);
    size_t k = 0;
    for (ad::Tensor* t : joint.theta[i].net.params()) {
      const Matrix scaled = joint.linear_weights(i) * t->grad;
      const Matrix& jg = joint_grads[i][k++];
      for (Eigen::Index u = 0; u < scaled.size(); ++u)
        worst = std::max(worst, rel_err(jg.data()[u], scaled.data()[u]));
    }
  }
  detail = "worst rel err " + format_g17(worst);
  return worst <= 1e-8;
}

bool suite_loss_properties(std::string& detail) {
  LossFixture f = LossFixture::make(41);
  auto expert = f.expert_batch();
  auto replay = f.replay_batch();

  // chi2 keeps every expert sample above -1/2
  {
    ad::Graph g;
    LossBreakdown loss = mifq_loss(g, f.params, expert, replay);
    if (loss.expert_term < -0.5 - 1e-12) {
      detail = "expert term below -1/2";
      return false;
    }
  }

  // terminal masking: with done everywhere, S' contents are irrelevant
  {
    std::vector<Transition> copy;
    for (const Transition* t : replay) {
      Transition c = *t;
      c.done = true;
      copy.push_back(c);
    }
    std::vector<const Transition*> masked;
    for (auto& c : copy) masked.push_back(&c);
    ad::Graph g1;
    const double before = mifq_loss(g1, f.params, expert, masked).total.value()(0, 0);
    for (auto& c : copy) {
      c.next_state.array() += 3.5;
      for (auto& o : c.next_obs) o.array() -= 2.0;
    }
    ad::Graph g2;
    const double after = mifq_loss(g2, f.params, expert, masked).total.value()(0, 0);
    if (before != after) {
      detail = "terminal transitions leaked next-state contents";
      return false;
    }
  }

  // target nets stay fixed between syncs
  {
    Rng prng(77);
    Matrix probe(2, f.spec.obs_dim + (f.spec.num_agents == 1 ? 0 : f.spec.num_agents));
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = prng.uniform(-1, 1);
    Matrix before = f.params.q_net_target(0).net.forward_nograd(probe);
    for (ad::Tensor* t : f.params.theta_params()) t->value.array() += 0.25;
    Matrix after = f.params.q_net_target(0).net.forward_nograd(probe);
    if ((before - after).cwiseAbs().maxCoeff() != 0.0) {
      detail = "target outputs moved with live parameters";
      return false;
    }
  }
  return true;
}

bool suite_telescoping(std::string& detail) {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  Rng rng(51);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Vector v(model.num_states);
    for (int s = 0; s < model.num_states; ++s) v(s) = rng.uniform(-5, 5);
    Matrix policy(model.num_states, model.joint_action_count());
    for (int s = 0; s < model.num_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < policy.cols(); ++a) {
        policy(s, a) = rng.uniform(0.05, 1.0);
        sum += policy(s, a);
      }
      policy.row(s) /= sum;
    }
    const double gamma = trial % 3 == 0 ? 0.99 : rng.uniform(0.1, 0.95);
    auto [lhs, rhs] = v0_telescope_check(model, policy, v, gamma);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  detail = "worst |lhs-rhs| " + format_g17(worst);
  return worst <= 1e-10;
}

bool suite_reduction(std::string& detail) {
  // single-agent grid: identity-mixer mifq must equal iiq step for step
  auto make_solo = [] { return std::make_unique<SpreadLite>(1, 3, 6, 0.95); };
  auto demos_env = make_solo();
  DemonstrationSet demos = collect_demonstrations(scripted_expert(*demos_env), *demos_env, 6,
                                                  3, "scripted_spread");
  TrainConfig cfg;
  cfg.gamma = 0.95;
  cfg.batch_size = 16;
  cfg.hidden_dim = 16;
  cfg.mix_hidden = 4;
  cfg.buffer_capacity = 256;
  cfg.max_steps = 120;
  cfg.eval_every = 60;
  cfg.eval_episodes = 4;
  cfg.seed = 9;
  cfg.deterministic_timing = true;
  cfg.force_identity_mixer = true;
  auto env1 = make_solo();
  TrainResult mifq_run = train(*env1, demos, cfg, AlgoKind::Mifq);
  TrainConfig cfg2 = cfg;
  cfg2.force_identity_mixer = false;
  auto env2 = make_solo();
  TrainResult iiq_run = train(*env2, demos, cfg2, AlgoKind::Iiq);
  if (mifq_run.loss_trace.size() != iiq_run.loss_trace.size() || mifq_run.loss_trace.empty()) {
    detail = "trace lengths differ";
    return false;
  }
  double worst = 0.0;
  for (size_t i = 0; i < mifq_run.loss_trace.size(); ++i)
    worst = std::max(worst, std::abs(mifq_run.loss_trace[i] - iiq_run.loss_trace[i]));
  detail = "worst trace gap " + format_g17(worst);
  return worst <= 1e-9;
}

bool suite_demo_guard(std::string& detail) {
  SpreadLite other;
  DemonstrationSet demos =
      collect_demonstrations(scripted_expert(other), other, 2, 1, "scripted_spread");
  TwoStepTeam env(0.99);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.eval_episodes = 2;
  try {
    train(env, demos, cfg, AlgoKind::Mifq);
  } catch (const std::invalid_argument&) {
    return true;
  }
  detail = "foreign demonstrations were accepted";
  return false;
}

bool suite_train_determinism(std::string& detail) {
  auto once = [] {
    TwoStepTeam env(0.99);
    TabularModel model = env.model();
    TabularSoftQ softq = soft_value_iteration(model, 0.99);
    TwoStepTeam denv(0.99);
    DemonstrationSet demos =
        collect_demonstrations(expert_policy(softq, model), denv, 8, 5, "tabular_soft");
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.hidden_dim = 12;
    cfg.mix_hidden = 4;
    cfg.buffer_capacity = 128;
    cfg.max_steps = 96;
    cfg.eval_every = 48;
    cfg.eval_episodes = 4;
    cfg.seed = 17;
    cfg.deterministic_timing = true;
    TrainResult r = train(env, demos, cfg, AlgoKind::Mifq);
    std::ostringstream os;
    os.precision(17);
    for (const MetricsRow& row : r.metrics)
      os << row.step << "," << row.mean_return << "," << row.loss_total << ";";
    for (double v : r.loss_trace) os << v << ",";
    return os.str();
  };
  if (once() != once()) {
    detail = "repeated runs differ";
    return false;
  }
  return true;
}

}  // namespace

int selftest() {
  SuiteRunner r;
  r.run("autodiff.gradient_check", suite_autodiff_gradients);
  r.run("autodiff.logsumexp_softmax", suite_logsumexp);
  r.run("autodiff.determinism", suite_autodiff_determinism);
  r.run("nets.mixing_monotone_convex", suite_mixing_monotone_convex);
  r.run("nets.composite_convexity", suite_composite_convexity);
  r.run("envs.purity_and_observations", suite_env_purity);
  r.run("expert.soft_value_iteration", suite_soft_vi);
  r.run("expert.demo_roundtrip", suite_demo_roundtrip);
  r.run("expert.quality_floor", suite_expert_floor);
  r.run("ilcore.linear_mixer_decomposition", suite_linear_decomposition);
  r.run("ilcore.loss_properties", suite_loss_properties);
  r.run("ilcore.telescoping", suite_telescoping);
  r.run("baselines.identity_reduction", suite_reduction);
  r.run("baselines.demo_env_guard", suite_demo_guard);
  r.run("harness.train_determinism", suite_train_determinism);
  std::cout << (r.failures == 0 ? "selftest: all suites passed"
                                : "selftest: " + std::to_string(r.failures) + " suite(s) failed")
            << "\n";
  return r.failures;
}

}  // namespace mifq
