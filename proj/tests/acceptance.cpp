// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Runs the exact-oracle checks first and the desk-scale learning runs last.

#include "mifq/harness.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>
#include <vector>

using namespace mifq;

namespace {

namespace fs = std::filesystem;

int g_failures = 0;

void report(int number, const std::string& name, bool ok, double seconds,
            const std::string& detail) {
  std::printf("%s  criterion %2d  %-28s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number,
              name.c_str(), seconds, detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void run_criterion(int number, const std::string& name, double time_limit_s,
                   const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && time_limit_s > 0 && secs > time_limit_s) {
    ok = false;
    detail = "over the " + format_g17(time_limit_s) + "s budget";
  }
  report(number, name, ok, secs, detail);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------- criterion 1: gradient suite ----------

bool criterion_gradients(std::string& detail) {
  double worst = 0.0;
  int coords = 0;

  // local Q network
  {
    Rng rng(101);
    LocalQNet q = LocalQNet::make(5, 3, 4, 12, rng);
    Matrix input(6, 5 + 3);
    Matrix weights(6, 4);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.uniform(-1, 1);
    auto value = [&]() { return q.net.forward_nograd(input).cwiseProduct(weights).sum(); };
    ad::Graph g;
    ad::Var loss = ad::sum_all(ad::mul(q.net.forward(g, g.input(input)), g.input(weights)));
    for (ad::Tensor* t : q.net.params()) t->zero_grad();
    g.backward(loss);
    for (ad::Tensor* t : q.net.params())
      for (Eigen::Index j = 0; j < t->size(); j += 2) {
        worst = std::max(worst,
                         oracle::rel_err(t->grad.data()[j],
                                         oracle::central_diff(value, t->value.data() + j)));
        ++coords;
      }
    if (coords < 100) return false;
  }

  // hyper-net + mixing net composite
  {
    Rng rng(102);
    const int m = 3, h = 4;
    HyperNet hyper = HyperNet::make(4, m, h, 10, rng);
    Matrix states(8, 4), x(8, m);
    for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-3, 3);
    auto value = [&]() {
      Matrix psi = hyper.net.forward_nograd(states);
      double acc = 0.0;
      for (int b = 0; b < 8; ++b)
        acc += oracle::mix_reference(
            Vector(x.row(b).transpose()),
            MixingWeights::unflatten(Vector(psi.row(b).transpose()), m, h));
      return acc / 8.0;
    };
    ad::Graph g;
    ad::Var psi = hyper_forward(g, hyper, g.input(states));
    ad::Var loss = ad::mean_all(mixing_forward(g, g.input(x), psi, m, h));
    for (ad::Tensor* t : hyper.net.params()) t->zero_grad();
    g.backward(loss);
    int local = 0;
    for (ad::Tensor* t : hyper.net.params())
      for (Eigen::Index j = 0; j < t->size(); j += 2) {
        worst = std::max(worst,
                         oracle::rel_err(t->grad.data()[j],
                                         oracle::central_diff(value, t->value.data() + j)));
        ++local;
      }
    if (local < 100) return false;
    coords += local;
  }

  // full practical loss on the micro env
  {
    TwoStepTeam env(0.9);
    Rng init(103);
    MifqParams params = MifqParams::make(env.spec(), MixerKind::HyperElu, false, 14, 4, init);
    TabularModel model = env.model();
    TabularSoftQ softq = soft_value_iteration(model, 0.9);
    DemonstrationSet expert_demos =
        collect_demonstrations(expert_policy(softq, model), env, 10, 3, "tabular_soft");
    TwoStepTeam env2(0.9);
    DemonstrationSet replay_demos = collect_demonstrations(
        uniform_random_policy(env.spec().action_counts), env2, 10, 4, "uniform");
    auto expert = expert_demos.flat();
    auto replay = replay_demos.flat();
    auto value = [&]() {
      ad::Graph g;
      return mifq_loss(g, params, expert, replay).total.value()(0, 0);
    };
    ad::Graph g;
    LossBreakdown loss = mifq_loss(g, params, expert, replay);
    for (ad::Tensor* t : params.theta_params()) t->zero_grad();
    for (ad::Tensor* t : params.omega_params()) t->zero_grad();
    g.backward(loss.total);
    Rng pick(104);
    std::vector<ad::Tensor*> all = params.theta_params();
    for (ad::Tensor* t : params.omega_params()) all.push_back(t);
    for (int trial = 0; trial < 120; ++trial) {
      ad::Tensor* t = all[pick.uniform_int(static_cast<int>(all.size()))];
      const int j = pick.uniform_int(static_cast<int>(t->size()));
      worst = std::max(worst,
                       oracle::rel_err(t->grad.data()[j],
                                       oracle::central_diff(value, t->value.data() + j)));
      ++coords;
    }
  }

  detail = "worst rel err " + fmt(worst) + " over " + std::to_string(coords) + " coords";
  return worst <= 1e-4;
}

// ---------- criterion 2: mixing properties ----------

bool criterion_mixing_properties(std::string& detail) {
  Rng rng(201);
  double worst_mono = 0.0, worst_conv = 0.0;
  for (int head = 0; head < 2; ++head) {
    const int m = head == 0 ? 2 : 3;
    const int h = head == 0 ? 6 : 8;
    HyperNet hyper = HyperNet::make(4, m, h, 12, rng);
    for (int trial = 0; trial < 10000; ++trial) {
      Vector st(4), x(m), y(m);
      for (int j = 0; j < 4; ++j) st(j) = rng.uniform(-2, 2);
      for (int j = 0; j < m; ++j) {
        x(j) = rng.uniform(-5, 5);
        y(j) = rng.uniform(-5, 5);
      }
      MixingWeights w = hyper.weights_for(st);
      const double fx = mixing_forward(x, w);
      Vector xb = x;
      const int i = rng.uniform_int(m);
      xb(i) += rng.uniform(1e-9, 3.0);
      worst_mono = std::max(worst_mono, fx - mixing_forward(xb, w));
      const double a = rng.uniform(0.01, 0.99);
      worst_conv = std::max(worst_conv, mixing_forward(a * x + (1 - a) * y, w) -
                                            (a * fx + (1 - a) * mixing_forward(y, w)));
    }
  }

  // composite objective in the Q table: 2 agents, 3 actions
  struct Sample {
    int o[2], a[2], on[2];
    bool done;
  };
  const int n_obs = 2, k = 3;
  const double gamma = 0.9;
  Rng crng(202);
  HyperNet hr = HyperNet::make(3, 2, 4, 8, crng);
  HyperNet hv = HyperNet::make(3, 2, 4, 8, crng);
  std::vector<Sample> expert;
  std::vector<MixingWeights> psi_r, psi_v;
  std::vector<std::array<int, 2>> starts;
  for (int e = 0; e < 6; ++e) {
    Sample s;
    for (int i = 0; i < 2; ++i) {
      s.o[i] = crng.uniform_int(n_obs);
      s.a[i] = crng.uniform_int(k);
      s.on[i] = crng.uniform_int(n_obs);
    }
    s.done = crng.uniform() < 0.25;
    expert.push_back(s);
    Vector st(3);
    for (int j = 0; j < 3; ++j) st(j) = crng.uniform(-1, 1);
    psi_r.push_back(hr.weights_for(st));
  }
  for (int e = 0; e < 4; ++e) {
    starts.push_back({crng.uniform_int(n_obs), crng.uniform_int(n_obs)});
    Vector st(3);
    for (int j = 0; j < 3; ++j) st(j) = crng.uniform(-1, 1);
    psi_v.push_back(hv.weights_for(st));
  }
  auto j_of = [&](const Vector& q) {
    auto Q = [&](int agent, int o, int a) { return q(agent * n_obs * k + o * k + a); };
    auto V = [&](int agent, int o) {
      double mx = -1e300;
      for (int a = 0; a < k; ++a) mx = std::max(mx, Q(agent, o, a));
      double acc = 0.0;
      for (int a = 0; a < k; ++a) acc += std::exp(Q(agent, o, a) - mx);
      return mx + std::log(acc);
    };
    double total = 0.0;
    for (size_t e = 0; e < expert.size(); ++e) {
      Vector neg_r(2);
      for (int i = 0; i < 2; ++i) {
        const double boot = expert[e].done ? 0.0 : gamma * V(i, expert[e].on[i]);
        neg_r(i) = -(Q(i, expert[e].o[i], expert[e].a[i]) - boot);
      }
      total += mixing_forward(neg_r, psi_r[e]);
    }
    double v0 = 0.0;
    for (size_t e = 0; e < starts.size(); ++e) {
      Vector v(2);
      for (int i = 0; i < 2; ++i) v(i) = V(i, starts[e][i]);
      v0 += mixing_forward(v, psi_v[e]);
    }
    return total + (1.0 - gamma) * v0 / static_cast<double>(starts.size());
  };
  const int dim = 2 * n_obs * k;
  double worst_composite = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Vector q1(dim), q2(dim);
    for (int j = 0; j < dim; ++j) {
      q1(j) = crng.uniform(-3, 3);
      q2(j) = crng.uniform(-3, 3);
    }
    const double a = crng.uniform(0.01, 0.99);
    worst_composite =
        std::max(worst_composite, j_of(a * q1 + (1 - a) * q2) -
                                      (a * j_of(q1) + (1 - a) * j_of(q2)));
  }

  detail = "monotone " + fmt(worst_mono) + ", convex " + fmt(worst_conv) + ", composite " +
           fmt(worst_composite);
  return worst_mono <= 1e-9 && worst_conv <= 1e-9 && worst_composite <= 1e-8;
}

// ---------- criterion 3: linear-mixer decomposition ----------

bool criterion_linear_decomposition(std::string& detail) {
  TwoStepTeam env(0.9);
  TabularModel model = env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.9);
  DemonstrationSet expert_demos =
      collect_demonstrations(expert_policy(softq, model), env, 12, 3, "tabular_soft");
  TwoStepTeam env2(0.9);
  DemonstrationSet replay_demos = collect_demonstrations(
      uniform_random_policy(env.spec().action_counts), env2, 12, 4, "uniform");
  auto expert = expert_demos.flat();
  auto replay = replay_demos.flat();

  Rng rng(301);
  MifqParams joint =
      MifqParams::make(env.spec(), MixerKind::FixedLinear, /*per_agent=*/true, 12, 4, rng);
  for (int i = 0; i < 2; ++i) joint.linear_weights(i) = rng.uniform(0.25, 2.5);
  joint.sync_targets();

  LossOptions opt;
  opt.mixer = MixerKind::FixedLinear;
  opt.independent = false;
  opt.use_chi2 = false;
  ad::Graph g;
  LossBreakdown loss = build_il_loss(g, joint, expert, replay, opt);
  for (ad::Tensor* t : joint.theta_params()) t->zero_grad();
  g.backward(loss.total);
  std::vector<std::vector<Matrix>> joint_grads(2);
  for (int i = 0; i < 2; ++i)
    for (ad::Tensor* t : joint.theta[i].net.params()) joint_grads[i].push_back(t->grad);

  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    ad::Graph gi;
    ad::Var j_i = iiq_loss(gi, joint, i, expert, replay, /*use_chi2=*/false);
    for (ad::Tensor* t : joint.theta_params()) t->zero_grad();
    gi.backward(j_i);
    size_t kk = 0;
    for (ad::Tensor* t : joint.theta[i].net.params()) {
      const Matrix scaled = joint.linear_weights(i) * t->grad;
      const Matrix& jg = joint_grads[i][kk++];
      for (Eigen::Index u = 0; u < scaled.size(); ++u)
        worst = std::max(worst, oracle::rel_err(jg.data()[u], scaled.data()[u]));
    }
  }
  detail = "worst rel err " + fmt(worst);
  return worst <= 1e-8;
}

// ---------- criterion 4: telescoping identity ----------

bool criterion_telescoping(std::string& detail) {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  Rng rng(401);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Vector v(3);
    for (int s = 0; s < 3; ++s) v(s) = rng.uniform(-5, 5);
    Matrix policy(3, 4);
    for (int s = 0; s < 3; ++s) {
      double sum = 0.0;
      for (int a = 0; a < 4; ++a) {
        policy(s, a) = rng.uniform(0.01, 1.0);
        sum += policy(s, a);
      }
      policy.row(s) /= sum;
    }
    const double gamma = trial % 4 == 0 ? 0.99 : rng.uniform(0.05, 0.99);
    auto [lhs, rhs] = v0_telescope_check(model, policy, v, gamma);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  detail = "worst |lhs - rhs| " + fmt(worst);
  return worst <= 1e-10;
}

// ---------- criterion 5: soft value iteration ----------

bool criterion_soft_vi(std::string& detail) {
  TwoStepTeam env(0.99);
  TabularSoftQ q = soft_value_iteration(env.model(), 0.99);
  if (q.residual > 1e-8) {
    detail = "residual " + fmt(q.residual);
    return false;
  }
  double worst_ratio = 0.0;
  for (size_t i = 10; i + 1 < q.residual_history.size(); ++i)
    if (q.residual_history[i] > 0)
      worst_ratio = std::max(worst_ratio, q.residual_history[i + 1] / q.residual_history[i]);
  detail = "residual " + fmt(q.residual) + ", worst ratio " + fmt(worst_ratio);
  return worst_ratio <= 0.99 + 0.01;
}

// ---------- criterion 6: oracle-scale learning ----------

bool criterion_oracle_learning(std::string& detail) {
  TwoStepTeam demo_env(0.99);
  TabularModel model = demo_env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  Matrix expert_probs = expert_policy_table(softq);
  const double expert_exact = oracle::exact_two_step_return(
      model, [&](int s) { return Vector(expert_probs.row(s).transpose()); });
  DemonstrationSet demos =
      collect_demonstrations(expert_policy(softq, model), demo_env, 64, 3, "tabular_soft");

  TrainConfig cfg;
  cfg.max_steps = 5000;
  cfg.eval_every = 5000;
  cfg.eval_episodes = 8;
  cfg.batch_size = 64;
  cfg.hidden_dim = 64;
  cfg.mix_hidden = 16;
  cfg.deterministic_timing = true;

  std::vector<double> exact_returns(4);
  auto worker = [&](int k) {
    TwoStepTeam env(0.99);
    TrainConfig tc = cfg;
    tc.seed = k;
    TrainResult r = train(env, demos, tc, AlgoKind::Mifq);
    exact_returns[k] = oracle::exact_factored_return(model, [&](int agent, int s) {
      return recover_policy(r.params, TwoStepTeam::encode_state(s), agent);
    });
  };
  for (int base = 0; base < 4; base += 2) {
    std::thread t1(worker, base), t2(worker, base + 1);
    t1.join();
    t2.join();
  }

  std::ostringstream os;
  bool ok = true;
  os << "expert " << fmt(expert_exact) << ", seeds";
  for (int k = 0; k < 4; ++k) {
    os << " " << fmt(exact_returns[k]);
    if (exact_returns[k] < 0.95 * expert_exact) ok = false;
  }
  detail = os.str();
  return ok;
}

// ---------- criterion 7: desk-scale ordering & demo efficiency ----------

bool criterion_desk_scale(std::string& detail) {
  SpreadLite proto;
  const std::vector<int> demo_counts = {16, 64, 128};

  // shared demo pools, one per count, plus the baselines for normalization
  std::vector<DemonstrationSet> demo_sets;
  for (int n : demo_counts) {
    SpreadLite env;
    demo_sets.push_back(collect_demonstrations(scripted_expert(env), env, n, 5, "scripted_spread"));
  }
  SpreadLite eval_env;
  auto [expert_ret, expert_solve] =
      evaluate_policy(eval_env, scripted_expert(proto), 512, 900001);
  auto [random_ret, random_solve] = evaluate_policy(
      eval_env, uniform_random_policy(proto.spec().action_counts), 512, 900001);

  TrainConfig cfg;
  cfg.max_steps = 100000;
  cfg.eval_every = 25000;
  cfg.eval_episodes = 32;
  cfg.batch_size = 32;
  cfg.hidden_dim = 64;
  cfg.mix_hidden = 8;
  cfg.deterministic_timing = true;

  struct Job {
    AlgoKind algo;
    int demo_idx;
    uint64_t seed;
    double final_return = 0.0;
  };
  std::vector<Job> jobs;
  for (int d = 0; d < 3; ++d)
    for (uint64_t s = 0; s < 4; ++s) jobs.push_back({AlgoKind::Mifq, d, s});
  for (uint64_t s = 0; s < 4; ++s) jobs.push_back({AlgoKind::Iiq, 2, s});

  auto worker = [&](Job& job) {
    SpreadLite env;
    TrainConfig tc = cfg;
    tc.seed = job.seed;
    TrainResult r = train(env, demo_sets[job.demo_idx], tc, job.algo);
    SpreadLite ev;
    auto [ret, solve] = evaluate_policy(ev, net_policy(r.params, false), 160, 900777);
    job.final_return = ret;
  };
  for (size_t base = 0; base < jobs.size(); base += 2) {
    std::vector<std::thread> pool;
    for (size_t k = base; k < std::min(jobs.size(), base + 2); ++k)
      pool.emplace_back(worker, std::ref(jobs[k]));
    for (auto& t : pool) t.join();
  }

  auto mean_of = [&](AlgoKind algo, int demo_idx) {
    double acc = 0.0;
    int n = 0;
    for (const Job& j : jobs)
      if (j.algo == algo && j.demo_idx == demo_idx) {
        acc += j.final_return;
        ++n;
      }
    return acc / n;
  };
  const double mifq16 = mean_of(AlgoKind::Mifq, 0);
  const double mifq64 = mean_of(AlgoKind::Mifq, 1);
  const double mifq128 = mean_of(AlgoKind::Mifq, 2);
  const double iiq128 = mean_of(AlgoKind::Iiq, 2);
  const double normalized = (mifq128 - random_ret) / (expert_ret - random_ret);

  std::ostringstream os;
  os << "mifq@{16,64,128}={" << fmt(mifq16) << "," << fmt(mifq64) << "," << fmt(mifq128)
     << "}, iiq@128=" << fmt(iiq128) << ", expert=" << fmt(expert_ret)
     << ", random=" << fmt(random_ret) << ", norm=" << fmt(normalized);
  detail = os.str();
  return mifq128 >= iiq128 && normalized >= 0.8 && mifq16 <= mifq64 && mifq64 <= mifq128;
}

// ---------- criterion 8: single-agent reduction ----------

bool criterion_reduction(std::string& detail) {
  SpreadLite denv(1, 3, 6, 0.95);
  DemonstrationSet demos =
      collect_demonstrations(scripted_expert(denv), denv, 8, 3, "scripted_spread");
  TrainConfig cfg;
  cfg.gamma = 0.95;
  cfg.batch_size = 16;
  cfg.hidden_dim = 16;
  cfg.mix_hidden = 4;
  cfg.buffer_capacity = 512;
  cfg.max_steps = 1000;
  cfg.eval_every = 500;
  cfg.eval_episodes = 4;
  cfg.seed = 5;
  cfg.deterministic_timing = true;
  TrainConfig cfg_mifq = cfg;
  cfg_mifq.force_identity_mixer = true;
  SpreadLite env1(1, 3, 6, 0.95), env2(1, 3, 6, 0.95);
  TrainResult a = train(env1, demos, cfg_mifq, AlgoKind::Mifq);
  TrainResult b = train(env2, demos, cfg, AlgoKind::Iiq);
  if (a.loss_trace.size() != b.loss_trace.size() || a.loss_trace.empty()) {
    detail = "trace length mismatch";
    return false;
  }
  double worst = 0.0;
  for (size_t i = 0; i < a.loss_trace.size(); ++i)
    worst = std::max(worst, std::abs(a.loss_trace[i] - b.loss_trace[i]));
  detail = std::to_string(a.loss_trace.size()) + " steps, worst gap " + fmt(worst);
  return worst <= 1e-9;
}

// ---------- criterion 9: determinism ----------

bool criterion_determinism(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "mifq_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TwoStepTeam denv(0.99);
  TabularModel model = denv.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  DemonstrationSet demos =
      collect_demonstrations(expert_policy(softq, model), denv, 16, 5, "tabular_soft");
  const std::string demo_path = (dir / "demos.jsonl").string();
  save_demos(demos, demo_path);

  RunConfig cfg;
  cfg.env_id = "two_step";
  cfg.algo = "mifq";
  cfg.demos_path = demo_path;
  cfg.n_seeds = 2;
  cfg.train.batch_size = 32;
  cfg.train.hidden_dim = 16;
  cfg.train.mix_hidden = 4;
  cfg.train.buffer_capacity = 256;
  cfg.train.max_steps = 512;
  cfg.train.eval_every = 256;
  cfg.train.eval_episodes = 8;
  cfg.train.deterministic_timing = true;

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  cfg.output_dir = (dir / "a").string();
  std::vector<std::string> first = run_train(cfg);
  cfg.output_dir = (dir / "b").string();
  std::vector<std::string> second = run_train(cfg);
  for (size_t i = 0; i < first.size(); ++i)
    if (slurp(first[i]) != slurp(second[i])) {
      detail = "metrics differ for seed " + std::to_string(i);
      return false;
    }
  if (slurp((dir / "a/checkpoint_mifq_seed0.json").string()) !=
      slurp((dir / "b/checkpoint_mifq_seed0.json").string())) {
    detail = "checkpoints differ";
    return false;
  }

  // with real timing everything except the wallclock field still matches
  cfg.train.deterministic_timing = false;
  cfg.output_dir = (dir / "c").string();
  std::vector<std::string> third = run_train(cfg);
  cfg.output_dir = (dir / "d").string();
  std::vector<std::string> fourth = run_train(cfg);
  for (size_t i = 0; i < third.size(); ++i) {
    std::vector<MetricsRow> x = read_metrics(third[i]);
    std::vector<MetricsRow> y = read_metrics(fourth[i]);
    if (x.size() != y.size()) {
      detail = "row count drift under real timing";
      return false;
    }
    for (size_t r = 0; r < x.size(); ++r)
      if (x[r].step != y[r].step || x[r].mean_return != y[r].mean_return ||
          x[r].loss_total != y[r].loss_total || x[r].solve_rate != y[r].solve_rate) {
        detail = "computation drift under real timing";
        return false;
      }
  }
  detail = "byte-identical CSVs and checkpoints";
  return true;
}

// ---------- criterion 10: format round trips ----------

bool criterion_formats(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "mifq_acceptance_fmt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SpreadLite env;
  DemonstrationSet demos =
      collect_demonstrations(scripted_expert(env), env, 6, 11, "scripted_spread");
  // plant a full-precision value and verify it survives the text round trip
  demos.episodes[0][0].reward = -0.12345678901234567;
  const std::string demo_path = (dir / "demos.jsonl").string();
  save_demos(demos, demo_path);
  DemonstrationSet back = load_demos(demo_path);
  if (back.episodes[0][0].reward != -0.12345678901234567) {
    detail = "demo float contract violated";
    return false;
  }
  for (size_t e = 0; e < demos.episodes.size(); ++e)
    for (size_t t = 0; t < demos.episodes[e].size(); ++t) {
      const Transition& x = demos.episodes[e][t];
      const Transition& y = back.episodes[e][t];
      if (x.state != y.state || x.next_state != y.next_state || x.actions != y.actions ||
          x.reward != y.reward || x.done != y.done) {
        detail = "demo round trip not structural";
        return false;
      }
      for (size_t i = 0; i < x.obs.size(); ++i)
        if (x.obs[i] != y.obs[i] || x.next_obs[i] != y.next_obs[i]) {
          detail = "demo observations drifted";
          return false;
        }
    }
  {
    std::ifstream in(demo_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find(format_g17(-0.12345678901234567)) == std::string::npos) {
      detail = "17-digit rendering missing from the file";
      return false;
    }
  }

  Rng rng(1001);
  TwoStepTeam ts(0.99);
  MifqParams params = MifqParams::make(ts.spec(), MixerKind::HyperElu, false, 12, 4, rng);
  params.theta[0].net.layers[0].W.value(0, 0) = 0.10000000000000001;
  Checkpoint ck = checkpoint_from_params(params, "mifq", ts);
  const std::string ck_path = (dir / "ck.json").string();
  save_checkpoint(ck_path, ck);
  Checkpoint loaded = load_checkpoint(ck_path);
  if (loaded.params.size() != ck.params.size()) {
    detail = "checkpoint lost parameters";
    return false;
  }
  for (const auto& [name, mat] : ck.params) {
    auto it = loaded.params.find(name);
    if (it == loaded.params.end() || it->second != mat) {
      detail = "checkpoint round trip not bit-exact for " + name;
      return false;
    }
  }
  detail = "demos and checkpoints round-trip bit-exactly";
  return true;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  run_criterion(1, "gradient checks", 60, criterion_gradients);
  run_criterion(2, "mixing properties", 120, criterion_mixing_properties);
  run_criterion(3, "linear decomposition", 0, criterion_linear_decomposition);
  run_criterion(4, "telescoping identity", 0, criterion_telescoping);
  run_criterion(5, "soft value iteration", 0, criterion_soft_vi);
  run_criterion(8, "single-agent reduction", 0, criterion_reduction);
  run_criterion(9, "training determinism", 0, criterion_determinism);
  run_criterion(10, "format round trips", 0, criterion_formats);
  run_criterion(6, "oracle-scale learning", 300, criterion_oracle_learning);
  run_criterion(7, "desk-scale ordering", 3600, criterion_desk_scale);
  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
