#include "mifq/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mifq {

namespace {

struct BcData {
  std::vector<Matrix> inputs;               // per agent: N x d_o
  std::vector<std::vector<int>> actions;    // per agent: N
  std::vector<Matrix> val_inputs;
  std::vector<std::vector<int>> val_actions;
};

BcData split_bc_data(const DemonstrationSet& demos, const DecPomdpSpec& spec,
                     double val_fraction, Rng& rng) {
  const int m = spec.num_agents;
  std::vector<const Transition*> flat = demos.flat();
  // deterministic shuffle, then tail fraction held out
  for (size_t i = 0; i + 1 < flat.size(); ++i) {
    size_t j = i + rng.uniform_int(static_cast<int>(flat.size() - i));
    std::swap(flat[i], flat[j]);
  }
  const size_t n_val = static_cast<size_t>(std::floor(val_fraction * flat.size()));
  const size_t n_train = flat.size() - n_val;
  BcData data;
  data.inputs.resize(m);
  data.actions.resize(m);
  data.val_inputs.resize(m);
  data.val_actions.resize(m);
  for (int i = 0; i < m; ++i) {
    data.inputs[i].resize(n_train, spec.obs_dim);
    data.val_inputs[i].resize(n_val, spec.obs_dim);
    for (size_t b = 0; b < n_train; ++b) {
      data.inputs[i].row(b) = flat[b]->obs[i].transpose();
      data.actions[i].push_back(flat[b]->actions[i]);
    }
    for (size_t b = 0; b < n_val; ++b) {
      data.val_inputs[i].row(b) = flat[n_train + b]->obs[i].transpose();
      data.val_actions[i].push_back(flat[n_train + b]->actions[i]);
    }
  }
  return data;
}

// mean cross-entropy of one policy head on a labelled set, value level
double bc_ce_value(const LocalQNet& net, const Matrix& inputs, const std::vector<int>& labels,
                   int agent) {
  if (inputs.rows() == 0) return 0.0;
  Matrix rows(inputs.rows(), net.obs_dim + net.id_dims);
  for (Eigen::Index b = 0; b < inputs.rows(); ++b)
    rows.row(b) = net.input_row(Vector(inputs.row(b).transpose()), agent);
  Matrix logits = net.net.forward_nograd(rows);
  Matrix lse = ad::logsumexp_rows_value(logits);
  double ce = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b)
    ce += lse(b, 0) - logits(b, labels[b]);
  return ce / static_cast<double>(logits.rows());
}

}  // namespace

TrainResult bc_train(const DemonstrationSet& demos, const DecPomdpSpec& spec,
                     const TrainConfig& cfg, const BcEpochHook& hook) {
  cfg.validate();
  if (demos.episodes.empty())
    throw std::invalid_argument("bc_train: demonstration set is empty");
  demos.validate();

  DecPomdpSpec sp = spec;
  sp.gamma = cfg.gamma;
  const int m = sp.num_agents;
  Rng init_rng(mix_seed(cfg.seed, "init"));
  TrainResult result{MifqParams::make(sp, MixerKind::FixedLinear, /*per_agent=*/true,
                                      cfg.hidden_dim, cfg.mix_hidden, init_rng),
                     {}};
  MifqParams& params = result.params;

  Rng split_rng(mix_seed(cfg.seed, "bc.split"));
  BcData data = split_bc_data(demos, sp, cfg.bc_val_fraction, split_rng);

  ad::AdamOptimizer opt;
  opt.add_group(params.theta_params(), cfg.lr_theta);

  const bool has_val = data.val_inputs[0].rows() > 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    for (ad::Tensor* t : params.theta_params()) best_params.push_back(t->value);
  };
  auto restore = [&]() {
    size_t k = 0;
    for (ad::Tensor* t : params.theta_params()) t->value = best_params[k++];
  };
  snapshot();

  // pre-build the id-augmented input rows once per agent
  std::vector<Matrix> rows_by_agent(m);
  for (int i = 0; i < m; ++i) {
    LocalQNet& net = params.theta[i];
    rows_by_agent[i].resize(data.inputs[i].rows(), net.obs_dim + net.id_dims);
    for (Eigen::Index b = 0; b < rows_by_agent[i].rows(); ++b)
      rows_by_agent[i].row(b) = net.input_row(Vector(data.inputs[i].row(b).transpose()), i);
  }
  const int n_train = static_cast<int>(rows_by_agent[0].rows());
  const int mb = std::min(cfg.batch_size, n_train);
  Rng batch_rng(mix_seed(cfg.seed, "bc.batch"));
  std::vector<int> order(n_train);
  for (int b = 0; b < n_train; ++b) order[b] = b;

  // patience only starts counting once the fit has had time to move
  const int patience = 25;
  const int min_epochs = 40;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.bc_epochs; ++epoch) {
    for (size_t b = 0; b + 1 < order.size(); ++b) {
      size_t j = b + batch_rng.uniform_int(static_cast<int>(order.size() - b));
      std::swap(order[b], order[j]);
    }
    double epoch_ce = 0.0;
    int n_batches = 0;
    for (int start = 0; start + mb <= n_train; start += mb) {
      ad::Graph g;
      ad::Var total;
      for (int i = 0; i < m; ++i) {
        Matrix rows(mb, rows_by_agent[i].cols());
        std::vector<int> labels(mb);
        for (int b = 0; b < mb; ++b) {
          rows.row(b) = rows_by_agent[i].row(order[start + b]);
          labels[b] = data.actions[i][order[start + b]];
        }
        ad::Var logits = params.theta[i].net.forward(g, g.input(rows));
        ad::Var logp = ad::sub_colvec(logits, ad::logsumexp_rows(logits));
        ad::Var ce = ad::neg(ad::mean_all(ad::pick(logp, labels)));
        total = (i == 0) ? ce : ad::add(total, ce);
      }
      opt.zero_grad();
      g.backward(total);
      opt.step();
      epoch_ce += total.value()(0, 0);
      ++n_batches;
    }
    result.loss_trace.push_back(epoch_ce / std::max(1, n_batches));

    double val_ce = 0.0;
    if (has_val) {
      for (int i = 0; i < m; ++i)
        val_ce += bc_ce_value(params.theta[i], data.val_inputs[i], data.val_actions[i], i);
      if (val_ce < best_val - 1e-12) {
        best_val = val_ce;
        snapshot();
        since_best = 0;
      } else if (++since_best >= patience && epoch >= min_epochs) {
        if (hook) hook(epoch, result.loss_trace.back(), val_ce);
        break;
      }
    } else {
      snapshot();
    }
    if (hook) hook(epoch, result.loss_trace.back(), val_ce);
  }
  restore();
  return result;
}

TrainResult mifq_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg) {
  return train(env, demos, cfg, AlgoKind::Mifq);
}

TrainResult iiq_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg) {
  return train(env, demos, cfg, AlgoKind::Iiq);
}

TrainResult iqvdn_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg) {
  return train(env, demos, cfg, AlgoKind::Iqvdn);
}

TrainResult masqil_train(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg) {
  return train(env, demos, cfg, AlgoKind::Masqil);
}

TrainResult run_algo(Env& env, const DemonstrationSet& demos, const TrainConfig& cfg,
                     AlgoKind algo) {
  if (algo != AlgoKind::Bc) return train(env, demos, cfg, algo);

  // BC trains offline; evaluation rows are appended around the fit.
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<Env> eval_env = env.clone_fresh();
  std::vector<MetricsRow> rows;
  TrainResult result = bc_train(demos, env.spec(), cfg, nullptr);
  JointPolicy pol = net_policy(result.params, cfg.greedy_eval);
  auto [ret, solve] = evaluate_policy(*eval_env, pol, cfg.eval_episodes, cfg.seed);
  const double wall =
      cfg.deterministic_timing
          ? 0.0
          : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MetricsRow row;
  row.step = static_cast<long>(result.loss_trace.size());
  row.seed = cfg.seed;
  row.mean_return = ret;
  row.solve_rate = solve;
  row.loss_total = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  row.loss_expert_term = row.loss_total;
  row.loss_value_term = 0.0;
  row.wallclock = wall;
  result.metrics.push_back(row);
  return result;
}

}  // namespace mifq
