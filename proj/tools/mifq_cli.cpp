#include "mifq/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace mifq;

// env-var override for CI sweeps; flags still win over the config file
void apply_seed_env(RunConfig& cfg) {
  if (const char* s = std::getenv("MIFQ_SEED")) cfg.train.seed = std::strtoull(s, nullptr, 10);
}

JointPolicy build_expert(Env& env) {
  if (env.id() == "two_step") {
    TabularModel model = enumerate_model(env);
    TabularSoftQ softq = soft_value_iteration(model, env.spec().gamma);
    return expert_policy(softq, model);
  }
  return scripted_expert(env);
}

int cmd_expert(const RunConfig& cfg, const std::string& out_path) {
  std::unique_ptr<Env> env = make_env(cfg.env_id, cfg.env_params_json);
  JointPolicy expert = build_expert(*env);
  const std::string expert_id =
      env->id() == "two_step" ? "tabular_soft" : "scripted_" + env->id();
  DemonstrationSet demos =
      collect_demonstrations(expert, *env, cfg.n_demo_episodes, cfg.train.seed, expert_id);
  save_demos(demos, out_path);
  double mean_ret = 0.0;
  for (const auto& ep : demos.episodes)
    for (const auto& t : ep) mean_ret += t.reward;
  mean_ret /= static_cast<double>(demos.episodes.size());
  std::cout << "wrote " << demos.episodes.size() << " episodes (" << demos.transition_count()
            << " transitions) to " << out_path << ", mean return " << mean_ret << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  std::vector<std::string> files = run_train(cfg);
  for (const std::string& f : files) std::cout << "metrics: " << f << "\n";
  std::cout << "checkpoints in " << cfg.output_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ck_path, std::string env_id, std::string env_params,
             int episodes, uint64_t seed, bool greedy) {
  Checkpoint ck = load_checkpoint(ck_path);
  if (env_id.empty()) {
    env_id = ck.env_id;
    env_params = ck.env_params_json;
  }
  std::unique_ptr<Env> env = make_env(env_id, env_params);
  MifqParams params = params_from_checkpoint(ck, *env);
  EvalReport rep = evaluate(params, *env, episodes, seed, greedy);
  std::cout << "mean_return " << format_g17(rep.mean_return) << " solve_rate "
            << format_g17(rep.solve_rate) << " episodes " << episodes << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out,
             const std::string& title) {
  std::vector<MetricsRow> rows;
  for (const std::string& path : csvs) {
    if (!std::filesystem::exists(path))
      throw std::invalid_argument("plot: metrics file not found: " + path);
    for (const MetricsRow& r : read_metrics(path)) rows.push_back(r);
  }
  plot_svg(rows, out, title);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent imitation learning: factorized inverse soft-Q training and baselines"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->add_option("--env", cfg.env_id, "environment id: two_step, spread, miner");
    sub->add_option("--env-params", cfg.env_params_json, "environment parameter JSON");
    sub->add_option("--seed", cfg.train.seed, "base random seed");
  };

  // expert
  auto* sc_expert = app.add_subcommand("expert", "build an expert and record demonstrations");
  std::string demo_out = "demos.jsonl";
  add_common(sc_expert);
  sc_expert->add_option("--episodes", cfg.n_demo_episodes, "episodes to record");
  sc_expert->add_option("--out", demo_out, "output demonstrations file");

  // train
  auto* sc_train = app.add_subcommand("train", "train an imitation learner");
  add_common(sc_train);
  sc_train->add_option("--algo", cfg.algo, "mifq, bc, iiq, iqvdn or masqil");
  sc_train->add_option("--demos", cfg.demos_path, "demonstrations file");
  sc_train->add_option("--out", cfg.output_dir, "output directory");
  sc_train->add_option("--n-seeds", cfg.n_seeds, "number of seeds to run");
  sc_train->add_option("--max-steps", cfg.train.max_steps, "environment steps");
  sc_train->add_option("--eval-every", cfg.train.eval_every, "steps between eval points");
  sc_train->add_option("--eval-episodes", cfg.train.eval_episodes, "episodes per eval point");
  sc_train->add_option("--batch", cfg.train.batch_size, "minibatch size");
  sc_train->add_option("--hidden", cfg.train.hidden_dim, "hidden width");
  sc_train->add_option("--mix-hidden", cfg.train.mix_hidden, "mixing hidden width");
  sc_train->add_option("--lr", cfg.train.lr_theta, "learning rate for the Q nets");
  sc_train->add_option("--lr-omega", cfg.train.lr_omega, "learning rate for the hyper-nets");
  sc_train->add_option("--buffer", cfg.train.buffer_capacity, "replay capacity");
  sc_train->add_option("--omega-anchor", cfg.train.omega_anchor,
                       "pull of hyper-net weights toward init");
  sc_train->add_flag("--greedy-eval", cfg.train.greedy_eval, "argmax actions at eval time");
  sc_train->add_flag("--deterministic-timing", cfg.train.deterministic_timing,
                     "zero the wallclock column for byte-reproducible metrics");

  // eval
  auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ck_path;
  std::string eval_env_id, eval_env_params = "{}";
  int eval_episodes = 32;
  uint64_t eval_seed = 0;
  bool eval_greedy = false;
  sc_eval->add_option("--checkpoint", ck_path, "checkpoint file")->required();
  sc_eval->add_option("--env", eval_env_id, "override env id (defaults to checkpoint's)");
  sc_eval->add_option("--env-params", eval_env_params, "override env params");
  sc_eval->add_option("--episodes", eval_episodes, "episodes to average");
  sc_eval->add_option("--seed", eval_seed, "eval seed");
  sc_eval->add_flag("--greedy", eval_greedy, "argmax actions");

  // plot
  auto* sc_plot = app.add_subcommand("plot", "render learning curves to SVG");
  std::vector<std::string> plot_inputs;
  std::string plot_out = "curves.svg";
  std::string plot_title;
  sc_plot->add_option("csv", plot_inputs, "metrics CSV files")->required();
  sc_plot->add_option("--out", plot_out, "output SVG path");
  sc_plot->add_option("--title", plot_title, "plot title");

  // selftest
  auto* sc_selftest = app.add_subcommand("selftest", "run the built-in property suites");
  (void)sc_selftest;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (!config_path.empty()) {
      // file values form the base; any flag given on the command line wins
      RunConfig merged = RunConfig::from_json_file(config_path);
      CLI::App* sub = app.get_subcommands().front();
      auto given = [&](const std::string& name) {
        return sub->count(name) > 0;
      };
      if (given("--env")) merged.env_id = cfg.env_id;
      if (given("--env-params")) merged.env_params_json = cfg.env_params_json;
      if (given("--seed")) merged.train.seed = cfg.train.seed;
      if (sub == sc_expert && given("--episodes")) merged.n_demo_episodes = cfg.n_demo_episodes;
      if (sub == sc_train) {
        if (given("--algo")) merged.algo = cfg.algo;
        if (given("--demos")) merged.demos_path = cfg.demos_path;
        if (given("--out")) merged.output_dir = cfg.output_dir;
        if (given("--n-seeds")) merged.n_seeds = cfg.n_seeds;
        if (given("--max-steps")) merged.train.max_steps = cfg.train.max_steps;
        if (given("--eval-every")) merged.train.eval_every = cfg.train.eval_every;
        if (given("--eval-episodes")) merged.train.eval_episodes = cfg.train.eval_episodes;
        if (given("--batch")) merged.train.batch_size = cfg.train.batch_size;
        if (given("--hidden")) merged.train.hidden_dim = cfg.train.hidden_dim;
        if (given("--mix-hidden")) merged.train.mix_hidden = cfg.train.mix_hidden;
        if (given("--lr")) merged.train.lr_theta = cfg.train.lr_theta;
        if (given("--lr-omega")) merged.train.lr_omega = cfg.train.lr_omega;
        if (given("--buffer")) merged.train.buffer_capacity = cfg.train.buffer_capacity;
        if (given("--omega-anchor")) merged.train.omega_anchor = cfg.train.omega_anchor;
        if (given("--greedy-eval")) merged.train.greedy_eval = cfg.train.greedy_eval;
        if (given("--deterministic-timing"))
          merged.train.deterministic_timing = cfg.train.deterministic_timing;
      }
      cfg = merged;
    }
    apply_seed_env(cfg);

    if (app.got_subcommand(sc_expert)) return cmd_expert(cfg, demo_out);
    if (app.got_subcommand(sc_train)) return cmd_train(cfg);
    if (app.got_subcommand(sc_eval))
      return cmd_eval(ck_path, eval_env_id, eval_env_params, eval_episodes, eval_seed,
                      eval_greedy);
    if (app.got_subcommand(sc_plot)) return cmd_plot(plot_inputs, plot_out, plot_title);
    if (app.got_subcommand(sc_selftest)) return selftest() == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
