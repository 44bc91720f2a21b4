#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mifq/expert.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace mifq;

namespace {

TabularModel single_state_model(double reward) {
  TabularModel m;
  m.num_states = 1;
  m.num_agents = 1;
  m.action_counts = {1};
  m.trans = Matrix::Ones(1, 1);
  m.reward = Matrix::Constant(1, 1, reward);
  m.initial = Vector::Ones(1);
  return m;
}

}  // namespace

TEST_CASE("soft value iteration: geometric series on the single-armed chain") {
  TabularSoftQ q = soft_value_iteration(single_state_model(1.0), 0.9);
  // logsumexp of one element is the identity, so Q = 1 / (1 - 0.9)
  CHECK(q.q(0, 0) == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(q.residual <= 1e-8);
}

TEST_CASE("soft value iteration: gamma zero returns the reward table") {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ q = soft_value_iteration(model, 0.0);
  CHECK((q.q - model.reward).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(q.iterations <= 2);
}

TEST_CASE("soft value iteration: residuals contract at rate gamma") {
  TwoStepTeam env(0.99);
  TabularSoftQ q = soft_value_iteration(env.model(), 0.99);
  CHECK(q.residual <= 1e-8);
  REQUIRE(q.residual_history.size() >= 12);
  for (size_t i = 0; i + 1 < q.residual_history.size(); ++i) {
    CHECK(q.residual_history[i + 1] <= q.residual_history[i] + 1e-15);
    if (i >= 10 && q.residual_history[i] > 0)
      CHECK(q.residual_history[i + 1] / q.residual_history[i] <= 0.99 + 0.01);
  }
}

TEST_CASE("soft value iteration: non-convergence carries the last residual") {
  try {
    soft_value_iteration(single_state_model(1.0), 0.99, 1e-12, 3);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("soft value iteration: fixed point satisfies the Bellman equation") {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ q = soft_value_iteration(model, 0.99);
  Vector v = q.state_values();
  const int A = model.joint_action_count();
  for (int s = 0; s < model.num_states; ++s)
    for (int a = 0; a < A; ++a) {
      const double rhs = model.reward(s, a) + 0.99 * model.trans.row(s * A + a).dot(v);
      CHECK(std::abs(q.q(s, a) - rhs) <= 1e-8);
    }
}

TEST_CASE("recovered reward equals the true reward table at the fixed point") {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ q = soft_value_iteration(model, 0.99);
  CHECK((recovered_reward_table(q, model) - model.reward).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("expert policy: uniform Q row gives a uniform joint distribution") {
  TabularSoftQ q;
  q.q = Matrix::Constant(3, 4, 1.7);
  q.gamma = 0.99;
  Matrix table = expert_policy_table(q);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 4; ++a) CHECK(table(s, a) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("expert beats the uniform policy by exact enumeration") {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  Matrix probs = expert_policy_table(softq);
  const double expert_ret = oracle::exact_two_step_return(
      model, [&](int s) { return Vector(probs.row(s).transpose()); });
  const double uniform_ret = oracle::exact_two_step_return(
      model, [&](int) { return Vector(Vector::Constant(4, 0.25)); });
  CHECK(expert_ret > uniform_ret);
  CHECK(uniform_ret == doctest::Approx(4.75).epsilon(1e-12));
}

TEST_CASE("scripted spread expert: stays put on a solved layout") {
  SpreadLite env;
  JointPolicy expert = scripted_expert(env);
  // agents already on their landmarks
  Vector s(12);
  s << 1, 1, 2, 3, 4, 0, 1, 1, 2, 3, 4, 0;
  Rng rng(0);
  std::vector<int> a = expert(s, env.observations_for(s), rng);
  CHECK(a == std::vector<int>({0, 0, 0}));
}

TEST_CASE("scripted experts clear the random-policy floor on both grids") {
  for (const char* id : {"spread", "miner"}) {
    auto env = make_env(id);
    JointPolicy expert = scripted_expert(*env);
    JointPolicy rnd = uniform_random_policy(env->spec().action_counts);
    const int n = 256;
    double se = 0.0, sr = 0.0, se2 = 0.0, sr2 = 0.0;
    for (int e = 0; e < n; ++e) {
      const double re = rollout(*env, expert, mix_seed(123, e)).ret;
      const double rr = rollout(*env, rnd, mix_seed(123, e)).ret;
      se += re;
      se2 += re * re;
      sr += rr;
      sr2 += rr * rr;
    }
    const double me = se / n, mr = sr / n;
    const double var = (se2 / n - me * me) / n + (sr2 / n - mr * mr) / n;
    CHECK(me - mr > 2.33 * std::sqrt(var));  // 99% one-sided
  }
}

TEST_CASE("collect: horizon-2 episodes produce exactly two transitions each") {
  TwoStepTeam env(0.99);
  DemonstrationSet demos = collect_demonstrations(
      uniform_random_policy(env.spec().action_counts), env, 1, 5, "uniform");
  REQUIRE(demos.episodes.size() == 1);
  CHECK(demos.episodes[0].size() == 2);
  CHECK(demos.episodes[0].back().done);
  CHECK_FALSE(demos.episodes[0].front().done);
}

TEST_CASE("collect: same policy, env and seed give byte-identical files") {
  const auto dir = std::filesystem::temp_directory_path() / "mifq_test_expert";
  std::filesystem::create_directories(dir);
  auto dump = [&](const std::string& name) {
    SpreadLite env;
    DemonstrationSet demos = collect_demonstrations(scripted_expert(env), env, 5, 9, "scripted");
    const std::string path = (dir / name).string();
    save_demos(demos, path);
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(dump("a.jsonl") == dump("b.jsonl"));
}

TEST_CASE("collect: scripted expert beats random over 512 spread episodes") {
  SpreadLite env;
  DemonstrationSet expert_set =
      collect_demonstrations(scripted_expert(env), env, 512, 10, "scripted");
  SpreadLite env2;
  DemonstrationSet random_set = collect_demonstrations(
      uniform_random_policy(env.spec().action_counts), env2, 512, 10, "uniform");
  auto mean_return = [](const DemonstrationSet& d) {
    double sum = 0.0;
    for (const auto& ep : d.episodes)
      for (const auto& t : ep) sum += t.reward;
    return sum / static_cast<double>(d.episodes.size());
  };
  CHECK(mean_return(expert_set) > mean_return(random_set));
}

TEST_CASE("demo files: save/load round trip is structurally exact") {
  TwoStepTeam env(0.99);
  TabularModel model = env.model();
  TabularSoftQ softq = soft_value_iteration(model, 0.99);
  DemonstrationSet demos =
      collect_demonstrations(expert_policy(softq, model), env, 12, 3, "tabular_soft");
  const auto dir = std::filesystem::temp_directory_path() / "mifq_test_expert";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "rt.jsonl").string();
  save_demos(demos, path);
  DemonstrationSet back = load_demos(path);
  CHECK(back.env_hash == demos.env_hash);
  CHECK(back.seed == demos.seed);
  CHECK(back.expert_id == demos.expert_id);
  REQUIRE(back.episodes.size() == demos.episodes.size());
  for (size_t e = 0; e < demos.episodes.size(); ++e) {
    REQUIRE(back.episodes[e].size() == demos.episodes[e].size());
    for (size_t t = 0; t < demos.episodes[e].size(); ++t) {
      const Transition& x = demos.episodes[e][t];
      const Transition& y = back.episodes[e][t];
      CHECK(x.state == y.state);
      CHECK(x.next_state == y.next_state);
      CHECK(x.actions == y.actions);
      CHECK(x.reward == y.reward);
      CHECK(x.done == y.done);
      for (size_t i = 0; i < x.obs.size(); ++i) {
        CHECK(x.obs[i] == y.obs[i]);
        CHECK(x.next_obs[i] == y.next_obs[i]);
      }
    }
  }
}

TEST_CASE("demo files: truncation and count mismatches are named errors") {
  TwoStepTeam env(0.99);
  DemonstrationSet demos = collect_demonstrations(
      uniform_random_policy(env.spec().action_counts), env, 4, 3, "uniform");
  const auto dir = std::filesystem::temp_directory_path() / "mifq_test_expert";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "broken.jsonl").string();
  save_demos(demos, path);

  // chop the final line in half -> parse error naming the line
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(path, std::ios::binary);
    out << text.substr(0, text.size() - 40);
  }
  try {
    load_demos(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }

  // header transition count disagrees with the body -> validation error
  {
    std::ofstream out(path, std::ios::binary);
    std::istringstream ss(text);
    std::string line;
    std::getline(ss, line);
    out << line << "\n";
    std::getline(ss, line);
    out << line << "\n";  // keep only the first transition
  }
  CHECK_THROWS_AS(load_demos(path), std::runtime_error);
}
