#pragma once

#include "mifq/baselines.hpp"
#include "mifq/ilcore.hpp"

#include <string>
#include <vector>

namespace mifq {

/// Whole-run configuration: env selection, algorithm, training
/// hyper-parameters, demo source and output locations.
struct RunConfig {
  std::string env_id = "two_step";
  std::string env_params_json = "{}";
  std::string algo = "mifq";
  TrainConfig train;
  std::string demos_path;
  int n_demo_episodes = 128;
  int n_seeds = 4;
  std::string output_dir = ".";

  void validate() const;
  static RunConfig from_json_file(const std::string& path);
  void apply_json(const std::string& json_text);
};

inline constexpr const char* kMetricsHeader =
    "step,seed,mean_return,solve_rate,loss_total,loss_expert_term,loss_value_term,wallclock";

/// Exclusive CSV writer. Holds `path`.lock for its lifetime; a second
/// concurrent writer fails instead of interleaving rows.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const MetricsRow& row);
  void write(const std::vector<MetricsRow>& rows);

 private:
  std::string path_;
  std::string lock_path_;
  int fd_ = -1;
};

std::vector<MetricsRow> read_metrics(const std::string& path);

/// Static learning-curve SVG: per-seed min/max band plus the seed mean.
void plot_svg(const std::vector<MetricsRow>& rows, const std::string& out_path,
              const std::string& title = "");

struct EvalReport {
  double mean_return = 0.0;
  double solve_rate = 0.0;
};

EvalReport evaluate(const MifqParams& params, Env& env, int n_episodes, uint64_t seed,
                    bool greedy = false);

/// Rebuilds trainable parameters from a saved checkpoint.
Checkpoint checkpoint_from_params(const MifqParams& params, const std::string& algo, Env& env);
MifqParams params_from_checkpoint(const Checkpoint& ck, const Env& env);

/// Executes one full training run (all seeds) per the config; returns the
/// paths of the metrics files written.
std::vector<std::string> run_train(const RunConfig& cfg);

/// Property suites behind the `selftest` subcommand; returns the number of
/// failed suites and prints one line per suite.
int selftest();

}  // namespace mifq
