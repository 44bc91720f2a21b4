#include "mifq/harness.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace mifq {

using json = nlohmann::json;

void RunConfig::validate() const {
  train.validate();
  algo_from_string(algo);
  make_env(env_id, env_params_json);
  if (n_seeds < 1) throw std::invalid_argument("RunConfig: n_seeds must be positive");
  if (n_demo_episodes < 1)
    throw std::invalid_argument("RunConfig: n_demo_episodes must be positive");
}

namespace {

void apply_train_json(TrainConfig& t, const json& j) {
  t.gamma = j.value("gamma", t.gamma);
  t.lr_theta = j.value("lr_theta", t.lr_theta);
  t.lr_omega = j.value("lr_omega", t.lr_omega);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.hidden_dim = j.value("hidden_dim", t.hidden_dim);
  t.mix_hidden = j.value("mix_hidden", t.mix_hidden);
  t.buffer_capacity = j.value("buffer_capacity", t.buffer_capacity);
  t.target_sync = j.value("target_sync", t.target_sync);
  t.collect_steps_per_loop = j.value("collect_steps_per_loop", t.collect_steps_per_loop);
  t.train_steps_per_loop = j.value("train_steps_per_loop", t.train_steps_per_loop);
  t.max_steps = j.value("max_steps", t.max_steps);
  t.eval_every = j.value("eval_every", t.eval_every);
  t.eval_episodes = j.value("eval_episodes", t.eval_episodes);
  t.seed = j.value("seed", t.seed);
  t.greedy_eval = j.value("greedy_eval", t.greedy_eval);
  t.deterministic_timing = j.value("deterministic_timing", t.deterministic_timing);
  t.force_identity_mixer = j.value("force_identity_mixer", t.force_identity_mixer);
  t.omega_anchor = j.value("omega_anchor", t.omega_anchor);
  t.bc_epochs = j.value("bc_epochs", t.bc_epochs);
  t.bc_val_fraction = j.value("bc_val_fraction", t.bc_val_fraction);
}

}  // namespace

void RunConfig::apply_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  env_id = j.value("env", env_id);
  if (j.contains("env_params")) env_params_json = j["env_params"].dump();
  algo = j.value("algo", algo);
  demos_path = j.value("demos", demos_path);
  n_demo_episodes = j.value("n_demo_episodes", n_demo_episodes);
  n_seeds = j.value("n_seeds", n_seeds);
  output_dir = j.value("output_dir", output_dir);
  if (j.contains("train")) apply_train_json(train, j["train"]);
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  cfg.apply_json(ss.str());
  return cfg;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : path_(path), lock_path_(path + ".lock") {
  fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd_ < 0)
    throw std::runtime_error("metrics: " + path + " is locked by another writer (" +
                             lock_path_ + " exists)");
  const bool existed = std::filesystem::exists(path_);
  std::ofstream out(path_, append ? std::ios::app : std::ios::trunc);
  if (!out) {
    ::close(fd_);
    ::unlink(lock_path_.c_str());
    fd_ = -1;
    throw std::runtime_error("metrics: cannot open " + path);
  }
  if (!append || !existed) out << kMetricsHeader << "\n";
}

MetricsWriter::~MetricsWriter() {
  if (fd_ >= 0) {
    ::close(fd_);
    ::unlink(lock_path_.c_str());
  }
}

void MetricsWriter::write(const MetricsRow& row) {
  std::ofstream out(path_, std::ios::app);
  out << row.step << "," << row.seed << "," << format_g17(row.mean_return) << ","
      << format_g17(row.solve_rate) << "," << format_g17(row.loss_total) << ","
      << format_g17(row.loss_expert_term) << "," << format_g17(row.loss_value_term) << ","
      << format_g17(row.wallclock) << "\n";
}

void MetricsWriter::write(const std::vector<MetricsRow>& rows) {
  std::ofstream out(path_, std::ios::app);
  for (const MetricsRow& row : rows)
    out << row.step << "," << row.seed << "," << format_g17(row.mean_return) << ","
        << format_g17(row.solve_rate) << "," << format_g17(row.loss_total) << ","
        << format_g17(row.loss_expert_term) << "," << format_g17(row.loss_value_term) << ","
        << format_g17(row.wallclock) << "\n";
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics: " + path + " is empty");
  if (line != kMetricsHeader)
    throw std::runtime_error("metrics: unexpected header in " + path);
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8)
      throw std::runtime_error("metrics: malformed row at line " + std::to_string(line_no) +
                               " of " + path);
    MetricsRow r;
    r.step = std::stol(fields[0]);
    r.seed = std::stoull(fields[1]);
    r.mean_return = std::stod(fields[2]);
    r.solve_rate = std::stod(fields[3]);
    r.loss_total = std::stod(fields[4]);
    r.loss_expert_term = std::stod(fields[5]);
    r.loss_value_term = std::stod(fields[6]);
    r.wallclock = std::stod(fields[7]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string svg_poly(const std::vector<std::pair<double, double>>& pts, const char* color,
                     double width, bool closed, const char* fill) {
  std::ostringstream os;
  os << (closed ? "<polygon" : "<polyline") << " points=\"";
  for (const auto& [x, y] : pts) os << x << "," << y << " ";
  os << "\" fill=\"" << fill << "\" stroke=\"" << color << "\" stroke-width=\"" << width
     << "\"/>\n";
  return os.str();
}

}  // namespace

void plot_svg(const std::vector<MetricsRow>& rows, const std::string& out_path,
              const std::string& title) {
  if (rows.empty()) throw std::invalid_argument("plot_svg: no rows");
  // group by seed, preserving per-seed step order
  std::map<uint64_t, std::vector<const MetricsRow*>> by_seed;
  for (const MetricsRow& r : rows) by_seed[r.seed].push_back(&r);

  std::vector<long> steps;
  for (const auto* r : by_seed.begin()->second) steps.push_back(r->step);
  for (const auto& [seed, rs] : by_seed) {
    if (rs.size() != steps.size())
      throw std::invalid_argument("plot_svg: seeds have mismatched eval points");
  }

  std::vector<double> mean(steps.size(), 0.0), lo(steps.size(), 1e300), hi(steps.size(), -1e300);
  for (const auto& [seed, rs] : by_seed)
    for (size_t i = 0; i < rs.size(); ++i) {
      mean[i] += rs[i]->mean_return;
      lo[i] = std::min(lo[i], rs[i]->mean_return);
      hi[i] = std::max(hi[i], rs[i]->mean_return);
    }
  for (double& v : mean) v /= static_cast<double>(by_seed.size());

  const double W = 720, H = 440, ml = 70, mr = 20, mt = 36, mb = 48;
  double x0 = static_cast<double>(steps.front()), x1 = static_cast<double>(steps.back());
  if (x1 <= x0) x1 = x0 + 1;
  double y0 = *std::min_element(lo.begin(), lo.end());
  double y1 = *std::max_element(hi.begin(), hi.end());
  if (y1 <= y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double s) { return ml + (s - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  if (!title.empty())
    svg << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";

  // axes with a few ticks
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double sx = x0 + (x1 - x0) * t / 4.0;
    const double vy = y0 + (y1 - y0) * t / 4.0;
    svg << "<text x=\"" << px(sx) << "\" y=\"" << H - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << static_cast<long>(sx)
        << "</text>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(vy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << static_cast<int>(std::lround(vy))
        << "</text>\n";
  }
  svg << "<text x=\"" << (W + ml - mr) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  svg << "<text x=\"16\" y=\"" << (H + mt - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (H + mt - mb) / 2 << ")\">mean return</text>\n";

  // min-max band across seeds, then the mean line
  std::vector<std::pair<double, double>> band;
  for (size_t i = 0; i < steps.size(); ++i) band.push_back({px(steps[i]), py(hi[i])});
  for (size_t i = steps.size(); i-- > 0;) band.push_back({px(steps[i]), py(lo[i])});
  svg << svg_poly(band, "none", 0, true, "#b3cde3");
  std::vector<std::pair<double, double>> line;
  for (size_t i = 0; i < steps.size(); ++i) line.push_back({px(steps[i]), py(mean[i])});
  svg << svg_poly(line, "#045a8d", 2, false, "none");
  svg << "</svg>\n";

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("plot_svg: cannot open " + out_path);
  out << svg.str();
}

EvalReport evaluate(const MifqParams& params, Env& env, int n_episodes, uint64_t seed,
                    bool greedy) {
  auto [ret, solve] = evaluate_policy(env, net_policy(params, greedy), n_episodes, seed);
  return {ret, solve};
}

Checkpoint checkpoint_from_params(const MifqParams& params, const std::string& algo, Env& env) {
  Checkpoint ck;
  ck.algo = algo;
  ck.env_id = env.id();
  ck.env_params_json = env.params_json();
  ck.env_hash = env.spec_hash();
  MifqParams& mut = const_cast<MifqParams&>(params);
  for (const auto& [name, tensor] : mut.named_params()) ck.params[name] = tensor->value;
  return ck;
}

MifqParams params_from_checkpoint(const Checkpoint& ck, const Env& env) {
  if (ck.env_hash != env.spec_hash())
    throw std::runtime_error("checkpoint: trained on a different env (hash mismatch)");
  // infer structure from parameter names and shapes
  int n_theta = 0;
  while (ck.params.count("theta." + std::to_string(n_theta) + ".l0.W")) ++n_theta;
  if (n_theta == 0) throw std::runtime_error("checkpoint: no local Q parameters found");
  const Matrix& w0 = ck.params.at("theta.0.l0.W");
  const int hidden = static_cast<int>(w0.cols());
  const DecPomdpSpec& spec = env.spec();
  const bool per_agent = n_theta > 1;
  const bool has_hyper = ck.params.count("hyper_r.l0.W") > 0;
  int mix_hidden = 1;
  if (has_hyper) {
    const int out = static_cast<int>(ck.params.at("hyper_r.l1.W").cols());
    // out = m*h + 2h + 1
    mix_hidden = (out - 1) / (spec.num_agents + 2);
  }
  Rng rng(0);
  MifqParams p = MifqParams::make(
      spec, has_hyper ? MixerKind::HyperElu : MixerKind::FixedLinear, per_agent, hidden,
      mix_hidden, rng);
  for (auto& [name, tensor] : p.named_params()) {
    auto it = ck.params.find(name);
    if (it == ck.params.end())
      throw std::runtime_error("checkpoint: missing parameter " + name);
    if (it->second.rows() != tensor->value.rows() || it->second.cols() != tensor->value.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    tensor->value = it->second;
  }
  p.sync_targets();
  return p;
}

std::vector<std::string> run_train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.demos_path.empty())
    throw std::invalid_argument("train: --demos is required");
  DemonstrationSet demos = load_demos(cfg.demos_path);
  std::filesystem::create_directories(cfg.output_dir);
  const AlgoKind algo = algo_from_string(cfg.algo);

  std::vector<std::string> written(cfg.n_seeds);
  std::vector<TrainResult> results(cfg.n_seeds);
  std::vector<std::exception_ptr> errors(cfg.n_seeds);

  auto worker = [&](int k) {
    try {
      std::unique_ptr<Env> env = make_env(cfg.env_id, cfg.env_params_json);
      TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + static_cast<uint64_t>(k);
      results[k] = run_algo(*env, demos, tc, algo);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  // seeds are independent; run at most two at a time
  const int workers = std::min(2, cfg.n_seeds);
  for (int base = 0; base < cfg.n_seeds; base += workers) {
    std::vector<std::thread> pool;
    for (int k = base; k < std::min(cfg.n_seeds, base + workers); ++k)
      pool.emplace_back(worker, k);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (int k = 0; k < cfg.n_seeds; ++k) {
    const uint64_t seed = cfg.train.seed + static_cast<uint64_t>(k);
    const std::string metrics_path =
        cfg.output_dir + "/metrics_" + cfg.algo + "_seed" + std::to_string(seed) + ".csv";
    MetricsWriter writer(metrics_path);
    writer.write(results[k].metrics);
    written[k] = metrics_path;

    std::unique_ptr<Env> env = make_env(cfg.env_id, cfg.env_params_json);
    Checkpoint ck = checkpoint_from_params(results[k].params, cfg.algo, *env);
    save_checkpoint(cfg.output_dir + "/checkpoint_" + cfg.algo + "_seed" +
                        std::to_string(seed) + ".json",
                    ck);
  }
  return written;
}

}  // namespace mifq
