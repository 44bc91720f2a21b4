#include "mifq/nets.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace mifq {

using json = nlohmann::json;

Mlp Mlp::make(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp::make: need at least in and out dims");
  Mlp mlp;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("Mlp::make: dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix W(in, out), b(1, out);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index j = 0; j < b.cols(); ++j) b(0, j) = rng.uniform(-bound, bound);
    mlp.layers.push_back({ad::Tensor(std::move(W)), ad::Tensor(std::move(b))});
  }
  return mlp;
}

ad::Var Mlp::forward(ad::Graph& g, ad::Var x) {
  for (size_t l = 0; l < layers.size(); ++l) {
    x = ad::add_rowvec(ad::matmul(x, g.param(layers[l].W)), g.param(layers[l].b));
    if (l + 1 < layers.size()) x = ad::relu(x);
  }
  return x;
}

Matrix Mlp::forward_nograd(const Matrix& x) const {
  Matrix h = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    h = h * layers[l].W.value;
    h.rowwise() += layers[l].b.value.row(0);
    if (l + 1 < layers.size()) h = ad::relu_value(h);
  }
  return h;
}

std::vector<ad::Tensor*> Mlp::params() {
  std::vector<ad::Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<std::pair<std::string, ad::Tensor*>> Mlp::named_params(const std::string& prefix) {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  for (size_t l = 0; l < layers.size(); ++l) {
    out.emplace_back(prefix + ".l" + std::to_string(l) + ".W", &layers[l].W);
    out.emplace_back(prefix + ".l" + std::to_string(l) + ".b", &layers[l].b);
  }
  return out;
}

void Mlp::copy_from(const Mlp& other) {
  if (layers.size() != other.layers.size())
    throw std::invalid_argument("Mlp::copy_from: layer count mismatch");
  for (size_t l = 0; l < layers.size(); ++l) {
    layers[l].W.value = other.layers[l].W.value;
    layers[l].b.value = other.layers[l].b.value;
  }
}

void Mlp::set_zero() {
  for (auto& l : layers) {
    l.W.value.setZero();
    l.b.value.setZero();
  }
}

LocalQNet LocalQNet::make(int obs_dim, int id_dims, int num_actions, int hidden, Rng& rng) {
  LocalQNet q;
  q.obs_dim = obs_dim;
  q.id_dims = id_dims;
  q.num_actions = num_actions;
  q.net = Mlp::make({obs_dim + id_dims, hidden, hidden, num_actions}, rng);
  return q;
}

Matrix LocalQNet::input_row(const Vector& obs, int agent_id) const {
  if (obs.size() != obs_dim)
    throw std::invalid_argument("LocalQNet: observation dim mismatch (expected " +
                                std::to_string(obs_dim) + ", got " +
                                std::to_string(obs.size()) + ")");
  Matrix row = Matrix::Zero(1, obs_dim + id_dims);
  for (int j = 0; j < obs_dim; ++j) row(0, j) = obs(j);
  if (id_dims > 0) {
    if (agent_id < 0 || agent_id >= id_dims)
      throw std::invalid_argument("LocalQNet: agent id out of range");
    row(0, obs_dim + agent_id) = 1.0;
  }
  return row;
}

Matrix LocalQNet::q_values(const Vector& obs, int agent_id) const {
  return net.forward_nograd(input_row(obs, agent_id));
}

Vector MixingWeights::flatten() const {
  const int m = static_cast<int>(w1.rows());
  const int h = static_cast<int>(w1.cols());
  Vector flat(flat_size(m, h));
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < h; ++j) flat(k++) = w1(i, j);
  for (int j = 0; j < h; ++j) flat(k++) = b1(j);
  for (int j = 0; j < h; ++j) flat(k++) = w2(j);
  flat(k) = b2;
  return flat;
}

MixingWeights MixingWeights::unflatten(const Vector& flat, int m, int h) {
  if (flat.size() != flat_size(m, h))
    throw std::invalid_argument("MixingWeights::unflatten: expected " +
                                std::to_string(flat_size(m, h)) + " values, got " +
                                std::to_string(flat.size()));
  MixingWeights w;
  w.w1.resize(m, h);
  w.b1.resize(h);
  w.w2.resize(h);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < h; ++j) w.w1(i, j) = flat(k++);
  for (int j = 0; j < h; ++j) w.b1(j) = flat(k++);
  for (int j = 0; j < h; ++j) w.w2(j) = flat(k++);
  w.b2 = flat(k);
  return w;
}

HyperNet HyperNet::make(int state_dim, int num_agents, int mix_hidden, int hidden, Rng& rng) {
  HyperNet h;
  h.state_dim = state_dim;
  h.num_agents = num_agents;
  h.mix_hidden = mix_hidden;
  h.net = Mlp::make({state_dim, hidden, MixingWeights::flat_size(num_agents, mix_hidden)}, rng);
  // Start every generated mixer near the plain sum of its inputs
  // (|W1| ~ 1, |W2| ~ 1/h, biases ~ 0): a healthy monotone operating point
  // that the hyper-net then conditions on the state.
  Matrix& out_bias = h.net.layers.back().b.value;
  const int mh = num_agents * mix_hidden;
  for (int j = 0; j < mh; ++j) out_bias(0, j) += 1.0;
  for (int j = 0; j < mix_hidden; ++j)
    out_bias(0, mh + mix_hidden + j) += 1.0 / static_cast<double>(mix_hidden);
  return h;
}

MixingWeights HyperNet::weights_for(const Vector& state) const {
  if (state.size() != state_dim)
    throw std::invalid_argument("HyperNet: state dim mismatch (expected " +
                                std::to_string(state_dim) + ", got " +
                                std::to_string(state.size()) + ")");
  Matrix row(1, state_dim);
  for (int j = 0; j < state_dim; ++j) row(0, j) = state(j);
  Matrix flat = net.forward_nograd(row);
  Vector v(flat.cols());
  for (Eigen::Index j = 0; j < flat.cols(); ++j) v(j) = flat(0, j);
  return MixingWeights::unflatten(v, num_agents, mix_hidden);
}

double mixing_forward(const Vector& x, const MixingWeights& w) {
  if (x.size() != w.w1.rows())
    throw std::invalid_argument("mixing_forward: expected " + std::to_string(w.w1.rows()) +
                                " local values, got " + std::to_string(x.size()));
  Eigen::RowVectorXd pre = x.transpose() * w.w1.cwiseAbs();
  pre += w.b1.transpose();
  Eigen::RowVectorXd act =
      pre.unaryExpr([](double v) { return v >= 0.0 ? v : std::exp(v) - 1.0; });
  return act.dot(w.w2.cwiseAbs().transpose()) + w.b2;
}

ad::Var mixing_forward(ad::Graph& g, ad::Var x, ad::Var hyper_out, int m, int h) {
  const int P = MixingWeights::flat_size(m, h);
  if (hyper_out.cols() != P)
    throw std::invalid_argument("mixing_forward: hyper output must have " + std::to_string(P) +
                                " columns");
  ad::Var w1 = ad::abs(ad::slice_cols(hyper_out, 0, m * h));
  ad::Var b1 = ad::slice_cols(hyper_out, m * h, h);
  ad::Var w2 = ad::abs(ad::slice_cols(hyper_out, m * h + h, h));
  ad::Var b2 = ad::slice_cols(hyper_out, m * h + h + h, 1);
  return ad::mix2(x, w1, b1, w2, b2, m, h);
}

ad::Var hyper_forward(ad::Graph& g, HyperNet& h, ad::Var states) {
  if (states.cols() != h.state_dim)
    throw std::invalid_argument("hyper_forward: state dim mismatch (expected " +
                                std::to_string(h.state_dim) + ", got " +
                                std::to_string(states.cols()) + ")");
  return h.net.forward(g, states);
}

double hyper_mix(const Vector& x, const Vector& state, const HyperNet& h) {
  return mixing_forward(x, h.weights_for(state));
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "{\"format\":\"mifq-checkpoint\",\"version\":1,";
  out << "\"algo\":" << json(ck.algo).dump() << ",";
  out << "\"env_id\":" << json(ck.env_id).dump() << ",";
  out << "\"env_params\":" << (ck.env_params_json.empty() ? "{}" : ck.env_params_json) << ",";
  out << "\"env_hash\":\"" << to_hex(ck.env_hash) << "\",";
  out << "\"params\":{";
  bool first = true;
  for (const auto& [name, mat] : ck.params) {
    if (!first) out << ",";
    first = false;
    out << json(name).dump() << ":{\"shape\":[" << mat.rows() << "," << mat.cols()
        << "],\"data\":[";
    for (Eigen::Index i = 0; i < mat.size(); ++i) {
      if (i) out << ",";
      out << format_g17(mat.data()[i]);
    }
    out << "]}";
  }
  out << "}}\n";
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: parse error in " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "mifq-checkpoint")
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  Checkpoint ck;
  ck.algo = doc.value("algo", "");
  ck.env_id = doc.value("env_id", "");
  ck.env_params_json = doc.contains("env_params") ? doc["env_params"].dump() : "{}";
  ck.env_hash = std::stoull(doc.value("env_hash", "0"), nullptr, 16);
  for (auto& [name, entry] : doc.at("params").items()) {
    auto shape = entry.at("shape");
    const Eigen::Index rows = shape.at(0).get<Eigen::Index>();
    const Eigen::Index cols = shape.at(1).get<Eigen::Index>();
    const auto& data = entry.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw std::runtime_error("load_checkpoint: size mismatch for parameter " + name);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data.at(i).get<double>();
    ck.params[name] = std::move(m);
  }
  return ck;
}

}  // namespace mifq
