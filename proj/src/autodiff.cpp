#include "mifq/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace mifq::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + shape_str(a) +
                                " vs " + shape_str(b) + ")");
}

Matrix& touch_grad(Graph::Node& n) {
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix elu_derivative(const Matrix& x) {
  return x.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : std::exp(v); });
}

}  // namespace

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw std::invalid_argument("backward: var from another graph");
  Node& top = nodes_[loss.index()];
  if (top.value.rows() != 1 || top.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(top.value));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  touch_grad(top).setConstant(1.0);
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;  // not reachable from the loss
    if (n.backward) n.backward(*this, n);
    if (n.param) n.param->grad += n.grad;
  }
}

void backward(Var loss) { loss.graph()->backward(loss); }

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw std::invalid_argument("matmul: inner dimensions mismatch (" + shape_str(av) +
                                " vs " + shape_str(bv) + ")");
  int ai = a.index(), bi = b.index();
  return a.graph()->make_node("matmul", av * bv, [ai, bi](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)).noalias() += n.grad * g.value(bi).transpose();
    touch_grad(g.node(bi)).noalias() += g.value(ai).transpose() * n.grad;
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  int ai = a.index(), bi = b.index();
  return a.graph()->make_node("add", a.value() + b.value(), [ai, bi](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += n.grad;
    touch_grad(g.node(bi)) += n.grad;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  int ai = a.index(), bi = b.index();
  return a.graph()->make_node("sub", a.value() - b.value(), [ai, bi](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += n.grad;
    touch_grad(g.node(bi)) -= n.grad;
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  int ai = a.index(), bi = b.index();
  return a.graph()->make_node("mul", a.value().cwiseProduct(b.value()),
                              [ai, bi](Graph& g, Graph::Node& n) {
                                touch_grad(g.node(ai)) += n.grad.cwiseProduct(g.value(bi));
                                touch_grad(g.node(bi)) += n.grad.cwiseProduct(g.value(ai));
                              });
}

Var add_rowvec(Var a, Var bias) {
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw std::invalid_argument("add_rowvec: bias must be 1x" + std::to_string(av.cols()) +
                                ", got " + shape_str(bv));
  int ai = a.index(), bi = bias.index();
  Matrix out = av;
  out.rowwise() += bv.row(0);
  return a.graph()->make_node("add_rowvec", std::move(out), [ai, bi](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += n.grad;
    touch_grad(g.node(bi)).row(0) += n.grad.colwise().sum();
  });
}

Var sub_colvec(Var a, Var col) {
  const Matrix& av = a.value();
  const Matrix& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows())
    throw std::invalid_argument("sub_colvec: column must be " + std::to_string(av.rows()) +
                                "x1, got " + shape_str(cv));
  int ai = a.index(), ci = col.index();
  Matrix out = av;
  out.colwise() -= cv.col(0);
  return a.graph()->make_node("sub_colvec", std::move(out), [ai, ci](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += n.grad;
    touch_grad(g.node(ci)).col(0) -= n.grad.rowwise().sum();
  });
}

Var scale(Var a, double s) {
  int ai = a.index();
  return a.graph()->make_node("scale", a.value() * s, [ai, s](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += s * n.grad;
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  int ai = a.index();
  return a.graph()->make_node("relu", relu_value(a.value()), [ai](Graph& g, Graph::Node& n) {
    // subgradient at 0 fixed to 0
    Matrix mask = g.value(ai).unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    touch_grad(g.node(ai)) += n.grad.cwiseProduct(mask);
  });
}

Var elu(Var a) {
  int ai = a.index();
  return a.graph()->make_node("elu", elu_value(a.value()), [ai](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)) += n.grad.cwiseProduct(elu_derivative(g.value(ai)));
  });
}

Var abs(Var a) {
  int ai = a.index();
  return a.graph()->make_node("abs", a.value().cwiseAbs(), [ai](Graph& g, Graph::Node& n) {
    // sign(0) = 0
    Matrix sgn = g.value(ai).unaryExpr(
        [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    touch_grad(g.node(ai)) += n.grad.cwiseProduct(sgn);
  });
}

Var square(Var a) {
  int ai = a.index();
  return a.graph()->make_node("square", a.value().cwiseProduct(a.value()),
                              [ai](Graph& g, Graph::Node& n) {
                                touch_grad(g.node(ai)) += 2.0 * n.grad.cwiseProduct(g.value(ai));
                              });
}

Var logsumexp_rows(Var a) {
  int ai = a.index();
  return a.graph()->make_node("logsumexp_rows", logsumexp_rows_value(a.value()),
                              [ai](Graph& g, Graph::Node& n) {
                                Matrix soft = softmax_rows_value(g.value(ai));
                                soft.array().colwise() *= n.grad.col(0).array();
                                touch_grad(g.node(ai)) += soft;
                              });
}

Var softmax_rows(Var a) {
  int ai = a.index();
  return a.graph()->make_node("softmax_rows", softmax_rows_value(a.value()),
                              [ai](Graph& g, Graph::Node& n) {
                                const Matrix& s = n.value;
                                Matrix dot = (n.grad.cwiseProduct(s)).rowwise().sum();
                                Matrix adj = n.grad;
                                adj.colwise() -= dot.col(0);
                                touch_grad(g.node(ai)) += s.cwiseProduct(adj);
                              });
}

Var sum_all(Var a) {
  int ai = a.index();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph()->make_node("sum_all", std::move(out), [ai](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)).array() += n.grad(0, 0);
  });
}

Var mean_all(Var a) {
  int ai = a.index();
  double inv = 1.0 / static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() * inv;
  return a.graph()->make_node("mean_all", std::move(out), [ai, inv](Graph& g, Graph::Node& n) {
    touch_grad(g.node(ai)).array() += n.grad(0, 0) * inv;
  });
}

Var pick(Var a, const std::vector<int>& col_idx) {
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(col_idx.size()) != x.rows())
    throw std::invalid_argument("pick: need one column index per row");
  for (int c : col_idx)
    if (c < 0 || c >= x.cols())
      throw std::invalid_argument("pick: column index " + std::to_string(c) + " out of range");
  int ai = a.index();
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, 0) = x(r, col_idx[r]);
  return a.graph()->make_node("pick", std::move(out), [ai, col_idx](Graph& g, Graph::Node& n) {
    Matrix& ga = touch_grad(g.node(ai));
    for (Eigen::Index r = 0; r < n.grad.rows(); ++r) ga(r, col_idx[r]) += n.grad(r, 0);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& x = a.value();
  if (rows * cols != x.size())
    throw std::invalid_argument("reshape: size mismatch (" + shape_str(x) + " to " +
                                std::to_string(rows) + "x" + std::to_string(cols) + ")");
  int ai = a.index();
  Matrix out = Eigen::Map<const Matrix>(x.data(), rows, cols);
  return a.graph()->make_node("reshape", std::move(out), [ai](Graph& g, Graph::Node& n) {
    Matrix& ga = touch_grad(g.node(ai));
    ga += Eigen::Map<const Matrix>(n.grad.data(), ga.rows(), ga.cols());
  });
}

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  const Matrix& x = a.value();
  if (first < 0 || count < 0 || first + count > x.cols())
    throw std::invalid_argument("slice_cols: range [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") outside " + shape_str(x));
  int ai = a.index();
  return a.graph()->make_node("slice_cols", x.middleCols(first, count),
                              [ai, first, count](Graph& g, Graph::Node& n) {
                                touch_grad(g.node(ai)).middleCols(first, count) += n.grad;
                              });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> idx;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    idx.push_back(p.index());
    widths.push_back(p.cols());
    at += p.cols();
  }
  return parts[0].graph()->make_node("hcat", std::move(out),
                                     [idx, widths](Graph& g, Graph::Node& n) {
                                       Eigen::Index at = 0;
                                       for (size_t k = 0; k < idx.size(); ++k) {
                                         touch_grad(g.node(idx[k])) +=
                                             n.grad.middleCols(at, widths[k]);
                                         at += widths[k];
                                       }
                                     });
}

Var mix2(Var x, Var w1, Var b1, Var w2, Var b2, int m, int h) {
  const Matrix& xv = x.value();
  const Eigen::Index B = xv.rows();
  auto check = [&](const char* name, const Matrix& v, Eigen::Index cols) {
    if (v.rows() != B || v.cols() != cols)
      throw std::invalid_argument(std::string("mix2: ") + name + " must be " +
                                  std::to_string(B) + "x" + std::to_string(cols) + ", got " +
                                  shape_str(v));
  };
  if (xv.cols() != m)
    throw std::invalid_argument("mix2: x must have " + std::to_string(m) + " columns, got " +
                                shape_str(xv));
  check("w1", w1.value(), static_cast<Eigen::Index>(m) * h);
  check("b1", b1.value(), h);
  check("w2", w2.value(), h);
  check("b2", b2.value(), 1);

  Matrix pre(B, h);
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Map<const Matrix> W1(w1.value().row(b).data(), m, h);
    pre.row(b) = xv.row(b) * W1 + b1.value().row(b);
  }
  Matrix act = elu_value(pre);
  Matrix out(B, 1);
  for (Eigen::Index b = 0; b < B; ++b)
    out(b, 0) = act.row(b).dot(w2.value().row(b)) + b2.value()(b, 0);

  int xi = x.index(), w1i = w1.index(), b1i = b1.index(), w2i = w2.index(), b2i = b2.index();
  Var y = x.graph()->make_node(
      "mix2", std::move(out), [xi, w1i, b1i, w2i, b2i, m, h](Graph& g, Graph::Node& n) {
        const Matrix& pre = n.aux;
        const Matrix& xv = g.value(xi);
        const Matrix& w1v = g.value(w1i);
        const Matrix& w2v = g.value(w2i);
        Matrix act = elu_value(pre);
        Matrix dact = elu_derivative(pre);
        Matrix& gx = touch_grad(g.node(xi));
        Matrix& gw1 = touch_grad(g.node(w1i));
        Matrix& gb1 = touch_grad(g.node(b1i));
        Matrix& gw2 = touch_grad(g.node(w2i));
        Matrix& gb2 = touch_grad(g.node(b2i));
        for (Eigen::Index b = 0; b < pre.rows(); ++b) {
          const double dy = n.grad(b, 0);
          if (dy == 0.0) continue;
          gb2(b, 0) += dy;
          gw2.row(b) += dy * act.row(b);
          Matrix dpre = (dy * w2v.row(b).array() * dact.row(b).array()).matrix();
          gb1.row(b) += dpre.row(0);
          Eigen::Map<const Matrix> W1(w1v.row(b).data(), m, h);
          Eigen::Map<Matrix> gW1(gw1.row(b).data(), m, h);
          gW1.noalias() += xv.row(b).transpose() * dpre.row(0);
          gx.row(b).noalias() += dpre.row(0) * W1.transpose();
        }
      });
  y.graph()->node(y.index()).aux = std::move(pre);
  return y;
}

Var chi2(Var x) { return add(x, scale(square(x), 0.5)); }

Matrix relu_value(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix elu_value(const Matrix& x) {
  return x.unaryExpr([](double v) { return v >= 0.0 ? v : std::exp(v) - 1.0; });
}

Matrix logsumexp_rows_value(const Matrix& x) {
  if (x.cols() < 1) throw std::invalid_argument("logsumexp_rows: empty axis");
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    out(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  return out;
}

Matrix softmax_rows_value(const Matrix& x) {
  if (x.cols() < 1) throw std::invalid_argument("softmax_rows: empty axis");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd e = (x.row(r).array() - x.row(r).maxCoeff()).exp();
    out.row(r) = (e / e.sum()).matrix().transpose();
  }
  return out;
}

void sgd_step(const std::vector<Tensor*>& params, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be positive");
  for (Tensor* p : params) p->value -= lr * p->grad;
}

void AdamOptimizer::add_group(std::vector<Tensor*> params, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("AdamOptimizer: learning rate must be positive");
  Group g;
  g.lr = lr;
  for (Tensor* p : params) {
    g.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    g.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  g.params = std::move(params);
  groups_.push_back(std::move(g));
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Group& g : groups_) {
    for (size_t i = 0; i < g.params.size(); ++i) {
      Tensor& p = *g.params[i];
      g.m[i] = beta1_ * g.m[i] + (1.0 - beta1_) * p.grad;
      g.v[i] = beta2_ * g.v[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          g.lr * (g.m[i].array() / bc1) / ((g.v[i].array() / bc2).sqrt() + eps_);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Group& g : groups_)
    for (Tensor* p : g.params) p->zero_grad();
}

}  // namespace mifq::ad
