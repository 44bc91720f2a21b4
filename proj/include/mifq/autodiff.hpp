#pragma once

#include "mifq/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mifq::ad {

using mifq::Matrix;

/// Learnable parameter: a dense value plus an additively accumulated gradient.
struct Tensor {
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Tensor() = default;
  explicit Tensor(Matrix v, bool req = true)
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())), requires_grad(req) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// graph lives and has not been cleared.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int idx) : g_(g), idx_(idx) {}
  const Matrix& value() const;
  int index() const { return idx_; }
  Graph* graph() const { return g_; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Graph* g_ = nullptr;
  int idx_ = -1;
};

// Define-by-run tape. Nodes are appended in forward order (so parents always
// precede children) and a backward pass walks the tape once in reverse.
class Graph {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    Matrix aux;  // op-private forward cache
    std::function<void(Graph&, Node&)> backward;
    Tensor* param = nullptr;
  };

  Var input(Matrix v) { return make_node("input", std::move(v), nullptr); }

  /// Leaf backed by parameter storage; backward() accumulates into t.grad.
  Var param(Tensor& t) {
    Var v = make_node("param", t.value, nullptr);
    if (t.requires_grad) nodes_[v.index()].param = &t;
    return v;
  }

  Var make_node(const char* op, Matrix v, std::function<void(Graph&, Node&)> bw) {
    if (!v.allFinite())
      throw std::runtime_error(std::string(op) + ": produced a non-finite value");
    Node n;
    n.value = std::move(v);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Node& node(int i) { return nodes_[i]; }
  const Node& node(int i) const { return nodes_[i]; }
  const Matrix& value(int i) const { return nodes_[i].value; }
  Matrix& grad(int i) { return nodes_[i].grad; }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Reverse pass from a scalar loss; visits each node exactly once and adds
  /// d(loss)/dp into every reachable parameter's grad.
  void backward(Var loss);

 private:
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return g_->value(idx_); }

// ---- ops ----

Var matmul(Var a, Var b);
Var add(Var a, Var b);              // same shape
Var sub(Var a, Var b);              // same shape
Var mul(Var a, Var b);              // elementwise, same shape
Var add_rowvec(Var a, Var bias);    // (B x k) + (1 x k), broadcast over rows
Var sub_colvec(Var a, Var col);     // (B x k) - (B x 1), broadcast over cols
Var scale(Var a, double s);
Var neg(Var a);
Var relu(Var a);
Var elu(Var a);
Var abs(Var a);
Var square(Var a);
Var logsumexp_rows(Var a);          // (B x k) -> (B x 1), k >= 1
Var softmax_rows(Var a);            // (B x k) -> (B x k), rows sum to 1
Var sum_all(Var a);                 // -> 1x1
Var mean_all(Var a);                // -> 1x1
Var pick(Var a, const std::vector<int>& col_idx);  // y_b = a(b, idx_b) -> (B x 1)
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
Var hcat(const std::vector<Var>& parts);  // concatenate along columns

/// Batched two-layer monotone mixer: per row b,
///   y_b = elu(x_b * W1_b + b1_b) * w2_b^T + b2_b
/// with W1_b = row b of w1 reshaped to (m x h). Weights are used as given;
/// callers apply abs() first when non-negativity is required.
Var mix2(Var x, Var w1, Var b1, Var w2, Var b2, int m, int h);

/// chi-squared regularizer phi(x) = x + x^2/2, elementwise.
Var chi2(Var x);
inline double chi2(double x) { return x + 0.5 * x * x; }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return neg(a); }

void backward(Var loss);

// ---- value-level counterparts used by no-grad forward paths ----

Matrix relu_value(const Matrix& x);
Matrix elu_value(const Matrix& x);
Matrix logsumexp_rows_value(const Matrix& x);
Matrix softmax_rows_value(const Matrix& x);

// ---- optimizers ----

/// Plain gradient step: p -= lr * p.grad for every tensor.
void sgd_step(const std::vector<Tensor*>& params, double lr);

class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void add_group(std::vector<Tensor*> params, double lr);
  void step();
  void zero_grad();

 private:
  struct Group {
    double lr;
    std::vector<Tensor*> params;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
  };
  std::vector<Group> groups_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace mifq::ad
