#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace matchnet::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Constant linear map applied identically to every row:
/// out(r, j) = sum over terms (j, i, c) of c * in(r, i).
struct ColumnMap {
  int in_cols = 0;
  int out_cols = 0;
  struct Term {
    int out_col;
    int in_col;
    double coef;
  };
  std::vector<Term> terms;
};

/// Constant affine map between arbitrary entries:
/// out(R, C) = offset(R, C) + sum over terms of coef * in(r, c).
struct SparseMap {
  int out_rows = 0;
  int out_cols = 0;
  struct Term {
    int out_row;
    int out_col;
    int in_row;
    int in_col;
    double coef;
  };
  std::vector<Term> terms;
  Matrix offset;  // empty means zero
};

enum class OpKind {
  Leaf,
  MatMulT,
  AddRowBias,
  Add,
  Sub,
  Mul,
  MulConst,
  Div,
  Min,
  Relu,
  LeakyRelu,
  Softplus,
  Scale,
  ColumnLinear,
  SparseLinear,
  Sum,
};

/// Append-only record of a matrix-valued computation for reverse-mode
/// differentiation. Nodes are stored in creation order, which is a
/// topological order. backward() may run once per tape.
///
/// Subgradient conventions at kinks: leaky ReLU and max(x, 0) use the
/// negative-side slope at 0, min routes ties to its first argument.
class Tape {
 public:
  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  Var matmul_t(Var a, Var b);             // a * b^T
  Var add_row_bias(Var x, Var bias);      // bias is 1 x cols, added to every row
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                  // elementwise
  Var mul_const(Var a, Matrix k);         // elementwise with a constant
  Var div(Var a, Var b);                  // elementwise
  Var min(Var a, Var b);                  // elementwise
  Var relu(Var a);                        // max(a, 0)
  Var leaky_relu(Var a, double slope);
  Var softplus(Var a);
  Var scale(Var a, double c);
  Var linear(Var a, const ColumnMap& map);
  Var linear(Var a, const SparseMap& map);
  Var sum(Var a);                         // 1 x 1

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  /// Gradient of the last backward() output with respect to `v`. Zero
  /// matrix for nodes that do not influence the output.
  const Matrix& grad(Var v) const;

  /// Reverse sweep from a 1 x 1 node. Throws std::logic_error when called
  /// twice on the same tape and ValidationError for non-scalar outputs.
  void backward(Var output);

  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    int a = -1;
    int b = -1;
    bool needs_grad = false;
    double param = 0.0;
    Matrix value;
    Matrix grad;
    Matrix aux;  // constant operand for MulConst
    std::size_t map_index = 0;
  };

  const Node& node(Var v) const;
  Var push(Node node);
  void check_same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<ColumnMap> column_maps_;
  std::vector<SparseMap> sparse_maps_;
  bool backward_done_ = false;
};

// --- Optimizer ---------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay over a flat parameter vector. Moment
/// buffers are created on the first step.
struct OptimizerState {
  AdamConfig config;
  long long step = 0;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
};

/// One bias-corrected Adam update with learning rate `lr`:
///   p <- p * (1 - lr * weight_decay) - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws NumericError and leaves everything untouched if any gradient is
/// non-finite.
void adam_step(OptimizerState& state, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::Ref<const Eigen::VectorXd>& grads, double lr);

/// base_lr halved once for every milestone <= iteration.
double lr_schedule(double base_lr, long long iteration,
                   std::span<const long long> milestones);

}  // namespace matchnet::ad
