#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "matchnet/autodiff.hpp"
#include "matchnet/error.hpp"
#include "matchnet/rng.hpp"

using namespace matchnet;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

Matrix random_matrix(int rows, int cols, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return m;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

double evaluate(const Builder& build, const std::vector<Matrix>& inputs) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  return t.scalar(build(t, vars));
}

// Central-difference check of every input entry.
void check_gradient(const Builder& build, std::vector<Matrix> inputs, double tol = 1e-7) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  t.backward(build(t, vars));
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = t.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
        const double x = inputs[k](i, j);
        inputs[k](i, j) = x + h;
        const double up = evaluate(build, inputs);
        inputs[k](i, j) = x - h;
        const double down = evaluate(build, inputs);
        inputs[k](i, j) = x;
        const double numeric = (up - down) / (2 * h);
        EXPECT_NEAR(analytic(i, j), numeric, tol * std::max(1.0, std::abs(numeric)))
            << "input " << k << " entry (" << i << "," << j << ")";
      }
    }
  }
}

}  // namespace

TEST(Tape, ElementwiseOps) {
  CounterRng rng(1);
  const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng, 0.5, 2.0);
  const Matrix k = random_matrix(3, 4, rng);
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
  }, {a, b});
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.div(v[0], v[1]));
  }, {a, b});
  check_gradient([k](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.scale(t.mul_const(v[0], k), 3.0));
  }, {a});
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.mul(t.softplus(v[0]), t.softplus(v[0])));
  }, {a});
}

TEST(Tape, PiecewiseOpsAwayFromKinks) {
  CounterRng rng(2);
  Matrix a = random_matrix(4, 3, rng), b = random_matrix(4, 3, rng);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a(i)) < 0.05) a(i) += 0.1;
    if (std::abs(a(i) - b(i)) < 0.05) b(i) += 0.2;
  }
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.mul(t.relu(v[0]), v[1]));
  }, {a, b});
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.mul(t.leaky_relu(v[0], 0.01), v[1]));
  }, {a, b});
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.min(v[0], v[1]));
  }, {a, b});
}

TEST(Tape, MatrixOps) {
  CounterRng rng(3);
  const Matrix x = random_matrix(5, 3, rng), w = random_matrix(4, 3, rng);
  const Matrix bias = random_matrix(1, 4, rng);
  check_gradient([](Tape& t, const std::vector<Var>& v) {
    const Var z = t.add_row_bias(t.matmul_t(v[0], v[1]), v[2]);
    return t.sum(t.mul(z, z));
  }, {x, w, bias});
}

TEST(Tape, LinearMaps) {
  CounterRng rng(4);
  const Matrix x = random_matrix(3, 4, rng);
  ad::ColumnMap cm{4, 2, {{0, 0, 1.0}, {0, 3, -2.0}, {1, 1, 0.5}, {1, 1, 0.25}}};
  check_gradient([cm](Tape& t, const std::vector<Var>& v) {
    const Var y = t.linear(v[0], cm);
    return t.sum(t.mul(y, y));
  }, {x});

  ad::SparseMap sm;
  sm.out_rows = 2;
  sm.out_cols = 2;
  sm.terms = {{0, 0, 2, 3, 1.5}, {1, 1, 0, 0, -1.0}, {1, 1, 1, 2, 2.0}};
  sm.offset = Matrix::Constant(2, 2, 0.3);
  check_gradient([sm](Tape& t, const std::vector<Var>& v) {
    const Var y = t.linear(v[0], sm);
    return t.sum(t.mul(y, y));
  }, {x});

  Tape t;
  const Var leaf = t.leaf(x);
  const Var y = t.linear(leaf, sm);
  EXPECT_DOUBLE_EQ(t.value(y)(0, 0), 0.3 + 1.5 * x(2, 3));
  EXPECT_DOUBLE_EQ(t.value(y)(0, 1), 0.3);
}

TEST(Tape, SubgradientConventions) {
  Tape t;
  const Var z = t.leaf(Matrix::Zero(1, 2));
  const Var k = t.leaf(Matrix::Zero(1, 2));
  const Var out = t.add(t.sum(t.leaky_relu(z, 0.2)),
                        t.add(t.sum(t.relu(z)), t.sum(t.min(z, k))));
  t.backward(out);
  // 0.2 from leaky relu, 0 from relu, 1 from min (tie goes to z).
  EXPECT_DOUBLE_EQ(t.grad(z)(0, 0), 1.2);
  EXPECT_DOUBLE_EQ(t.grad(k)(0, 0), 0.0);
}

TEST(Tape, ConstantsAndUnusedNodes) {
  Tape t;
  const Var c = t.constant(Matrix::Constant(2, 2, 3.0));
  const Var a = t.leaf(Matrix::Constant(2, 2, 1.0));
  const Var unused = t.leaf(Matrix::Constant(2, 2, 1.0));
  t.backward(t.sum(t.mul(a, c)));
  EXPECT_TRUE(t.grad(a).isApproxToConstant(3.0));
  EXPECT_TRUE(t.grad(unused).isZero());
  EXPECT_TRUE(t.grad(c).isZero());
  EXPECT_EQ(t.kind(a), ad::OpKind::Leaf);
}

TEST(Tape, Errors) {
  Tape t;
  const Var a = t.leaf(Matrix::Zero(2, 2));
  const Var b = t.leaf(Matrix::Zero(2, 3));
  EXPECT_THROW(t.add(a, b), ValidationError);
  EXPECT_THROW(t.matmul_t(a, b), ValidationError);
  EXPECT_THROW(t.leaky_relu(a, 1.5), ValidationError);
  EXPECT_THROW(t.grad(a), std::logic_error);
  EXPECT_THROW(t.backward(a), ValidationError);
  EXPECT_THROW(t.value(Var{99}), ValidationError);
  const Var s = t.sum(a);
  t.backward(s);
  EXPECT_THROW(t.backward(s), std::logic_error);
}

TEST(Adam, MatchesHandComputedSteps) {
  ad::OptimizerState st;
  st.config.weight_decay = 0.1;
  Eigen::VectorXd p(2);
  p << 1.0, -2.0;
  Eigen::VectorXd g(2);
  g << 0.5, -1.0;
  const double lr = 0.01;
  double m0 = 0, v0 = 0, m1 = 0, v1 = 0, x0 = 1.0, x1 = -2.0;
  for (int step = 1; step <= 3; ++step) {
    ad::adam_step(st, p, g, lr);
    m0 = 0.9 * m0 + 0.1 * 0.5;
    v0 = 0.999 * v0 + 0.001 * 0.25;
    m1 = 0.9 * m1 + 0.1 * -1.0;
    v1 = 0.999 * v1 + 0.001 * 1.0;
    const double c1 = 1 - std::pow(0.9, step), c2 = 1 - std::pow(0.999, step);
    x0 = x0 * (1 - lr * 0.1) - lr * (m0 / c1) / (std::sqrt(v0 / c2) + 1e-8);
    x1 = x1 * (1 - lr * 0.1) - lr * (m1 / c1) / (std::sqrt(v1 / c2) + 1e-8);
    EXPECT_NEAR(p(0), x0, 1e-15);
    EXPECT_NEAR(p(1), x1, 1e-15);
  }
  EXPECT_EQ(st.step, 3);
}

TEST(Adam, RejectsNonFiniteGradients) {
  ad::OptimizerState st;
  Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd g(2);
  g << 1.0, std::nan("");
  EXPECT_THROW(ad::adam_step(st, p, g, 0.1), NumericError);
  EXPECT_TRUE(p.isOnes());
  EXPECT_EQ(st.step, 0);
}

TEST(Adam, LearningRateSchedule) {
  const std::vector<long long> ms{10, 25};
  EXPECT_DOUBLE_EQ(ad::lr_schedule(0.004, 0, ms), 0.004);
  EXPECT_DOUBLE_EQ(ad::lr_schedule(0.004, 10, ms), 0.002);
  EXPECT_DOUBLE_EQ(ad::lr_schedule(0.004, 24, ms), 0.002);
  EXPECT_DOUBLE_EQ(ad::lr_schedule(0.004, 25, ms), 0.001);
}
