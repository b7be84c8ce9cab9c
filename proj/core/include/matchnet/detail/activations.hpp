#pragma once

#include <Eigen/Core>

#include <cmath>

namespace matchnet::detail {

// Scalar activations shared by the plain forward pass and the tape so both
// produce identical values.

inline double softplus(double x) {
  // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|), finite for any finite x.
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

// Matrix versions. Both the network and the tape evaluate activations
// through these, so values agree bit for bit for equal inputs.

template <typename Derived>
typename Derived::PlainObject leaky_relu(const Eigen::MatrixBase<Derived>& x,
                                         double slope) {
  // max(x, slope * x) equals the piecewise form for 0 <= slope < 1.
  return x.cwiseMax(slope * x);
}

template <typename Derived>
void leaky_relu_inplace(Eigen::MatrixBase<Derived>& x, double slope) {
  x = x.cwiseMax(slope * x);
}

template <typename Derived>
typename Derived::PlainObject softplus(const Eigen::MatrixBase<Derived>& x) {
  // log1p(e) computed as log(u) * e / (u - 1) with u = 1 + e, which keeps
  // full relative accuracy for tiny e and vectorizes, unlike Eigen's log1p.
  typename Derived::PlainObject out(x.rows(), x.cols());
  const auto e = (-x.array().abs()).exp().eval();
  const auto u = (1.0 + e).eval();
  out.array() = x.array().max(0.0) +
                (u == 1.0).select(e, u.log() * e / (u - 1.0));
  return out;
}

// Cheap finiteness test: a sum of finite doubles is finite unless it
// overflows, and an overflowing activation is treated as non-finite anyway.
template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return std::isfinite(x.sum());
}

}  // namespace matchnet::detail
