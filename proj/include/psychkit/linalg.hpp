#pragma once

#include <cmath>
#include <concepts>
#include <limits>

#include <Eigen/Dense>

namespace psychkit {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// Logistic function, stable for large |x|.
template <std::floating_point Scalar>
Scalar logistic(Scalar x) {
    using std::exp;
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
    const Scalar e = exp(x);
    return e / (Scalar(1) + e);
}

template <typename Derived>
auto logistic(const Eigen::ArrayBase<Derived>& x) {
    return x.unaryExpr([](typename Derived::Scalar v) { return logistic(v); });
}

/// log(1 + exp(x)) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar x) {
    using std::exp;
    using std::log1p;
    return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Derived>
typename Derived::Scalar mean(const Eigen::DenseBase<Derived>& x) {
    return x.sum() / static_cast<typename Derived::Scalar>(x.size());
}

/// Variance with divisor n - ddof.
template <typename Derived>
typename Derived::Scalar variance(const Eigen::DenseBase<Derived>& x, int ddof = 0) {
    using Scalar = typename Derived::Scalar;
    const Scalar m = mean(x);
    return (x.derived().array() - m).square().sum() / static_cast<Scalar>(x.size() - ddof);
}

/// Pearson correlation; NaN when either side has zero variance.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::DenseBase<DerivedA>& x,
                                  const Eigen::DenseBase<DerivedB>& y) {
    using Scalar = typename DerivedA::Scalar;
    const auto dx = (x.derived().array() - mean(x)).eval();
    const auto dy = (y.derived().array() - mean(y)).eval();
    const Scalar sxx = dx.square().sum();
    const Scalar syy = dy.square().sum();
    if (sxx <= Scalar(0) || syy <= Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
    return (dx * dy).sum() / std::sqrt(sxx * syy);
}

}  // namespace psychkit
