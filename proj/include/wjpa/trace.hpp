#pragma once

#include <Eigen/Dense>
#include <complex>

#include "wjpa/error.hpp"

namespace wjpa {

/// Frequency grid plus complex samples (reflection or admittance).
template <typename Scalar>
struct BasicComplexTrace {
  using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

  RealVector freq_hz;
  ComplexVector values;

  BasicComplexTrace() = default;
  BasicComplexTrace(RealVector f, ComplexVector v) : freq_hz(std::move(f)), values(std::move(v)) {
    detail::require(freq_hz.size() == values.size(), ErrorCode::InvalidArgument,
                    "trace frequency and value lengths differ");
  }

  Eigen::Index size() const { return freq_hz.size(); }
  Scalar span() const { return size() > 0 ? freq_hz(size() - 1) - freq_hz(0) : Scalar(0); }
};

using ComplexTrace = BasicComplexTrace<double>;

inline Eigen::VectorXd linear_grid(double lo, double hi, Eigen::Index n) {
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

}  // namespace wjpa
