#pragma once

// Linear canonical transform: kernel evaluation and dense quadrature
// forward/inverse transforms of M-channel sampled functions.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>

#include "lctvnumra/error.hpp"

namespace lctvnumra {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kUnimodularTol = 1e-12;

/// Uniform sampling grid: points start + k*step for 0 <= k < count.
struct Grid {
  double start = 0.0;
  double step = 1.0;
  std::size_t count = 0;

  double point(std::size_t k) const { return start + static_cast<double>(k) * step; }
  /// Right end of the rectangle-rule cell of the last sample.
  double end() const { return start + static_cast<double>(count) * step; }

  bool operator==(const Grid&) const = default;
};

inline void require_grid(const Grid& g) {
  if (g.count == 0) throw Error(ErrorCode::EmptyGrid, "grid has no points");
  if (!(g.step > 0.0) || !std::isfinite(g.step) || !std::isfinite(g.start))
    throw Error(ErrorCode::InvalidArgument, "grid step must be positive and finite");
}

/// Grid spanning [lo, hi) with `count` points.
inline Grid make_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw Error(ErrorCode::EmptyGrid, "grid has no points");
  return Grid{lo, (hi - lo) / static_cast<double>(count), count};
}

/// M-channel complex samples; `values` is count x M.
struct SampledVectorFunction {
  Grid grid;
  Matrix values;

  SampledVectorFunction() = default;
  SampledVectorFunction(const Grid& g, Matrix v) : grid(g), values(std::move(v)) {
    if (static_cast<std::size_t>(values.rows()) != grid.count)
      throw Error(ErrorCode::InvalidArgument, "sample rows must equal grid count");
  }
  SampledVectorFunction(const Grid& g, int channels)
      : grid(g), values(Matrix::Zero(static_cast<Eigen::Index>(g.count), channels)) {}

  int channels() const { return static_cast<int>(values.cols()); }

  /// Rectangle-rule L2 norm over all channels.
  double norm() const { return std::sqrt(values.squaredNorm() * grid.step); }
};

/// Unimodular parameter matrix (A, B; C, D) with B != 0.
class LctParams {
 public:
  static LctParams make(double A, double B, double C, double D) {
    if (!(std::abs(A * D - B * C - 1.0) <= kUnimodularTol))
      throw Error(ErrorCode::NotUnimodular, "AD - BC must equal 1");
    if (B == 0.0) throw Error(ErrorCode::DegenerateB, "B = 0 branch is not supported");
    return LctParams(A, B, C, D);
  }

  double A() const { return a_; }
  double B() const { return b_; }
  double C() const { return c_; }
  double D() const { return d_; }

  /// Parameters of the inverse transform, (D, -B, -C, A).
  LctParams inverse() const { return LctParams(d_, -b_, -c_, a_); }

  /// Matrix product this * other; the result is validated again.
  LctParams compose(const LctParams& o) const {
    return make(a_ * o.a_ + b_ * o.c_, a_ * o.b_ + b_ * o.d_, c_ * o.a_ + d_ * o.c_,
                c_ * o.b_ + d_ * o.d_);
  }

  double determinant() const { return a_ * d_ - b_ * c_; }

  /// (2*pi*i*B)^(-1/2) on the principal branch.
  cd amplitude() const { return std::exp(-0.5 * std::log(cd(0.0, 2.0 * kPi * b_))); }

 private:
  LctParams(double A, double B, double C, double D) : a_(A), b_(B), c_(C), d_(D) {}
  double a_, b_, c_, d_;
};

inline LctParams validate_params(double A, double B, double C, double D) {
  return LctParams::make(A, B, C, D);
}

/// The Fourier-type parameter matrix (0, 1, -1, 0).
inline LctParams fourier_params() { return LctParams::make(0.0, 1.0, -1.0, 0.0); }

inline cd lct_kernel(double t, double xi, const LctParams& p) {
  const double phase = (p.A() * t * t - 2.0 * t * xi + p.D() * xi * xi) / (2.0 * p.B());
  return p.amplitude() * std::polar(1.0, phase);
}

namespace detail {

// Dense rectangle-rule apply; serial ascending summation over input samples.
inline SampledVectorFunction dense_apply(const SampledVectorFunction& f, const Grid& out,
                                         const LctParams& p) {
  require_grid(f.grid);
  require_grid(out);
  const auto n_in = static_cast<Eigen::Index>(f.grid.count);
  const auto n_out = static_cast<Eigen::Index>(out.count);
  const int m = f.channels();
  const cd amp = p.amplitude() * f.grid.step;
  const double inv2b = 1.0 / (2.0 * p.B());

  // The kernel factors as chirp(t) * exp(-i t xi / B) * chirp(xi).
  std::vector<cd> in_chirp(static_cast<std::size_t>(n_in));
  std::vector<double> t(static_cast<std::size_t>(n_in));
  for (Eigen::Index k = 0; k < n_in; ++k) {
    t[k] = f.grid.point(static_cast<std::size_t>(k));
    in_chirp[k] = std::polar(1.0, p.A() * t[k] * t[k] * inv2b);
  }

  SampledVectorFunction result(out, m);
  std::vector<cd> row(static_cast<std::size_t>(n_in));
  for (Eigen::Index j = 0; j < n_out; ++j) {
    const double xi = out.point(static_cast<std::size_t>(j));
    const cd out_factor = amp * std::polar(1.0, p.D() * xi * xi * inv2b);
    for (Eigen::Index k = 0; k < n_in; ++k)
      row[k] = in_chirp[k] * std::polar(1.0, -2.0 * t[k] * xi * inv2b);
    for (int c = 0; c < m; ++c) {
      cd acc = 0.0;
      for (Eigen::Index k = 0; k < n_in; ++k) acc += f.values(k, c) * row[k];
      result.values(j, c) = out_factor * acc;
    }
  }
  return result;
}

}  // namespace detail

/// Quadrature sum_k f(t_k) K(t_k, xi_j) step, per channel.
inline SampledVectorFunction lct_forward(const SampledVectorFunction& f, const Grid& out_grid,
                                         const LctParams& params) {
  return detail::dense_apply(f, out_grid, params);
}

/// Forward transform with the inverse parameter matrix. Its kernel is the
/// complex conjugate of the forward kernel, so no extra phase is needed.
inline SampledVectorFunction lct_inverse(const SampledVectorFunction& F, const Grid& out_grid,
                                         const LctParams& params) {
  return detail::dense_apply(F, out_grid, params.inverse());
}

/// Output grid for which the discrete forward/inverse pair on `time_grid`
/// is exactly unitary: step * xi_step * count = 2*pi*|B|, centred at 0.
inline Grid dual_grid(const Grid& time_grid, const LctParams& params) {
  require_grid(time_grid);
  const double n = static_cast<double>(time_grid.count);
  const double dxi = 2.0 * kPi * std::abs(params.B()) / (n * time_grid.step);
  return Grid{-dxi * std::floor(n / 2.0), dxi, time_grid.count};
}

}  // namespace lctvnumra
