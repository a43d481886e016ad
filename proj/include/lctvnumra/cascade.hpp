#pragma once

// Scaling functions and wavelets from masks: truncated infinite products in
// frequency, the LCT route back to time, and a time-domain subdivision
// evaluator that is exact on piecewise-constant refinable functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "lctvnumra/error.hpp"
#include "lctvnumra/lattice.hpp"
#include "lctvnumra/lct.hpp"
#include "lctvnumra/mask.hpp"

namespace lctvnumra {

inline constexpr int kDefaultIterations = 24;
inline constexpr double kConvergenceTol = 1e-6;

/// M x M matrix samples on a uniform grid.
struct SampledMatrixFunction {
  Grid grid;
  std::vector<Matrix> values;

  int M() const { return values.empty() ? 0 : static_cast<int>(values.front().rows()); }
  const Matrix& operator[](std::size_t k) const { return values[k]; }
};

struct CascadeResult {
  SampledMatrixFunction phi_hat;
  int iterations = 0;
  /// sup over the grid of ||P_n - P_{n-1}||_F, the change in the last step.
  double convergence_metric = 0.0;
  /// Metric after each step.
  std::vector<double> history;
  bool converged = false;
};

/// prod_{m=1}^{n} G(omega / (2N)^m), m = 1 leftmost; never throws on
/// non-convergence, the result carries the flag instead.
inline CascadeResult cascade_product(const VectorMask& mask, const Grid& omega_grid,
                                     int iterations, double tol = kConvergenceTol) {
  require_grid(omega_grid);
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
  const auto norm = check_normalization(mask);
  if (!norm.pass)
    throw Error(ErrorCode::NotNormalized,
                "G(0) differs from I by " + detail::fmt(norm.residual));

  const int m = mask.M();
  const double q = static_cast<double>(mask.lattice().q());
  CascadeResult res;
  res.iterations = iterations;
  res.phi_hat.grid = omega_grid;
  res.phi_hat.values.assign(omega_grid.count, Matrix::Identity(m, m));
  res.history.assign(static_cast<std::size_t>(iterations), 0.0);

  for (std::size_t k = 0; k < omega_grid.count; ++k) {
    const double w = omega_grid.point(k);
    Matrix& p = res.phi_hat.values[k];
    double scale = 1.0;
    for (int step = 0; step < iterations; ++step) {
      scale /= q;
      const Matrix next = p * eval_symbol(mask, w * scale);
      const double change = (next - p).norm();
      res.history[step] = std::max(res.history[step], change);
      p = next;
    }
  }
  res.convergence_metric = res.history.back();
  bool tail_ok = true;
  for (int i = std::max(1, iterations - 3); i < iterations; ++i)
    if (res.history[i] > res.history[i - 1]) tail_ok = false;
  res.converged = res.convergence_metric <= tol && tail_ok;
  return res;
}

/// Cascade product that raises NonConverged instead of flagging.
inline CascadeResult phi_hat_product(const VectorMask& mask, const Grid& omega_grid,
                                     int iterations = kDefaultIterations,
                                     double tol = kConvergenceTol) {
  auto res = cascade_product(mask, omega_grid, iterations, tol);
  if (!res.converged)
    throw Error(ErrorCode::NonConverged, "last update " + detail::fmt(res.convergence_metric) +
                                             " after " + std::to_string(iterations) +
                                             " iterations");
  return res;
}

/// Psi_hat_ell(2N omega) = H_ell(omega) Phi_hat(omega); the output grid is
/// the 2N-dilated grid of `phi`.
inline SampledMatrixFunction psi_hat(const MaskBank& bank, const CascadeResult& phi, int ell) {
  const auto q = bank.lattice().q();
  if (ell < 1 || ell > q - 1)
    throw Error(ErrorCode::EllOutOfRange, "ell must lie in 1.." + std::to_string(q - 1));
  if (!phi.converged) throw Error(ErrorCode::NonConverged, "scaling cascade not converged");
  const Grid& g = phi.phi_hat.grid;
  SampledMatrixFunction out;
  out.grid = Grid{g.start * static_cast<double>(q), g.step * static_cast<double>(q), g.count};
  out.values.reserve(g.count);
  const VectorMask& h = bank.filter(static_cast<std::size_t>(ell));
  for (std::size_t k = 0; k < g.count; ++k)
    out.values.push_back(eval_symbol(h, g.point(k)) * phi.phi_hat.values[k]);
  return out;
}

namespace detail {

// Flatten M x M samples to M^2 channels (column-major) and back.
inline SampledVectorFunction flatten(const SampledMatrixFunction& f) {
  const int m = f.M();
  SampledVectorFunction v(f.grid, m * m);
  for (std::size_t k = 0; k < f.values.size(); ++k)
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) v.values(static_cast<Eigen::Index>(k), c * m + r) = f.values[k](r, c);
  return v;
}

inline SampledMatrixFunction unflatten(const SampledVectorFunction& v, int m) {
  SampledMatrixFunction f{v.grid, {}};
  f.values.reserve(v.grid.count);
  for (std::size_t k = 0; k < v.grid.count; ++k) {
    Matrix x(m, m);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) x(r, c) = v.values(static_cast<Eigen::Index>(k), c * m + r);
    f.values.push_back(std::move(x));
  }
  return f;
}

}  // namespace detail

/// Time-domain Phi through the inverse LCT.
///
/// Phi_hat on the omega grid is carried to xi = 2*pi*B*omega, where the LCT of
/// Phi(t) exp(-iAt^2/(2B)) equals (2*pi*i*B)^(-1/2) exp(iD xi^2/(2B)) Phi_hat(xi/(2*pi*B)).
/// The inverse transform undoes this and the chirp is removed afterwards.
inline SampledMatrixFunction phi_time(const CascadeResult& phi, const LctParams& params,
                                      const Grid& time_grid) {
  require_grid(time_grid);
  if (!phi.converged) throw Error(ErrorCode::NonConverged, "scaling cascade not converged");
  const Grid& wg = phi.phi_hat.grid;
  require_grid(wg);
  const double b = params.B();
  const int m = phi.phi_hat.M();
  const std::size_t n = wg.count;

  // Ascending xi grid; reverse the samples when B < 0.
  Grid xg{2.0 * kPi * b * (b > 0 ? wg.start : wg.point(n - 1)), 2.0 * kPi * std::abs(b) * wg.step,
          n};
  SampledMatrixFunction F{xg, std::vector<Matrix>(n)};
  const cd amp = params.amplitude();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = b > 0 ? k : n - 1 - k;
    const double xi = xg.point(k);
    F.values[k] = amp * std::polar(1.0, params.D() * xi * xi / (2.0 * b)) * phi.phi_hat.values[src];
  }
  auto t = detail::unflatten(lct_inverse(detail::flatten(F), time_grid, params), m);
  for (std::size_t k = 0; k < time_grid.count; ++k) {
    const double tt = time_grid.point(k);
    t.values[k] *= std::polar(1.0, params.A() * tt * tt / (2.0 * b));
  }
  return t;
}

/// Cascade then LCT; raises NonConverged when the product does not settle.
inline SampledMatrixFunction phi_time(const VectorMask& mask, const LctParams& params,
                                      const Grid& time_grid, const Grid& omega_grid,
                                      int iterations = kDefaultIterations) {
  require_grid(time_grid);
  return phi_time(phi_hat_product(mask, omega_grid, iterations), params, time_grid);
}

/// Phi_hat recomputed from time samples through the forward LCT; the inverse
/// of the mapping used by phi_time.
inline SampledMatrixFunction phi_hat_from_time(const SampledMatrixFunction& phi,
                                               const LctParams& params, const Grid& omega_grid) {
  require_grid(omega_grid);
  const double b = params.B();
  const int m = phi.M();
  SampledMatrixFunction g = phi;
  for (std::size_t k = 0; k < g.grid.count; ++k) {
    const double tt = g.grid.point(k);
    g.values[k] *= std::polar(1.0, -params.A() * tt * tt / (2.0 * b));
  }
  const std::size_t n = omega_grid.count;
  Grid xg{2.0 * kPi * b * (b > 0 ? omega_grid.start : omega_grid.point(n - 1)),
          2.0 * kPi * std::abs(b) * omega_grid.step, n};
  auto F = detail::unflatten(lct_forward(detail::flatten(g), xg, params), m);
  SampledMatrixFunction out{omega_grid, std::vector<Matrix>(n)};
  const cd inv_amp = 1.0 / params.amplitude();
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = xg.point(k);
    const std::size_t dst = b > 0 ? k : n - 1 - k;
    out.values[dst] = inv_amp * std::polar(1.0, -params.D() * xi * xi / (2.0 * b)) * F.values[k];
  }
  return out;
}

/// Pointwise evaluation of Phi and Psi_ell by subdivision.
///
/// After n steps Phi_n(t) = sum_kappa C_kappa chi_T((2N)^n t - kappa), where T
/// is the union over even a < 2N of [a/N, (a+1)/N), C_0 = I initially and
/// C'_{kappa + (2N)^n lambda} += sqrt(2N) G_lambda C_kappa. The translates of
/// T tile the line, so every point sits in exactly one cell. Phi_n keeps
/// orthonormal translates at every step and equals Phi when Phi is itself
/// piecewise constant on the cells.
class RefinableEvaluator {
 public:
  RefinableEvaluator(const MaskBank& bank, int depth) : lat_(bank.lattice()), m_(bank.M()) {
    if (depth < 1) throw Error(ErrorCode::InvalidArgument, "subdivision depth must be >= 1");
    depth_ = depth;
    const VectorMask& g = bank.scaling;
    const double sq = std::sqrt(static_cast<double>(lat_.q()));
    Level lvl{0, {Matrix::Identity(m_, m_)}};
    std::int64_t scale = 1;
    Level prev;
    for (int s = 0; s < depth; ++s) {
      prev = lvl;
      lvl = refine(lvl, g, scale, sq);
      scale *= lat_.q();
    }
    phi_ = std::move(lvl);
    scale_ = scale;
    for (std::size_t l = 1; l < bank.size(); ++l)
      psi_.push_back(refine(prev, bank.filter(l), scale / lat_.q(), sq));
  }

  int depth() const { return depth_; }
  int M() const { return m_; }
  std::size_t wavelet_count() const { return psi_.size(); }

  Matrix phi(double t) const { return lookup(phi_, t); }
  Matrix psi(int ell, double t) const { return lookup(wavelet(ell), t); }

  /// Interval [lo, hi] containing the support of Phi_n (Psi_ell when ell >= 1),
  /// padded to whole tiles of the finest cells.
  std::pair<double, double> support(int ell = 0) const {
    const Level& lvl = ell == 0 ? phi_ : wavelet(ell);
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = lo;
    for (std::size_t i = 0; i < lvl.coeffs.size(); ++i) {
      if (lvl.coeffs[i].size() == 0 || lvl.coeffs[i].norm() == 0.0) continue;
      const auto ticks = lvl.origin + static_cast<std::int64_t>(i);
      if (lo == std::numeric_limits<std::int64_t>::max()) lo = ticks;
      hi = ticks;
    }
    if (lo == std::numeric_limits<std::int64_t>::max()) return {0.0, 0.0};
    const double s = static_cast<double>(scale_);
    return {lat_.to_double(lo) / s, (lat_.to_double(hi) + 2.0) / s};
  }

  SampledMatrixFunction sample(const Grid& grid, int ell = 0) const {
    require_grid(grid);
    SampledMatrixFunction out{grid, {}};
    out.values.reserve(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k)
      out.values.push_back(ell == 0 ? phi(grid.point(k)) : psi(ell, grid.point(k)));
    return out;
  }

 private:
  struct Level {
    std::int64_t origin = 0;     // ticks of coeffs[0]
    std::vector<Matrix> coeffs;  // empty Matrix marks an unused slot
  };

  const Level& wavelet(int ell) const {
    if (ell < 1 || ell > static_cast<int>(psi_.size()))
      throw Error(ErrorCode::EllOutOfRange, "ell must lie in 1.." + std::to_string(psi_.size()));
    return psi_[static_cast<std::size_t>(ell - 1)];
  }

  Level refine(const Level& in, const VectorMask& g, std::int64_t scale, double sq) const {
    if (g.empty()) return Level{0, {}};
    const std::int64_t gmin = g.coeffs().begin()->first, gmax = g.coeffs().rbegin()->first;
    const auto n_in = static_cast<std::int64_t>(in.coeffs.size());
    Level out;
    out.origin = in.origin + scale * gmin;
    const std::int64_t width = n_in + scale * (gmax - gmin);
    out.coeffs.assign(static_cast<std::size_t>(std::max<std::int64_t>(width, 0)), Matrix());
    for (std::int64_t i = 0; i < n_in; ++i) {
      const Matrix& c = in.coeffs[static_cast<std::size_t>(i)];
      if (c.size() == 0) continue;
      for (const auto& [lambda, gl] : g.coeffs()) {
        auto& slot = out.coeffs[static_cast<std::size_t>(i + scale * (lambda - gmin))];
        const Matrix add = sq * gl * c;
        if (slot.size() == 0)
          slot = add;
        else
          slot += add;
      }
    }
    return out;
  }

  Matrix lookup(const Level& lvl, double t) const {
    // Position in ticks, nudged so grid points on cell edges land right.
    const double x = t * static_cast<double>(scale_) * static_cast<double>(lat_.N());
    const std::int64_t cell = static_cast<std::int64_t>(std::floor(x + 1e-7));
    const std::int64_t q = lat_.q();
    const std::int64_t a = Lattice::mod(cell, q);
    const std::int64_t kappa =
        a % 2 == 0 ? cell - a : lat_.r() + q * Lattice::floor_div(cell - lat_.r(), q);
    const std::int64_t idx = kappa - lvl.origin;
    if (idx < 0 || idx >= static_cast<std::int64_t>(lvl.coeffs.size()) ||
        lvl.coeffs[static_cast<std::size_t>(idx)].size() == 0)
      return Matrix::Zero(m_, m_);
    return lvl.coeffs[static_cast<std::size_t>(idx)];
  }

  Lattice lat_;
  int m_;
  int depth_ = 0;
  std::int64_t scale_ = 1;
  Level phi_;
  std::vector<Level> psi_;
};

}  // namespace lctvnumra
