#pragma once

// Certified systems and the multilevel analysis / synthesis transform.
//
// A level-j atom is (2N)^(j/2) F((2N)^j t - kappa) chirp(t, kappa) with F = Phi
// or Psi_ell. Fine-level coefficients come from quadrature on the sampling
// grid; coarser levels follow from the mask recursion
//   atom_{j-1, mu} = sum_lambda G_lambda chirp_ratio(mu, kappa) atom_{j, kappa},
//   kappa = lambda + 2N mu,
// which keeps every level in exact lattice bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "lctvnumra/cascade.hpp"
#include "lctvnumra/error.hpp"
#include "lctvnumra/lattice.hpp"
#include "lctvnumra/lct.hpp"
#include "lctvnumra/mask.hpp"

namespace lctvnumra {

struct SystemSettings {
  Grid time_grid{0.0, 1.0 / 64.0, 4096};
  Grid omega_grid{-8.0, 16.0 / 4096.0, 4096};
  Grid bank_grid{0.0, 1.0 / 1024.0, 1024};
  int iterations = kDefaultIterations;
  double convergence_tol = kConvergenceTol;
  /// Level j0 of the finest atoms used by analyze/synthesize.
  int fine_level = 0;
  /// Subdivision depth; 0 picks the depth matching the grid step.
  int depth = 0;
  int gram_translates = 8;
  double gram_tol = 1e-3;
  double bank_tol = kGridFitTol;
  /// Symbol lower bound on [lb_lo, lb_hi] over k = 1..lb_kmax.
  double lb_lo = -0.25, lb_hi = 0.25, lb_C = 0.1;
  int lb_kmax = 12, lb_samples = 1025;
};

struct VnumraSystem {
  LctParams params;
  Lattice lattice;
  MaskBank bank;
  SystemSettings settings;
  CascadeResult phi;
  std::shared_ptr<const RefinableEvaluator> evaluator;
  /// Phi and Psi_ell on settings.time_grid.
  SampledMatrixFunction phi_samples;
  std::vector<SampledMatrixFunction> psi_samples;
  std::vector<CertificationReport> reports;
  /// Frobenius deviation of the level-0 Gram from identity, and its translates.
  double gram_deviation = 0.0;
  std::vector<Rational> gram_lambdas;

  int M() const { return bank.M(); }
  std::int64_t q() const { return lattice.q(); }
};

using Band = std::map<std::int64_t, Vector>;

struct CoefficientPyramid {
  int levels = 0;
  int fine_level = 0;
  int M = 0;
  std::int64_t N = 1;
  std::int64_t r = 1;
  Grid grid;
  /// Scaling coefficients at level fine_level - levels, keyed by lattice ticks.
  Band approx;
  /// details[i][ell - 1] at level fine_level - 1 - i.
  std::vector<std::vector<Band>> details;

  double energy() const {
    double e = 0.0;
    for (const auto& [k, v] : approx) e += v.squaredNorm();
    for (const auto& lvl : details)
      for (const auto& band : lvl)
        for (const auto& [k, v] : band) e += v.squaredNorm();
    return e;
  }
};

namespace detail {


inline double dpow(double b, int e) { return std::pow(b, static_cast<double>(e)); }

// Depth whose cells (1 / (N (2N)^(depth + j0))) match the grid step.
inline int auto_depth(const Lattice& lat, double step, int fine_level) {
  const double target = std::log(1.0 / (static_cast<double>(lat.N()) * step)) /
                        std::log(static_cast<double>(lat.q()));
  const double rounded = std::round(target);
  const double d = (std::abs(target - rounded) < 1e-9 ? rounded : std::ceil(target)) - fine_level;
  return std::clamp(static_cast<int>(d), 1, 40);
}

// F(t - lambda) from samples when the shift is a whole number of steps,
// else from the evaluator.
inline Matrix shifted_sample(const VnumraSystem& sys, int ell, std::size_t k, double lambda) {
  const Grid& g = sys.settings.time_grid;
  const double s = lambda / g.step;
  const double si = std::round(s);
  if (std::abs(s - si) < 1e-9) {
    const auto idx = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(si);
    if (idx < 0 || idx >= static_cast<std::int64_t>(g.count)) return Matrix::Zero(sys.M(), sys.M());
    const auto& src = ell == 0 ? sys.phi_samples : sys.psi_samples.at(ell - 1);
    return src.values[static_cast<std::size_t>(idx)];
  }
  const double t = g.point(k) - lambda;
  return ell == 0 ? sys.evaluator->phi(t) : sys.evaluator->psi(ell, t);
}

}  // namespace detail

/// Gram blocks <F(. - l) chirp(., l), F(. - s) chirp(., s)> by rectangle-rule
/// quadrature on the cached samples; `ell` = 0 selects Phi.
inline Matrix gram_matrix(const VnumraSystem& sys, const std::vector<Rational>& lambdas,
                          int ell = 0) {
  if (ell < 0 || ell > static_cast<int>(sys.psi_samples.size()))
    throw Error(ErrorCode::EllOutOfRange, "wavelet index out of range");
  for (const auto& l : lambdas)
    if (!sys.lattice.contains(l))
      throw Error(ErrorCode::LatticeMismatch, "translate " + l.str() + " not in the lattice");
  const int m = sys.M();
  const auto n = static_cast<Eigen::Index>(lambdas.size());
  const Grid& g = sys.settings.time_grid;
  Matrix gram = Matrix::Zero(n * m, n * m);
  std::vector<std::vector<Matrix>> atoms(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    atoms[i].reserve(g.count);
    for (std::size_t k = 0; k < g.count; ++k)
      atoms[i].push_back(detail::shifted_sample(sys, ell, k, lambdas[i].to_double()) *
                         chirp_factor(g.point(k), lambdas[i], sys.params));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Matrix acc = Matrix::Zero(m, m);
      for (std::size_t k = 0; k < g.count; ++k)
        acc += atoms[static_cast<std::size_t>(i)][k] * atoms[static_cast<std::size_t>(j)][k].adjoint();
      gram.block(i * m, j * m, m, m) = acc * g.step;
    }
  return gram;
}

/// Up to `count` ascending lattice translates whose Phi support fits the window.
inline std::vector<Rational> window_translates(const VnumraSystem& sys, int count) {
  const auto [lo, hi] = sys.evaluator->support();
  const Grid& g = sys.settings.time_grid;
  const Lattice& lat = sys.lattice;
  std::vector<Rational> out;
  const auto first = static_cast<std::int64_t>(std::ceil((g.start - lo) * lat.N() - 1e-9));
  for (std::int64_t t = first; static_cast<int>(out.size()) < count; ++t) {
    if (!lat.contains_ticks(t)) continue;
    const double v = lat.to_double(t);
    if (v + hi > g.end() + 1e-12) break;
    out.push_back(lat.value_of(t));
  }
  return out;
}

/// Certify the bank, run the cascade, cache Phi and Psi_ell on the time grid
/// and verify the Gram matrix of level-0 translates.
inline VnumraSystem build_system(const LctParams& params, const MaskBank& bank,
                                 const SystemSettings& settings = {}) {
  require_grid(settings.time_grid);
  const Lattice& lat = bank.lattice();
  std::vector<CertificationReport> reports;

  const auto norm = check_normalization(bank.scaling);
  reports.push_back(norm);
  if (!norm.pass) throw CertificationError(norm);
  const auto fb = check_filterbank(bank, settings.bank_grid, settings.bank_tol);
  reports.push_back(fb);
  if (!fb.pass) throw CertificationError(fb);

  // Subdivision keeps translates orthonormal at every finite depth, so the
  // Gram check below cannot see a degenerate limit; the symbol bound can.
  const auto lb = check_lower_bound(bank.scaling, settings.lb_lo, settings.lb_hi, settings.lb_kmax,
                                    settings.lb_C, settings.lb_samples);
  reports.push_back(lb);
  if (!lb.pass) throw CertificationError(lb);

  auto phi = phi_hat_product(bank.scaling, settings.omega_grid, settings.iterations,
                             settings.convergence_tol);
  const int depth = settings.depth > 0
                        ? settings.depth
                        : detail::auto_depth(lat, settings.time_grid.step, settings.fine_level);
  auto ev = std::make_shared<const RefinableEvaluator>(bank, depth);

  VnumraSystem sys{params, lat, bank, settings, std::move(phi), ev, {}, {}, {}, 0.0, {}};
  sys.phi_samples = ev->sample(settings.time_grid);
  for (std::size_t l = 1; l < bank.size(); ++l)
    sys.psi_samples.push_back(ev->sample(settings.time_grid, static_cast<int>(l)));

  sys.gram_lambdas = window_translates(sys, settings.gram_translates);
  if (sys.gram_lambdas.empty())
    throw Error(ErrorCode::SupportOverflow, "time window too short to hold one translate of Phi");
  const Matrix gram = gram_matrix(sys, sys.gram_lambdas);
  sys.gram_deviation = (gram - Matrix::Identity(gram.rows(), gram.cols())).norm();
  auto rep = CertificationReport::make(Condition::GramOrthonormality, sys.gram_deviation,
                                       settings.gram_tol,
                                       std::to_string(sys.gram_lambdas.size()) + " translates");
  reports.push_back(rep);
  sys.reports = std::move(reports);
  if (!rep.pass) throw CertificationError(rep);
  return sys;
}

// ---------------------------------------------------------------------------
// Atoms and fine-level projection
// ---------------------------------------------------------------------------

/// Samples of the level-j atom of F (ell = 0: Phi) at lattice ticks `kappa`.
inline std::vector<Matrix> atom(const VnumraSystem& sys, int level, int ell, std::int64_t kappa) {
  const Grid& g = sys.settings.time_grid;
  const double scale = detail::dpow(static_cast<double>(sys.q()), level);
  const double amp = std::sqrt(scale);
  const double kv = sys.lattice.to_double(kappa);
  const Rational kr = sys.lattice.value_of(kappa);
  std::vector<Matrix> out;
  out.reserve(g.count);
  for (std::size_t k = 0; k < g.count; ++k) {
    const double t = g.point(k);
    const double x = scale * t - kv;
    Matrix v = ell == 0 ? sys.evaluator->phi(x) : sys.evaluator->psi(ell, x);
    out.push_back(v * (amp * chirp_factor(t, kr, sys.params)));
  }
  return out;
}

namespace detail {

struct FineIndex {
  std::vector<std::int64_t> ticks;
  double lo = 0.0, hi = 0.0;  // Phi support hull
};

inline FineIndex fine_index(const VnumraSystem& sys) {
  const auto [lo, hi] = sys.evaluator->support();
  const Grid& g = sys.settings.time_grid;
  const double scale = dpow(static_cast<double>(sys.q()), sys.settings.fine_level);
  const auto n = static_cast<double>(sys.lattice.N());
  // Atom support [(kappa + lo)/scale, (kappa + hi)/scale] must meet [start, end).
  const auto first = static_cast<std::int64_t>(std::floor((scale * g.start - hi) * n)) - 1;
  const auto last = static_cast<std::int64_t>(std::ceil((scale * g.end() - lo) * n)) + 1;
  FineIndex idx{{}, lo, hi};
  for (std::int64_t t = first; t <= last; ++t) {
    if (!sys.lattice.contains_ticks(t)) continue;
    const double v = sys.lattice.to_double(t);
    if ((v + hi) / scale <= g.start || (v + lo) / scale >= g.end()) continue;
    idx.ticks.push_back(t);
  }
  return idx;
}

// Sample index range covering the atom support.
inline std::pair<std::size_t, std::size_t> sample_range(const Grid& g, double a, double b) {
  const double i0 = std::floor((a - g.start) / g.step) - 1;
  const double i1 = std::ceil((b - g.start) / g.step) + 1;
  const auto lo = static_cast<std::size_t>(std::clamp(i0, 0.0, static_cast<double>(g.count)));
  const auto hi = static_cast<std::size_t>(std::clamp(i1, 0.0, static_cast<double>(g.count)));
  return {lo, hi};
}

inline void require_channels(const VnumraSystem& sys, const SampledVectorFunction& f) {
  if (f.channels() != sys.M())
    throw Error(ErrorCode::ChannelMismatch, "signal has " + std::to_string(f.channels()) +
                                                " channels, system has " + std::to_string(sys.M()));
  if (!(f.grid == sys.settings.time_grid))
    throw Error(ErrorCode::SupportOverflow, "signal grid differs from the system sampling grid");
}

}  // namespace detail

/// Fine-level translates whose atom support lies inside the sampling window.
inline std::vector<std::int64_t> interior_atoms(const VnumraSystem& sys) {
  const auto idx = detail::fine_index(sys);
  const Grid& g = sys.settings.time_grid;
  const double scale = detail::dpow(static_cast<double>(sys.q()), sys.settings.fine_level);
  std::vector<std::int64_t> out;
  for (const auto kappa : idx.ticks) {
    const double v = sys.lattice.to_double(kappa);
    if ((v + idx.lo) / scale >= g.start - 1e-12 && (v + idx.hi) / scale <= g.end() + 1e-12)
      out.push_back(kappa);
  }
  return out;
}

/// Fine-level coefficients c_kappa = sum_t conj(atom(t)) f(t) step.
inline Band project(const VnumraSystem& sys, const SampledVectorFunction& f) {
  detail::require_channels(sys, f);
  const auto idx = detail::fine_index(sys);
  const Grid& g = f.grid;
  const int j0 = sys.settings.fine_level;
  const double scale = detail::dpow(static_cast<double>(sys.q()), j0);
  const double amp = std::sqrt(scale);
  const int m = sys.M();
  Band out;
  for (const auto kappa : idx.ticks) {
    const double kv = sys.lattice.to_double(kappa);
    const Rational kr = sys.lattice.value_of(kappa);
    const auto [a, b] = detail::sample_range(g, (kv + idx.lo) / scale, (kv + idx.hi) / scale);
    Vector c = Vector::Zero(m);
    for (std::size_t k = a; k < b; ++k) {
      const double t = g.point(k);
      const Matrix at = sys.evaluator->phi(scale * t - kv) * (amp * chirp_factor(t, kr, sys.params));
      c += at.conjugate() * f.values.row(static_cast<Eigen::Index>(k)).transpose();
    }
    out[kappa] = c * g.step;
  }
  return out;
}

/// f(t) = sum_kappa atom_kappa(t)^T c_kappa on the system grid.
inline SampledVectorFunction expand(const VnumraSystem& sys, const Band& coeffs) {
  const Grid& g = sys.settings.time_grid;
  const int j0 = sys.settings.fine_level;
  const double scale = detail::dpow(static_cast<double>(sys.q()), j0);
  const double amp = std::sqrt(scale);
  const auto [lo, hi] = sys.evaluator->support();
  SampledVectorFunction f(g, sys.M());
  for (const auto& [kappa, c] : coeffs) {
    if (c.squaredNorm() == 0.0) continue;
    const double kv = sys.lattice.to_double(kappa);
    const Rational kr = sys.lattice.value_of(kappa);
    const auto [a, b] = detail::sample_range(g, (kv + lo) / scale, (kv + hi) / scale);
    for (std::size_t k = a; k < b; ++k) {
      const double t = g.point(k);
      const Matrix at = sys.evaluator->phi(scale * t - kv) * (amp * chirp_factor(t, kr, sys.params));
      f.values.row(static_cast<Eigen::Index>(k)) += (at.transpose() * c).transpose();
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Filter recursion
// ---------------------------------------------------------------------------

namespace detail {

// One analysis step: c^{j-1}_mu = sum_lambda conj(H_lambda ph(mu, kappa)) c^j_kappa.
inline Band analysis_step(const VnumraSystem& sys, const VectorMask& h, const Band& fine) {
  const Lattice& lat = sys.lattice;
  const std::int64_t q = lat.q();
  Band out;
  for (const auto& [kappa, c] : fine) {
    for (const auto& [lambda, hl] : h.coeffs()) {
      const std::int64_t diff = kappa - lambda;
      if (Lattice::mod(diff, q) != 0) continue;
      const std::int64_t mu = diff / q;
      if (!lat.contains_ticks(mu)) continue;
      const cd ph = chirp_ratio(lat.value_of(mu), lat.value_of(kappa), sys.params);
      Vector add = (hl * ph).conjugate() * c;
      auto it = out.find(mu);
      if (it == out.end())
        out.emplace(mu, std::move(add));
      else
        it->second += add;
    }
  }
  return out;
}

// Adjoint step: c^j_kappa += (H_lambda ph(mu, kappa))^T c^{j-1}_mu.
inline void synthesis_step(const VnumraSystem& sys, const VectorMask& h, const Band& coarse,
                           Band& fine) {
  const Lattice& lat = sys.lattice;
  const std::int64_t q = lat.q();
  for (const auto& [mu, c] : coarse) {
    for (const auto& [lambda, hl] : h.coeffs()) {
      const std::int64_t kappa = lambda + q * mu;
      const cd ph = chirp_ratio(lat.value_of(mu), lat.value_of(kappa), sys.params);
      Vector add = (hl * ph).transpose() * c;
      auto it = fine.find(kappa);
      if (it == fine.end())
        fine.emplace(kappa, std::move(add));
      else
        it->second += add;
    }
  }
}

inline void require_levels(const VnumraSystem& sys, int levels) {
  if (levels < 1) throw Error(ErrorCode::InvalidArgument, "levels must be >= 1");
  const auto [lo, hi] = sys.evaluator->support();
  const Grid& g = sys.settings.time_grid;
  const double coarse = (hi - lo) *
                        dpow(static_cast<double>(sys.q()), levels - sys.settings.fine_level);
  if (coarse > g.end() - g.start + 1e-12)
    throw Error(ErrorCode::SupportOverflow,
                "coarsest atom support " + fmt(coarse) + " exceeds the window length " +
                    fmt(g.end() - g.start) + "; lower the level count or raise fine_level");
}

}  // namespace detail

/// Coefficients of a fine-level coefficient set after `levels` analysis steps.
inline CoefficientPyramid analyze_coefficients(const VnumraSystem& sys, Band fine, int levels) {
  detail::require_levels(sys, levels);
  CoefficientPyramid p;
  p.levels = levels;
  p.fine_level = sys.settings.fine_level;
  p.M = sys.M();
  p.N = sys.lattice.N();
  p.r = sys.lattice.r();
  p.grid = sys.settings.time_grid;
  Band cur = std::move(fine);
  for (int i = 0; i < levels; ++i) {
    std::vector<Band> bands;
    for (std::size_t l = 1; l < sys.bank.size(); ++l)
      bands.push_back(detail::analysis_step(sys, sys.bank.filter(l), cur));
    p.details.push_back(std::move(bands));
    cur = detail::analysis_step(sys, sys.bank.scaling, cur);
  }
  p.approx = std::move(cur);
  return p;
}

inline CoefficientPyramid analyze(const VnumraSystem& sys, const SampledVectorFunction& signal,
                                  int levels) {
  detail::require_channels(sys, signal);
  detail::require_levels(sys, levels);
  return analyze_coefficients(sys, project(sys, signal), levels);
}

/// Inverse of analyze_coefficients.
inline Band synthesize_coefficients(const VnumraSystem& sys, const CoefficientPyramid& p) {
  if (p.M != sys.M() || p.N != sys.lattice.N() || p.r != sys.lattice.r() ||
      p.fine_level != sys.settings.fine_level || !(p.grid == sys.settings.time_grid) ||
      static_cast<int>(p.details.size()) != p.levels)
    throw Error(ErrorCode::IncompatiblePyramid, "pyramid does not match the system");
  for (const auto& lvl : p.details)
    if (lvl.size() != sys.bank.size() - 1)
      throw Error(ErrorCode::IncompatiblePyramid, "pyramid band count does not match the bank");
  Band cur = p.approx;
  for (int i = p.levels - 1; i >= 0; --i) {
    Band fine;
    detail::synthesis_step(sys, sys.bank.scaling, cur, fine);
    for (std::size_t l = 1; l < sys.bank.size(); ++l)
      detail::synthesis_step(sys, sys.bank.filter(l), p.details[static_cast<std::size_t>(i)][l - 1],
                             fine);
    cur = std::move(fine);
  }
  return cur;
}

inline SampledVectorFunction synthesize(const VnumraSystem& sys, const CoefficientPyramid& p) {
  return expand(sys, synthesize_coefficients(sys, p));
}

/// Pair of relative round-trip error and energy ratio ||pyramid||^2 / ||f||^2.
struct RoundTrip {
  double relative_error = 0.0;
  double parseval_ratio = 0.0;
};

inline RoundTrip round_trip(const VnumraSystem& sys, const SampledVectorFunction& f, int levels) {
  const auto p = analyze(sys, f, levels);
  const auto back = synthesize(sys, p);
  const double nf = f.norm();
  RoundTrip rt;
  rt.relative_error = nf == 0.0 ? (back.values.norm()) : (back.values - f.values).norm() * std::sqrt(f.grid.step) / nf;
  rt.parseval_ratio = nf == 0.0 ? 1.0 : p.energy() / (nf * nf);
  return rt;
}

}  // namespace lctvnumra
