#pragma once

// Matrix refinement masks on the lattice {0, r/N} + 2Z, their symbols and
// the orthonormality certificates that can be checked on them.

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lctvnumra/error.hpp"
#include "lctvnumra/lattice.hpp"
#include "lctvnumra/lct.hpp"

namespace lctvnumra {

inline constexpr double kCoefficientTol = 1e-10;
inline constexpr double kGridFitTol = 1e-8;

enum class MaskRole { scaling, wavelet };

/// Finitely supported map lambda -> M x M complex matrix, keyed by lattice ticks.
class VectorMask {
 public:
  VectorMask(Lattice lattice, int M, MaskRole role = MaskRole::scaling)
      : lattice_(lattice), m_(M), role_(role) {
    if (M < 1) throw Error(ErrorCode::InvalidArgument, "channel count must be >= 1");
  }

  void set(std::int64_t ticks, Matrix coeff) {
    if (!lattice_.contains_ticks(ticks))
      throw Error(ErrorCode::LatticeMismatch,
                  "coefficient index off the lattice: " + lattice_.value_of(ticks).str());
    if (coeff.rows() != m_ || coeff.cols() != m_)
      throw Error(ErrorCode::ChannelMismatch, "coefficient must be M x M");
    coeffs_[ticks] = std::move(coeff);
  }
  void set(const LatticePoint& p, Matrix coeff) { set(lattice_.ticks_of(p), std::move(coeff)); }

  /// Coefficient at `ticks`, zero when unsupported.
  Matrix at(std::int64_t ticks) const {
    auto it = coeffs_.find(ticks);
    return it == coeffs_.end() ? Matrix::Zero(m_, m_) : it->second;
  }
  const Matrix* find(std::int64_t ticks) const {
    auto it = coeffs_.find(ticks);
    return it == coeffs_.end() ? nullptr : &it->second;
  }

  const std::map<std::int64_t, Matrix>& coeffs() const { return coeffs_; }
  const Lattice& lattice() const { return lattice_; }
  int M() const { return m_; }
  MaskRole role() const { return role_; }
  void set_role(MaskRole role) { role_ = role; }
  bool empty() const { return coeffs_.empty(); }

 private:
  Lattice lattice_;
  int m_;
  MaskRole role_;
  std::map<std::int64_t, Matrix> coeffs_;
};

/// Scaling mask H_0 = G followed by the 2N-1 wavelet masks.
struct MaskBank {
  VectorMask scaling;
  std::vector<VectorMask> wavelets;

  int M() const { return scaling.M(); }
  const Lattice& lattice() const { return scaling.lattice(); }
  /// H_k with H_0 the scaling mask.
  const VectorMask& filter(std::size_t k) const { return k == 0 ? scaling : wavelets.at(k - 1); }
  std::size_t size() const { return 1 + wavelets.size(); }
};

enum class Condition {
  TimeOrthogonality,
  FrequencyIdentity,
  FilterBank,
  LowerBound,
  Normalization,
  GramOrthonormality,
};

constexpr std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::TimeOrthogonality: return "TimeOrthogonality";
    case Condition::FrequencyIdentity: return "FrequencyIdentity";
    case Condition::FilterBank: return "FilterBank";
    case Condition::LowerBound: return "LowerBound";
    case Condition::Normalization: return "Normalization";
    case Condition::GramOrthonormality: return "GramOrthonormality";
  }
  return "Unknown";
}

struct CertificationReport {
  Condition condition;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Human-readable worst offender.
  std::string detail;

  static CertificationReport make(Condition c, double residual, double tol, std::string detail) {
    return CertificationReport{c, residual, tol, residual <= tol, std::move(detail)};
  }
};

/// Thrown when a certification gate fails; carries the failing report.
class CertificationError : public Error {
 public:
  explicit CertificationError(CertificationReport report)
      : Error(ErrorCode::CertificationFailed,
              std::string(to_string(report.condition)) + " residual " +
                  std::to_string(report.residual) + " > " + std::to_string(report.tolerance) +
                  " (" + report.detail + ")"),
        report_(std::move(report)) {}
  const CertificationReport& report() const { return report_; }

 private:
  CertificationReport report_;
};

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

/// (2N)^(-1/2) * sum_lambda G_lambda exp(-2*pi*i*lambda*omega).
inline Matrix eval_symbol(const VectorMask& mask, double omega) {
  const Lattice& lat = mask.lattice();
  Matrix acc = Matrix::Zero(mask.M(), mask.M());
  for (const auto& [ticks, g] : mask.coeffs())
    acc += g * std::polar(1.0, -2.0 * kPi * lat.to_double(ticks) * omega);
  return acc / std::sqrt(static_cast<double>(lat.q()));
}

struct SplitSymbol {
  Matrix even;  ///< 2Z-coset part, 1/2-periodic
  Matrix odd;   ///< (r/N + 2Z)-coset part with exp(-2*pi*i*(r/N)*omega) pulled out
};

/// eval_symbol(omega) = even + exp(-2*pi*i*(r/N)*omega) * odd.
inline SplitSymbol split_symbol(const VectorMask& mask, double omega) {
  const Lattice& lat = mask.lattice();
  SplitSymbol s{Matrix::Zero(mask.M(), mask.M()), Matrix::Zero(mask.M(), mask.M())};
  for (const auto& [ticks, g] : mask.coeffs()) {
    const bool zero_coset = Lattice::mod(ticks, lat.period_ticks()) == 0;
    const std::int64_t shifted = zero_coset ? ticks : ticks - lat.r();
    const cd e = std::polar(1.0, -2.0 * kPi * lat.to_double(shifted) * omega);
    (zero_coset ? s.even : s.odd) += g * e;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(lat.q()));
  s.even *= scale;
  s.odd *= scale;
  return s;
}

namespace detail {

// P(eta) = H1_k H1_l^* + H2_k H2_l^*, the 1/2-periodic coset Gram.
inline Matrix coset_gram(const SplitSymbol& a, const SplitSymbol& b) {
  return a.even * b.even.adjoint() + a.odd * b.odd.adjoint();
}

// Polyphase sums sum_{s=0}^{2N-1} zeta^{j s} P(omega + s/(4N)) for j = 0, +1, -1,
// zeta = exp(-i*pi*r/N). Orthonormality of the lattice translates is
// equivalent to these being delta*I, 0 and 0.
struct PolyphaseSums {
  Matrix plain;
  Matrix twisted_plus;
  Matrix twisted_minus;
};

inline PolyphaseSums polyphase_sums(const VectorMask& a, const VectorMask& b, double omega) {
  const Lattice& lat = a.lattice();
  const auto q = lat.q();
  const int m = a.M();
  PolyphaseSums out{Matrix::Zero(m, m), Matrix::Zero(m, m), Matrix::Zero(m, m)};
  for (std::int64_t s = 0; s < q; ++s) {
    const double eta = omega + static_cast<double>(s) / static_cast<double>(2 * q);
    const Matrix p = coset_gram(split_symbol(a, eta), split_symbol(b, eta));
    const double phase = -kPi * static_cast<double>(lat.r() * s) / static_cast<double>(lat.N());
    out.plain += p;
    out.twisted_plus += p * std::polar(1.0, phase);
    out.twisted_minus += p * std::polar(1.0, -phase);
  }
  return out;
}

inline double polyphase_residual(const PolyphaseSums& s, bool diagonal) {
  const auto m = s.plain.rows();
  const Matrix target = diagonal ? Matrix(Matrix::Identity(m, m)) : Matrix(Matrix::Zero(m, m));
  return std::max({(s.plain - target).norm(), s.twisted_plus.norm(), s.twisted_minus.norm()});
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Symbol normalisation G(0) = I.
inline CertificationReport check_normalization(const VectorMask& mask,
                                               double tol = kCoefficientTol) {
  const double r = (eval_symbol(mask, 0.0) - Matrix::Identity(mask.M(), mask.M())).norm();
  return CertificationReport::make(Condition::Normalization, r, tol, "||G(0) - I||_F");
}

using LatticePair = std::pair<Rational, Rational>;

/// R(l, l') = sum_m G_m G_{m + 2N(l - l')}^* - delta I over the whole support.
inline CertificationReport check_time_orthogonality(const VectorMask& mask,
                                                    const std::vector<LatticePair>& pairs,
                                                    double tol = kCoefficientTol) {
  const Lattice& lat = mask.lattice();
  const int m = mask.M();
  double worst = 0.0;
  std::string detail = "no pairs";
  for (const auto& [l1, l2] : pairs) {
    if (!lat.contains(l1) || !lat.contains(l2))
      throw Error(ErrorCode::ShiftNotOnLattice,
                  "pair (" + l1.str() + ", " + l2.str() + ") not drawn from the lattice");
    const std::int64_t shift = lat.q() * (lat.ticks_of(l1) - lat.ticks_of(l2));
    Matrix acc = Matrix::Zero(m, m);
    for (const auto& [ticks, g] : mask.coeffs()) {
      if (!lat.contains_ticks(ticks + shift))
        throw Error(ErrorCode::ShiftNotOnLattice, "shifted index leaves the lattice");
      if (const Matrix* h = mask.find(ticks + shift)) acc += g * h->adjoint();
    }
    if (l1 == l2) acc -= Matrix::Identity(m, m);
    const double r = acc.norm();
    if (r > worst || detail == "no pairs") {
      worst = std::max(worst, r);
      detail = "worst pair (" + l1.str() + ", " + l2.str() + ")";
    }
  }
  return CertificationReport::make(Condition::TimeOrthogonality, worst, tol, detail);
}

/// Pairs (lambda, 0) and (0, lambda) for every lambda whose 2N-shift can
/// overlap the mask support; together they cover every shift R depends on.
inline std::vector<LatticePair> default_time_pairs(const VectorMask& mask) {
  const Lattice& lat = mask.lattice();
  std::vector<LatticePair> pairs;
  std::int64_t span = 0;
  if (!mask.empty()) span = mask.coeffs().rbegin()->first - mask.coeffs().begin()->first;
  const std::int64_t kmax = span / (lat.q() * lat.period_ticks()) + 1;
  for (const auto& p : enumerate_lambda(lat, -kmax, kmax)) {
    if (std::abs(lat.q() * lat.ticks_of(p)) > span + lat.q() * lat.period_ticks()) continue;
    pairs.emplace_back(p.value, Rational(0));
    if (!(p.value == Rational(0))) pairs.emplace_back(Rational(0), p.value);
  }
  return pairs;
}

/// Frequency-domain orthonormality of the mask, evaluated on the coset split:
/// sum_s zeta^{js} P(omega + s/(4N)) = delta_{j0} I for j in {0, +1, -1}.
inline CertificationReport check_frequency_identity(const VectorMask& mask, const Grid& omega_grid,
                                                    double tol = kCoefficientTol) {
  require_grid(omega_grid);
  double worst = -1.0;
  double at = omega_grid.start;
  for (std::size_t k = 0; k < omega_grid.count; ++k) {
    const double w = omega_grid.point(k);
    const double r = detail::polyphase_residual(detail::polyphase_sums(mask, mask, w), true);
    if (r > worst) {
      worst = r;
      at = w;
    }
  }
  return CertificationReport::make(Condition::FrequencyIdentity, worst, tol,
                                   "worst omega " + detail::fmt(at));
}

/// Block orthonormality of the full bank H_0..H_{2N-1}.
inline CertificationReport check_filterbank(const MaskBank& bank, const Grid& omega_grid,
                                            double tol = kGridFitTol) {
  require_grid(omega_grid);
  const Lattice& lat = bank.lattice();
  if (bank.size() != static_cast<std::size_t>(lat.q()))
    throw Error(ErrorCode::BankSizeMismatch, "bank needs exactly 2N masks, got " +
                                                  std::to_string(bank.size()));
  for (const auto& w : bank.wavelets) {
    if (w.M() != bank.M()) throw Error(ErrorCode::ChannelMismatch, "wavelet channel count");
    if (!(w.lattice() == lat)) throw Error(ErrorCode::LatticeMismatch, "wavelet lattice");
  }
  double worst = -1.0;
  std::string where;
  for (std::size_t i = 0; i < omega_grid.count; ++i) {
    const double w = omega_grid.point(i);
    for (std::size_t k = 0; k < bank.size(); ++k) {
      for (std::size_t l = k; l < bank.size(); ++l) {
        const double r = detail::polyphase_residual(
            detail::polyphase_sums(bank.filter(k), bank.filter(l), w), k == l);
        if (r > worst) {
          worst = r;
          where = "worst (k=" + std::to_string(k) + ", l=" + std::to_string(l) +
                  ", omega=" + detail::fmt(w) + ")";
        }
      }
    }
  }
  return CertificationReport::make(Condition::FilterBank, worst, tol, where);
}

/// Smallest singular value of G(omega / (2N)^k) >= C on [E_lo, E_hi], 1 <= k <= k_max.
inline CertificationReport check_lower_bound(const VectorMask& mask, double E_lo, double E_hi,
                                             int k_max, double C, int samples) {
  if (!(E_lo < 0.0 && 0.0 < E_hi)) throw Error(ErrorCode::BadInterval, "0 must be interior to E");
  if (!(C > 0.0) || k_max < 1 || samples < 2)
    throw Error(ErrorCode::InvalidArgument, "need C > 0, k_max >= 1, samples >= 2");
  const double q = static_cast<double>(mask.lattice().q());
  double smallest = std::numeric_limits<double>::infinity();
  std::string where;
  for (int i = 0; i < samples; ++i) {
    const double w = E_lo + (E_hi - E_lo) * static_cast<double>(i) / (samples - 1);
    double scale = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      scale /= q;
      const Matrix g = eval_symbol(mask, w * scale);
      const double sv = Eigen::JacobiSVD<Matrix>(g).singularValues().minCoeff();
      if (sv < smallest) {
        smallest = sv;
        where = "min singular value " + detail::fmt(sv) + " at omega=" + detail::fmt(w) +
                ", k=" + std::to_string(k);
      }
    }
  }
  return CertificationReport::make(Condition::LowerBound, std::max(0.0, C - smallest), 0.0, where);
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

/// Indicator-type scaling mask for r = 1: coefficients (2N)^(-1/2) I at
/// lambda in {4j, 1/N + 4j : 0 <= j < N}. It refines the indicator of
/// T = union over even a of [a/N, (a+1)/N), whose lattice translates tile R.
inline VectorMask haar_type_mask(const Lattice& lat, int M) {
  if (lat.r() != 1)
    throw Error(ErrorCode::InvalidArgument, "indicator-type mask exists only for r = 1");
  VectorMask g(lat, M, MaskRole::scaling);
  const Matrix c = Matrix::Identity(M, M) / std::sqrt(static_cast<double>(lat.q()));
  const std::int64_t n = lat.N();
  for (std::int64_t j = 0; j < n; ++j) {
    g.set(4 * j * n, c);
    g.set(1 + 4 * j * n, c);
  }
  return g;
}

namespace detail {

// Positions P, one per residue class, such that P and P + 2r tile the
// lattice modulo 4N. Empty when the support does not fit one such pattern.
inline std::optional<std::vector<std::int64_t>> single_cell_pattern(const VectorMask& g) {
  const Lattice& lat = g.lattice();
  const std::int64_t n = lat.N(), q = lat.q(), r = lat.r();
  const std::int64_t cell = 2 * q * n;  // 4N in value units
  // Along x -> x + 2r each coset becomes one 2N-cycle; a valid pattern takes
  // every other element of each cycle. Cycle position of residue a is a * r^-1.
  std::int64_t rinv = 1;
  while ((rinv * r) % q != 1) ++rinv;
  std::optional<int> parity[2];
  std::map<int, std::int64_t> base_offset;  // cell offset used for fill positions
  std::set<std::int64_t> residues;
  for (const auto& [ticks, m] : g.coeffs()) {
    const std::int64_t res = Lattice::mod(ticks, cell);
    if (!residues.insert(res).second) return std::nullopt;
    const int coset = Lattice::mod(ticks, q) == 0 ? 0 : 1;
    const std::int64_t a = (res - (coset == 0 ? 0 : r)) / q;  // index in Z_{2N}
    const int par = static_cast<int>(Lattice::mod(a * rinv, q) % 2);
    if (parity[coset] && *parity[coset] != par) return std::nullopt;
    parity[coset] = par;
  }
  const std::int64_t origin =
      g.empty() ? 0 : Lattice::floor_div(g.coeffs().begin()->first, cell) * cell;
  std::map<std::int64_t, std::int64_t> by_residue;
  for (const auto& [ticks, m] : g.coeffs()) by_residue[Lattice::mod(ticks, cell)] = ticks;
  std::vector<std::int64_t> pattern;
  for (int coset = 0; coset < 2; ++coset) {
    const int par = parity[coset].value_or(0);
    for (std::int64_t a = 0; a < q; ++a) {
      if (Lattice::mod(a * rinv, q) % 2 != par) continue;
      const std::int64_t res = (coset == 0 ? 0 : r) + q * a;
      auto it = by_residue.find(res);
      pattern.push_back(it != by_residue.end() ? it->second : origin + res);
    }
  }
  std::sort(pattern.begin(), pattern.end());
  return pattern;
}

inline bool all_diagonal(const VectorMask& g) {
  for (const auto& [t, m] : g.coeffs()) {
    Matrix off = m;
    off.diagonal().setZero();
    if (off.norm() != 0.0) return false;
  }
  return true;
}

}  // namespace detail

/// Wavelet masks H_1..H_{2N-1} completing G to an orthonormal filter bank.
///
/// When the support of G fits a single tiling pattern P (P and P + 2r cover
/// the lattice modulo 4N exactly once) the bank is block-diagonal: the rows
/// of G over P are completed to a unitary 2NM x 2NM matrix by Householder QR
/// with column pivoting, and the complement rows become the wavelet masks on
/// the same positions. For N = 1 with channel-decoupled (diagonal)
/// coefficients the alternating flip is used. Anything else, or a completed
/// bank failing the filter-bank check on `omega_grid`, is CompletionFailed.
inline MaskBank complete_wavelet_masks(const VectorMask& G, const Grid& omega_grid,
                                       double tol = kGridFitTol) {
  const auto pre = check_frequency_identity(G, omega_grid, kCoefficientTol);
  if (!pre.pass) throw CertificationError(pre);
  const Lattice& lat = G.lattice();
  const int m = G.M();
  const auto q = static_cast<int>(lat.q());
  MaskBank bank{G, {}};
  bank.scaling.set_role(MaskRole::scaling);

  if (auto pattern = detail::single_cell_pattern(G)) {
    const auto& P = *pattern;
    const Eigen::Index width = static_cast<Eigen::Index>(P.size()) * m;
    Matrix rows(m, width);
    for (std::size_t p = 0; p < P.size(); ++p)
      rows.middleCols(static_cast<Eigen::Index>(p) * m, m) = G.at(P[p]);
    Eigen::ColPivHouseholderQR<Matrix> qr(rows.adjoint());
    const Matrix Q = qr.householderQ();
    const Matrix complement = Q.rightCols(width - m).adjoint();
    for (int l = 1; l < q; ++l) {
      VectorMask h(lat, m, MaskRole::wavelet);
      for (std::size_t p = 0; p < P.size(); ++p)
        h.set(P[p], complement.block((l - 1) * m, static_cast<Eigen::Index>(p) * m, m, m));
      bank.wavelets.push_back(std::move(h));
    }
  } else if (q == 2 && detail::all_diagonal(G) && !G.empty()) {
    // H_k = (-1)^k conj(G_{L-k}) with L odd, per channel.
    std::int64_t L = G.coeffs().begin()->first + G.coeffs().rbegin()->first;
    if (L % 2 == 0) L += 1;
    VectorMask h(lat, m, MaskRole::wavelet);
    for (const auto& [k, g] : G.coeffs()) {
      const std::int64_t idx = L - k;
      const double sign = Lattice::mod(idx, 2) == 0 ? 1.0 : -1.0;
      h.set(idx, sign * g.conjugate());
    }
    bank.wavelets.push_back(std::move(h));
  } else {
    throw Error(ErrorCode::CompletionFailed,
                "mask support admits no finite completion by the available constructions; "
                "enlarge or restructure the support");
  }

  const auto rep = check_filterbank(bank, omega_grid, tol);
  if (!rep.pass)
    throw Error(ErrorCode::CompletionFailed,
                "completed bank residual " + detail::fmt(rep.residual) + " exceeds tolerance");
  return bank;
}

}  // namespace lctvnumra
