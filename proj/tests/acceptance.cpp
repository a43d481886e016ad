// Acceptance run: one PASS/FAIL line per criterion, tolerances and time
// limits fixed below. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace fs = std::filesystem;
using namespace lctvnumra;

namespace {

struct Outcome {
  bool pass = true;
  std::string note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!note.empty()) note += "; ";
      note += what;
    }
  }
};

std::string sci(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", x);
  return b;
}

int failures = 0;

void criterion(int id, const std::string& title, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.note = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > time_limit) o.require(false, "runtime " + sci(secs) + " s over " + sci(time_limit) + " s");
  if (!o.pass) ++failures;
  std::printf("[%s] #%d %s (%.2f s / %.0f s) %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), secs,
              time_limit, o.note.c_str());
  std::fflush(stdout);
}

// --- 1 --------------------------------------------------------------------

Outcome lattice_law() {
  Outcome o;
  int accepted = 0;
  for (std::int64_t n = 1; n <= 12; ++n)
    for (std::int64_t r = -3 * n - 2; r <= 3 * n + 2; ++r) {
      const bool expect = (r % 2 != 0) && r >= 1 && r <= 2 * n - 1 && std::gcd(r, n) == 1;
      bool got = true;
      try {
        (void)validate_lattice(n, r);
      } catch (const Error&) {
        got = false;
      }
      accepted += got;
      if (got != expect) o.require(false, "N=" + std::to_string(n) + " r=" + std::to_string(r));
    }
  for (std::int64_t n = -2; n <= 0; ++n) {
    try {
      (void)validate_lattice(n, 1);
      o.require(false, "accepted N=" + std::to_string(n));
    } catch (const Error& e) {
      o.require(e.code() == ErrorCode::NonPositiveN, "wrong code for N <= 0");
    }
  }
  o.note = o.pass ? std::to_string(accepted) + " admissible pairs" : o.note;
  return o;
}

// --- 2 --------------------------------------------------------------------

Outcome time_frequency_agreement() {
  Outcome o;
  const auto grid = corpus::omega_grid(1024);
  const auto masks = corpus::orthonormality_corpus();
  double worst_pass = 0.0, least_fail = 1e300;
  for (const auto& e : masks) {
    const auto t = check_time_orthogonality(e.mask, default_time_pairs(e.mask), 1e-10);
    const auto f = check_frequency_identity(e.mask, grid, 1e-10);
    o.require(t.pass == f.pass, e.name + ": checks disagree");
    o.require(t.pass == e.orthonormal, e.name + ": unexpected verdict");
    if (t.pass) {
      worst_pass = std::max({worst_pass, t.residual, f.residual});
    } else {
      least_fail = std::min({least_fail, t.residual, f.residual});
      o.require(t.residual > 1e-3 && f.residual > 1e-3, e.name + ": failing residual <= 1e-3");
    }
  }
  o.require(masks.size() >= 10, "corpus smaller than 10");
  o.require(worst_pass < 1e-10, "passing residual " + sci(worst_pass));
  if (o.pass)
    o.note = std::to_string(masks.size()) + " masks, max passing " + sci(worst_pass) +
             ", min failing " + sci(least_fail);
  return o;
}

// --- 3 --------------------------------------------------------------------

MaskBank explicit_haar_bank() {
  auto g = corpus::haar();
  VectorMask h(g.lattice(), 1, MaskRole::wavelet);
  h.set(0, corpus::scalar(1.0 / std::sqrt(2.0)));
  h.set(1, corpus::scalar(-1.0 / std::sqrt(2.0)));
  return MaskBank{g, {h}};
}

Outcome filterbank_certification() {
  Outcome o;
  const auto grid = make_grid(0.0, 1.0, 1024);
  double worst = check_filterbank(explicit_haar_bank(), grid).residual;
  o.require(worst < 1e-8, "Haar bank residual " + sci(worst));
  int banks = 1;
  for (const auto& e : corpus::completion_corpus()) {
    const auto bank = complete_wavelet_masks(e.mask, grid);
    const double r = check_filterbank(bank, grid).residual;
    o.require(r < 1e-8, e.name + " residual " + sci(r));
    worst = std::max(worst, r);
    ++banks;
  }
  auto dup = explicit_haar_bank();
  dup.wavelets[0] = dup.scaling;
  const double rd = check_filterbank(dup, grid).residual;
  o.require(rd >= 0.5, "duplicated bank residual " + sci(rd));
  if (o.pass)
    o.note = std::to_string(banks) + " banks, max " + sci(worst) + "; duplicated " + sci(rd);
  return o;
}

// --- 4 --------------------------------------------------------------------

Outcome cascade_fidelity() {
  Outcome o;
  const Grid grid = make_grid(-8.0, 8.0, 4096);
  const auto res = phi_hat_product(corpus::haar(), grid, 24);
  double err = 0.0;
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double w = grid.point(k);
    const cd exact = w == 0.0 ? cd(1.0) : std::polar(1.0, -kPi * w) * std::sin(kPi * w) / (kPi * w);
    err = std::max(err, std::abs(res.phi_hat[k](0, 0) - exact));
  }
  o.require(err < 1e-6, "sup error " + sci(err));
  if (o.pass) o.note = "sup error " + sci(err);
  return o;
}

// --- 5 --------------------------------------------------------------------

Outcome lct_engine() {
  Outcome o;
  // Fourier-type reduction against an independent direct sum.
  const Grid tg = make_grid(-6.0, 6.0, 512);
  SampledVectorFunction f(tg, 2);
  for (std::size_t k = 0; k < tg.count; ++k) {
    const double t = tg.point(k);
    f.values(static_cast<Eigen::Index>(k), 0) = std::exp(-t * t) * cd(1.0, 0.3 * t);
    f.values(static_cast<Eigen::Index>(k), 1) = cd(std::cos(2 * t), 0) / (1.0 + t * t);
  }
  const Grid xg = make_grid(-4.0, 4.0, 257);
  const auto F = lct_forward(f, xg, fourier_params());
  const cd pre = 1.0 / std::sqrt(cd(0.0, 2.0 * kPi));
  double err_f = 0.0;
  for (std::size_t j = 0; j < xg.count; ++j)
    for (int c = 0; c < 2; ++c) {
      cd acc = 0.0;
      for (std::size_t k = 0; k < tg.count; ++k)
        acc += f.values(static_cast<Eigen::Index>(k), c) * std::exp(cd(0.0, -tg.point(k) * xg.point(j)));
      err_f = std::max(err_f, std::abs(F.values(static_cast<Eigen::Index>(j), c) - pre * acc * tg.step));
    }
  o.require(err_f < 1e-9, "Fourier reduction " + sci(err_f));

  // Gaussian closed form for two non-Fourier parameter sets.
  const Grid gg = make_grid(-14.0, 14.0, 2048);
  SampledVectorFunction gauss(gg, 1);
  for (std::size_t k = 0; k < gg.count; ++k)
    gauss.values(static_cast<Eigen::Index>(k), 0) = std::exp(-gg.point(k) * gg.point(k) / 2.0);
  double err_g = 0.0;
  const double th = 0.6;
  for (const auto& p : {LctParams::make(std::cos(th), std::sin(th), -std::sin(th), std::cos(th)),
                        LctParams::make(1.0, 2.0, 0.0, 1.0), LctParams::make(-0.5, -1.5, 0.5, -0.5)}) {
    const auto G = lct_forward(gauss, make_grid(-5.0, 5.0, 201), p);
    const cd a(0.5, -p.A() / (2.0 * p.B()));
    for (std::size_t j = 0; j < G.grid.count; ++j) {
      const double xi = G.grid.point(j);
      const cd exact = p.amplitude() * std::sqrt(kPi / a) *
                       std::exp(cd(0.0, p.D() * xi * xi / (2.0 * p.B())) - xi * xi / (4.0 * a * p.B() * p.B()));
      err_g = std::max(err_g, std::abs(G.values(static_cast<Eigen::Index>(j), 0) - exact));
    }
  }
  o.require(err_g < 1e-6, "Gaussian " + sci(err_g));

  // Round trips on the unitary dual grid.
  std::mt19937_64 rng(20261014);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  double err_r = 0.0;
  const Grid rg{-8.0, 16.0 / 1024.0, 1024};
  for (int trial = 0; trial < 100; ++trial) {
    double a = ud(rng), b = ud(rng), c = ud(rng);
    if (std::abs(b) < 0.2) b = b < 0 ? -0.2 : 0.2;
    const double d = (1.0 + b * c) / a;
    const auto p = LctParams::make(a, b, c, d);
    SampledVectorFunction s(rg, 3);
    for (Eigen::Index k = 0; k < s.values.rows(); ++k)
      for (int ch = 0; ch < 3; ++ch) s.values(k, ch) = cd(nd(rng), nd(rng));
    const auto back = lct_inverse(lct_forward(s, dual_grid(rg, p), p), rg, p);
    err_r = std::max(err_r, (back.values - s.values).norm() / s.values.norm());
  }
  o.require(err_r < 1e-8, "round trip " + sci(err_r));
  if (o.pass)
    o.note = "Fourier " + sci(err_f) + ", Gaussian " + sci(err_g) + ", round trip " + sci(err_r);
  return o;
}

// --- 6, 7 -----------------------------------------------------------------

struct SystemCase {
  std::string name;
  MaskBank bank;
  LctParams params;
  SystemSettings settings;
};

SystemSettings settings_for(double step, int fine_level) {
  SystemSettings s;
  s.time_grid = Grid{0.0, step, 4096};
  s.fine_level = fine_level;
  return s;
}

std::vector<SystemCase> systems() {
  const auto grid = corpus::omega_grid();
  const auto fourier = fourier_params();
  const auto shear = LctParams::make(1.0, 2.0, 0.0, 1.0);
  const double th = 0.9;
  const auto frac = LctParams::make(std::cos(th), std::sin(th), -std::sin(th), std::cos(th));
  std::vector<SystemCase> out;
  auto add = [&](const std::string& name, const VectorMask& g, const LctParams& p, SystemSettings s) {
    out.push_back({name, complete_wavelet_masks(g, grid), p, s});
  };
  add("haar M=3 fourier", corpus::haar(1, 3), fourier, settings_for(1.0 / 64, 0));
  add("haar M=2 shear", corpus::haar(1, 2), shear, settings_for(1.0 / 64, 0));
  add("indicator N=2 fourier", corpus::haar(2, 1), fourier, settings_for(1.0 / 128, 2));
  add("indicator N=2 shear", corpus::haar(2, 1), shear, settings_for(1.0 / 128, 2));
  add("indicator N=2 M=2 frac", corpus::haar(2, 2), frac, settings_for(1.0 / 128, 2));
  add("indicator N=3 shear", corpus::haar(3, 1), shear, settings_for(1.0 / 108, 2));
  add("d4 fourier", corpus::d4(), fourier, settings_for(1.0 / 64, 0));
  add("d4 shear", corpus::d4(), shear, settings_for(1.0 / 64, 0));
  return out;
}

Outcome orthonormality_transfer() {
  Outcome o;
  double worst = 0.0;
  bool nonuniform = false, non_fourier = false;
  for (const auto& c : systems()) {
    const auto sys = build_system(c.params, c.bank, c.settings);
    o.require(sys.gram_lambdas.size() == 8, c.name + ": " + std::to_string(sys.gram_lambdas.size()) + " translates");
    const Matrix g = gram_matrix(sys, sys.gram_lambdas);
    const double dev = (g - Matrix::Identity(g.rows(), g.cols())).norm();
    o.require(dev < 1e-3, c.name + ": Gram deviation " + sci(dev));
    worst = std::max(worst, dev);
    nonuniform = nonuniform || (sys.lattice.N() == 2 && sys.lattice.r() == 1);
    non_fourier = non_fourier || c.params.A() != 0.0;
  }
  o.require(nonuniform && non_fourier, "coverage");
  // A mask whose symbol vanishes inside E must not certify.
  try {
    (void)build_system(fourier_params(), complete_wavelet_masks(corpus::two_tap(0, 5), corpus::omega_grid()),
                       settings_for(1.0 / 64, 0));
    o.require(false, "taps {0,5} certified");
  } catch (const CertificationError& e) {
    o.require(e.report().condition == Condition::LowerBound, "taps {0,5} rejected for the wrong reason");
  }
  if (o.pass) o.note = std::to_string(systems().size()) + " systems, max deviation " + sci(worst);
  return o;
}

Outcome perfect_reconstruction() {
  Outcome o;
  std::mt19937_64 rng(7);
  double worst_haar = 0.0, worst_other = 0.0, worst_parseval = 0.0;
  for (const auto& c : systems()) {
    const bool haar3 = c.name == "haar M=3 fourier";
    const bool cascade_sampled = c.bank.lattice().N() > 1 || c.name.rfind("d4", 0) == 0;
    if (!haar3 && !cascade_sampled) continue;
    const auto sys = build_system(c.params, c.bank, c.settings);
    for (int trial = 0; trial < 100; ++trial) {
      const auto f = corpus::random_signal(sys, rng);
      const auto rt = round_trip(sys, f, 3);
      (haar3 ? worst_haar : worst_other) = std::max(haar3 ? worst_haar : worst_other, rt.relative_error);
      worst_parseval = std::max(worst_parseval, std::abs(rt.parseval_ratio - 1.0));
    }
  }
  o.require(worst_haar < 1e-6, "Haar M=3 error " + sci(worst_haar));
  o.require(worst_other < 1e-3, "cascade-sampled error " + sci(worst_other));
  o.require(worst_parseval < 1e-3, "Parseval deviation " + sci(worst_parseval));
  if (o.pass)
    o.note = "Haar M=3 " + sci(worst_haar) + ", others " + sci(worst_other) + ", Parseval " + sci(worst_parseval);
  return o;
}

// --- 8 --------------------------------------------------------------------

Outcome lower_bound() {
  Outcome o;
  const auto good = check_lower_bound(corpus::haar(), -0.25, 0.25, 12, 0.5, 2049);
  o.require(good.pass, "Haar fails: " + good.detail);
  const auto bad = check_lower_bound(corpus::two_tap(0, 5), -0.25, 0.25, 12, 0.5, 2049);
  o.require(!bad.pass, "taps {0,5} passes");
  if (o.pass) o.note = "Haar " + good.detail + "; taps {0,5} " + bad.detail;
  return o;
}

// --- 9 --------------------------------------------------------------------

int run(const std::string& args, const fs::path& out_file) {
  const std::string cmd = std::string(VNUMRA_CLI) + " " + args + " > " + out_file.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the full matrix in `dir`; returns exit codes, fills file contents.
std::vector<int> cli_matrix(const fs::path& dir, std::vector<std::string>& outputs) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string demo = std::string(LCTV_SOURCE_DIR) + "/demo/";
  {
    std::ofstream(dir / "zero.json") << R"({"M":1,"N":1,"r":1,"role":"scaling","coeffs":[]})";
    std::ofstream(dir / "broken.json") << R"({"M":1,"N":1,"r":)";
  }
  const std::string d = dir.string() + "/";
  std::vector<int> codes;
  codes.push_back(run("validate-mask --mask " + demo + "haar.json", dir / "validate.out"));
  codes.push_back(run("validate-mask --mask " + d + "zero.json", dir / "zero.out"));
  codes.push_back(run("validate-mask --mask " + d + "broken.json", dir / "broken.out"));
  codes.push_back(run("validate-mask --mask " + d + "absent.json", dir / "absent.out"));
  codes.push_back(run("build --mask " + demo + "haar.json --iterations 0 --out " + d + "sys0", dir / "it0.out"));
  codes.push_back(run("build --mask " + demo + "haar.json --out " + d + "sys", dir / "build.out"));
  codes.push_back(run("transform --system " + d + "sys --signal " + demo + "signal.csv --levels 3 --out " + d +
                          "pyr.json",
                      dir / "transform.out"));
  codes.push_back(run("reconstruct --system " + d + "sys --pyramid " + d + "pyr.json --signal " + demo +
                          "signal.csv --out " + d + "rec.csv",
                      dir / "reconstruct.out"));
  codes.push_back(run("transform --system " + d + "sys --signal " + demo + "signal.csv --levels 9 --out " + d +
                          "deep.json",
                      dir / "deep.out"));
  codes.push_back(run("plot-data --system " + d + "sys --band psi-7 --out " + d + "bad.csv", dir / "band.out"));
  codes.push_back(run("transform --system " + d + "nowhere --signal " + demo + "signal.csv --out " + d + "x.json",
                      dir / "nocache.out"));
  outputs.clear();
  for (const char* f : {"validate.out", "zero.out", "build.out", "transform.out", "reconstruct.out", "pyr.json",
                        "rec.csv", "sys/system.json", "sys/summary.json", "sys/phi.vnmr", "sys/psi_1.vnmr",
                        "sys/phi_hat.vnmr"})
    outputs.push_back(slurp(dir / f));
  return codes;
}

Outcome cli_contract() {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / "lctvnumra_acceptance";
  std::vector<std::string> a, b;
  const auto ca = cli_matrix(base / "a", a);
  const auto cb = cli_matrix(base / "b", b);
  const std::vector<int> expect{0, 1, 2, 2, 2, 0, 0, 0, 1, 2, 2};
  const char* names[] = {"valid mask", "zero mask", "malformed", "missing file", "iterations=0", "build",
                         "transform", "reconstruct", "too many levels", "unknown band", "missing cache"};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    o.require(ca[i] == expect[i], std::string(names[i]) + " exit " + std::to_string(ca[i]));
    o.require(cb[i] == ca[i], std::string(names[i]) + " exit differs on repeat");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.require(!a[i].empty(), "empty output #" + std::to_string(i));
    o.require(a[i] == b[i], "output #" + std::to_string(i) + " differs on repeat");
  }
  // The report in the transform output carries the round-trip error.
  const auto t = io::parse_json(a[3]);
  const double err = t.at("relative_error").get<double>();
  o.require(err < 1e-6, "demo round trip " + sci(err));
  fs::remove_all(base);
  if (o.pass) o.note = std::to_string(expect.size()) + " runs x2 byte-identical, demo round trip " + sci(err);
  return o;
}

}  // namespace

int main() {
  criterion(1, "lattice admissibility law", 1, lattice_law);
  criterion(2, "time/frequency orthonormality agreement", 10, time_frequency_agreement);
  criterion(3, "filter-bank certification", 30, filterbank_certification);
  criterion(4, "Haar cascade fidelity", 10, cascade_fidelity);
  criterion(5, "LCT engine", 60, lct_engine);
  criterion(6, "orthonormality transfer", 120, orthonormality_transfer);
  criterion(7, "perfect reconstruction", 120, perfect_reconstruction);
  criterion(8, "symbol lower bound", 5, lower_bound);
  criterion(9, "CLI determinism and exit codes", 60, cli_contract);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
