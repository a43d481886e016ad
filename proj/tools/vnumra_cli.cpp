// vnumra: batch front end for mask certification, system builds and
// transform runs. Exit codes: 0 success, 1 certification or numerical
// failure, 2 usage, parse error or missing input.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lctvnumra.hpp"

namespace fs = std::filesystem;
using namespace lctvnumra;
using io::json;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string mask, bank, signal, out, system, pyramid;
  std::string abcd = "0,1,-1,0";
  std::string grid = "0,0.015625,4096";
  std::string omega = "-8,0.00390625,4096";
  std::string checks = "normalization,time,frequency";
  std::string band = "phi";
  std::string lower_bound = "-0.25,0.25,12,0.5";
  int N = 1, r = 1, M = 1;
  int iterations = kDefaultIterations;
  int levels = 3;
  int fine_level = 0;
  double tol = kCoefficientTol;
};

std::vector<double> numbers(const std::string& s, std::size_t want, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": not a number '" + cell + "'");
    }
  }
  if (out.size() != want)
    throw UsageError(std::string(what) + " expects " + std::to_string(want) + " comma-separated values");
  return out;
}

LctParams parse_abcd(const std::string& s) {
  const auto v = numbers(s, 4, "--abcd");
  return LctParams::make(v[0], v[1], v[2], v[3]);
}

Grid parse_grid(const std::string& s, const char* what) {
  const auto v = numbers(s, 3, what);
  if (v[2] < 1 || v[2] != static_cast<double>(static_cast<std::size_t>(v[2])))
    throw UsageError(std::string(what) + " count must be a positive integer");
  return Grid{v[0], v[1], static_cast<std::size_t>(v[2])};
}

json report_json(const CertificationReport& r) {
  return {{"condition", std::string(to_string(r.condition))},
          {"residual", r.residual},
          {"tolerance", r.tolerance},
          {"pass", r.pass},
          {"detail", r.detail}};
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string("missing file: ") + path);
}

// Input files that fail to load are usage errors, whatever the reason.
template <class F>
auto load(const std::string& path, const char* flag, F&& fn) {
  require_file(path, flag);
  try {
    return fn(path);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

VectorMask load_mask(const std::string& p) { return load(p, "--mask", io::load_mask); }
MaskBank load_bank(const std::string& p) { return load(p, "--bank", io::load_bank); }

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

// --- system cache ---------------------------------------------------------

json settings_json(const LctParams& p, const SystemSettings& s) {
  auto g = [](const Grid& x) { return json::array({x.start, x.step, x.count}); };
  return {{"abcd", json::array({p.A(), p.B(), p.C(), p.D()})},
          {"time_grid", g(s.time_grid)},
          {"omega_grid", g(s.omega_grid)},
          {"iterations", s.iterations},
          {"fine_level", s.fine_level},
          {"depth", s.depth}};
}

struct Cache {
  LctParams params;
  MaskBank bank;
  SystemSettings settings;
};

Cache load_cache(const std::string& dir) {
  if (dir.empty()) throw UsageError("--system is required");
  const fs::path file = fs::path(dir) / "system.json";
  if (!fs::exists(file)) throw UsageError("missing system cache: " + file.string());
  const json j = io::parse_json(io::read_text(file.string()));
  const json& s = j.at("settings");
  auto grid = [](const json& a) {
    return Grid{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<std::size_t>()};
  };
  const auto abcd = s.at("abcd").get<std::vector<double>>();
  SystemSettings st;
  st.time_grid = grid(s.at("time_grid"));
  st.omega_grid = grid(s.at("omega_grid"));
  st.iterations = s.at("iterations").get<int>();
  st.fine_level = s.at("fine_level").get<int>();
  st.depth = s.at("depth").get<int>();
  return Cache{LctParams::make(abcd.at(0), abcd.at(1), abcd.at(2), abcd.at(3)),
               io::bank_from_json(j.at("bank")), st};
}

VnumraSystem system_from_cache(const std::string& dir) {
  const auto c = load_cache(dir);
  return build_system(c.params, c.bank, c.settings);
}

// --- commands -------------------------------------------------------------

int cmd_validate_mask(const Config& cfg) {
  std::optional<MaskBank> bank;
  if (!cfg.bank.empty()) {
    bank = load_bank(cfg.bank);
  }
  VectorMask g = bank ? bank->scaling : load_mask(cfg.mask);
  const Grid omega = make_grid(0.0, 1.0, 1024);
  json checks = json::array();
  bool ok = true;
  std::stringstream ss(cfg.checks);
  std::string name;
  while (std::getline(ss, name, ',')) {
    CertificationReport r;
    if (name == "normalization")
      r = check_normalization(g, cfg.tol);
    else if (name == "time")
      r = check_time_orthogonality(g, default_time_pairs(g), cfg.tol);
    else if (name == "frequency")
      r = check_frequency_identity(g, omega, cfg.tol);
    else if (name == "filterbank") {
      if (!bank) throw UsageError("the filterbank check needs --bank");
      r = check_filterbank(*bank, omega, std::max(cfg.tol, kGridFitTol));
    } else if (name == "lower-bound") {
      const auto v = numbers(cfg.lower_bound, 4, "--lower-bound");
      r = check_lower_bound(g, v[0], v[1], static_cast<int>(v[2]), v[3], 1025);
    } else {
      throw UsageError("unknown check '" + name + "'");
    }
    ok = ok && r.pass;
    checks.push_back(report_json(r));
  }
  print({{"pass", ok}, {"checks", std::move(checks)}});
  return ok ? kOk : kFail;
}

MaskBank bank_for_build(const Config& cfg) {
  if (!cfg.bank.empty()) {
    return load_bank(cfg.bank);
  }
  return complete_wavelet_masks(load_mask(cfg.mask), make_grid(0.0, 1.0, 1024));
}

int cmd_build_wavelets(const Config& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  const auto bank = complete_wavelet_masks(load_mask(cfg.mask), make_grid(0.0, 1.0, 1024),
                                           std::max(cfg.tol, kGridFitTol));
  io::save_bank(cfg.out, bank);
  const auto rep = check_filterbank(bank, make_grid(0.0, 1.0, 1024));
  print({{"wavelets", bank.wavelets.size()}, {"filterbank", report_json(rep)}});
  return kOk;
}

int cmd_build(const Config& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  const LctParams params = parse_abcd(cfg.abcd);
  SystemSettings st;
  st.time_grid = parse_grid(cfg.grid, "--grid");
  st.omega_grid = parse_grid(cfg.omega, "--omega-grid");
  st.iterations = cfg.iterations;
  st.fine_level = cfg.fine_level;
  const MaskBank bank = bank_for_build(cfg);
  const VnumraSystem sys = build_system(params, bank, st);

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  io::write_text((dir / "system.json").string(),
                 json{{"settings", settings_json(params, st)}, {"bank", io::bank_to_json(bank)}}.dump(2) +
                     "\n");
  io::write_text((dir / "phi_hat.vnmr").string(), io::encode_vnmr(sys.phi.phi_hat, io::Domain::omega));
  io::write_text((dir / "phi.vnmr").string(), io::encode_vnmr(sys.phi_samples, io::Domain::time));
  for (std::size_t l = 0; l < sys.psi_samples.size(); ++l)
    io::write_text((dir / ("psi_" + std::to_string(l + 1) + ".vnmr")).string(),
                   io::encode_vnmr(sys.psi_samples[l], io::Domain::time));
  json reports = json::array();
  for (const auto& r : sys.reports) reports.push_back(report_json(r));
  const json summary{{"convergence_metric", sys.phi.convergence_metric},
                     {"iterations", sys.phi.iterations},
                     {"gram_deviation", sys.gram_deviation},
                     {"gram_translates", sys.gram_lambdas.size()},
                     {"subdivision_depth", sys.evaluator->depth()},
                     {"wavelets", sys.psi_samples.size()},
                     {"reports", reports}};
  io::write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
  print(summary);
  return kOk;
}

int band_index(const std::string& band, const VnumraSystem& sys) {
  if (band == "phi") return 0;
  if (band.rfind("psi-", 0) == 0) {
    try {
      const int ell = std::stoi(band.substr(4));
      if (ell >= 1 && ell <= static_cast<int>(sys.psi_samples.size())) return ell;
    } catch (const std::exception&) {
    }
  }
  throw UsageError("unknown band '" + band + "' (phi, psi-1 .. psi-" +
                   std::to_string(sys.psi_samples.size()) + ")");
}

std::string gram_csv(const Matrix& g) {
  std::string out = "i,j,re,im\n";
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      out += std::to_string(i) + "," + std::to_string(j) + "," + io::fmt17(g(i, j).real()) + "," +
             io::fmt17(g(i, j).imag()) + "\n";
  return out;
}

// Hermitian part; the quadrature already is Hermitian up to rounding.
Matrix hermitian(const Matrix& g) { return (g + g.adjoint()) / 2.0; }

int cmd_gram(const Config& cfg) {
  const auto sys = system_from_cache(cfg.system);
  const int ell = band_index(cfg.band, sys);
  const Matrix g = hermitian(gram_matrix(sys, sys.gram_lambdas, ell));
  const double dev = (g - Matrix::Identity(g.rows(), g.cols())).norm();
  if (!cfg.out.empty()) io::write_text(cfg.out, gram_csv(g));
  json lambdas = json::array();
  for (const auto& l : sys.gram_lambdas) lambdas.push_back(l.str());
  print({{"band", cfg.band}, {"translates", lambdas}, {"deviation", dev}});
  return kOk;
}

SampledVectorFunction signal_for(const VnumraSystem& sys, const std::string& path) {
  auto f = load(path, "--signal", io::load_signal);
  const Grid& g = sys.settings.time_grid;
  // Accept a grid reconstructed from printed time stamps.
  if (f.grid.count == g.count && std::abs(f.grid.start - g.start) <= 1e-12 * std::max(1.0, std::abs(g.start)) &&
      std::abs(f.grid.step - g.step) <= 1e-12 * g.step)
    f.grid = g;
  return f;
}

int cmd_transform(const Config& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  const auto sys = system_from_cache(cfg.system);
  const auto f = signal_for(sys, cfg.signal);
  const auto p = analyze(sys, f, cfg.levels);
  io::write_text(cfg.out, io::pyramid_to_json(p, sys.lattice).dump(2) + "\n");
  const auto back = synthesize(sys, p);
  const double nf = f.norm();
  const double err = nf == 0.0 ? 0.0 : (back.values - f.values).norm() * std::sqrt(f.grid.step) / nf;
  print({{"levels", p.levels},
         {"relative_error", err},
         {"parseval_ratio", nf == 0.0 ? 1.0 : p.energy() / (nf * nf)}});
  return kOk;
}

int cmd_reconstruct(const Config& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  const auto sys = system_from_cache(cfg.system);
  const auto p = load(cfg.pyramid, "--pyramid", [](const std::string& path) {
    return io::pyramid_from_json(io::parse_json(io::read_text(path)));
  });
  const auto f = synthesize(sys, p);
  const bool binary = fs::path(cfg.out).extension() == ".vnmr";
  io::write_text(cfg.out, binary ? io::encode_vnmr(f) : io::encode_csv(f));
  json summary{{"samples", f.grid.count}, {"channels", f.channels()}};
  if (!cfg.signal.empty()) {
    const auto ref = signal_for(sys, cfg.signal);
    if (ref.channels() != f.channels() || ref.grid.count != f.grid.count)
      throw Error(ErrorCode::ChannelMismatch, "reference signal shape differs");
    const double n = ref.norm();
    summary["relative_error"] =
        n == 0.0 ? 0.0 : (ref.values - f.values).norm() * std::sqrt(f.grid.step) / n;
  }
  print(summary);
  return kOk;
}

int cmd_plot_data(const Config& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  const auto sys = system_from_cache(cfg.system);
  if (cfg.band == "gram") {
    io::write_text(cfg.out, gram_csv(hermitian(gram_matrix(sys, sys.gram_lambdas, 0))));
    return kOk;
  }
  const int ell = band_index(cfg.band, sys);
  const auto& s = ell == 0 ? sys.phi_samples : sys.psi_samples[static_cast<std::size_t>(ell - 1)];
  const int m = sys.M();
  std::string out = "t";
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out += ",abs_" + std::to_string(i) + std::to_string(j);
  out += '\n';
  for (std::size_t k = 0; k < s.grid.count; ++k) {
    out += io::fmt17(s.grid.point(k));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out += ',' + io::fmt17(std::abs(s.values[k](i, j)));
    out += '\n';
  }
  io::write_text(cfg.out, out);
  return kOk;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyGrid:
      return kUsage;
    default:
      return kFail;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector-valued nonuniform multiresolution analysis in LCT domains"};
  app.set_config("--config", "", "TOML/INI file supplying any flag; command-line flags win");
  app.require_subcommand(1);
  Config cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--mask", cfg.mask, "scaling mask JSON");
    sub->add_option("--bank", cfg.bank, "filter bank JSON");
    sub->add_option("--signal", cfg.signal, "signal CSV or VNMR");
    sub->add_option("--out", cfg.out, "output path");
    sub->add_option("--system", cfg.system, "system cache directory");
    sub->add_option("--pyramid", cfg.pyramid, "coefficient pyramid JSON");
    sub->add_option("--abcd", cfg.abcd, "LCT parameters A,B,C,D");
    sub->add_option("--N", cfg.N, "lattice N (informational; masks carry their own)");
    sub->add_option("--r", cfg.r, "lattice r (informational)");
    sub->add_option("--M", cfg.M, "channel count (informational)");
    sub->add_option("--grid", cfg.grid, "time grid start,step,count");
    sub->add_option("--omega-grid", cfg.omega, "cascade omega grid start,step,count");
    sub->add_option("--iterations", cfg.iterations, "cascade iterations")->check(CLI::PositiveNumber);
    sub->add_option("--tol", cfg.tol, "certification tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--levels", cfg.levels, "decomposition levels")->check(CLI::PositiveNumber);
    sub->add_option("--fine-level", cfg.fine_level, "level of the finest atoms");
    sub->add_option("--checks", cfg.checks, "normalization,time,frequency,filterbank,lower-bound");
    sub->add_option("--lower-bound", cfg.lower_bound, "E_lo,E_hi,k_max,C for the lower-bound check");
    sub->add_option("--band", cfg.band, "phi, psi-<l> or gram");
  };

  std::vector<std::pair<CLI::App*, int (*)(const Config&)>> cmds;
  auto add = [&](const char* name, const char* help, int (*fn)(const Config&)) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    cmds.emplace_back(sub, fn);
    return sub;
  };
  add("validate-mask", "run certification checks on a mask or bank", cmd_validate_mask);
  add("build-scaling", "build and cache a certified system", cmd_build)->alias("build");
  add("build-wavelets", "complete a scaling mask to a filter bank", cmd_build_wavelets);
  add("gram", "Gram matrix of cached translates", cmd_gram);
  add("transform", "analyze a signal into a coefficient pyramid", cmd_transform);
  add("reconstruct", "synthesize a signal from a pyramid", cmd_reconstruct);
  add("plot-data", "CSV tables of |Phi|, |Psi_l| or Gram entries", cmd_plot_data);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    for (const auto& [sub, fn] : cmds)
      if (sub->parsed()) return fn(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CertificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    print({{"pass", false}, {"failed", report_json(e.report())}});
    return kFail;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
