#pragma once

// File formats: mask and bank JSON, the VNMR binary sample dump, coefficient
// pyramid JSON and the signal CSV.

#include <nlohmann/json.hpp>

#include <cctype>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lctvnumra/cascade.hpp"
#include "lctvnumra/error.hpp"
#include "lctvnumra/lattice.hpp"
#include "lctvnumra/mask.hpp"
#include "lctvnumra/pipeline.hpp"

namespace lctvnumra::io {

using nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

inline json complex_json(cd z) { return json::array({z.real(), z.imag()}); }

inline cd complex_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(ErrorCode::ParseError, "complex entries are [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json mask_to_json(const VectorMask& g) {
  const Lattice& lat = g.lattice();
  json coeffs = json::array();
  for (const auto& [ticks, m] : g.coeffs()) {
    const auto p = lat.point_from_ticks(ticks);
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(complex_json(m(i, k)));
      rows.push_back(std::move(row));
    }
    coeffs.push_back({{"base", p.base == Coset::zero ? "0" : "r/N"},
                      {"translate", p.translate},
                      {"matrix", std::move(rows)}});
  }
  return {{"M", g.M()},
          {"N", lat.N()},
          {"r", lat.r()},
          {"role", g.role() == MaskRole::scaling ? "scaling" : "wavelet"},
          {"coeffs", std::move(coeffs)}};
}

namespace detail {

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline VectorMask mask_from_json(const json& j) {
  const auto m = detail::field<int>(j, "M");
  const auto n = detail::field<std::int64_t>(j, "N");
  const auto r = detail::field<std::int64_t>(j, "r");
  const Lattice lat = Lattice::make(n, r);
  MaskRole role = MaskRole::scaling;
  if (j.contains("role")) {
    const auto s = detail::field<std::string>(j, "role");
    if (s == "wavelet")
      role = MaskRole::wavelet;
    else if (s != "scaling")
      throw Error(ErrorCode::ParseError, "role must be 'scaling' or 'wavelet'");
  }
  VectorMask g(lat, m, role);
  const json& coeffs = j.at("coeffs");
  if (!coeffs.is_array()) throw Error(ErrorCode::ParseError, "'coeffs' must be an array");
  for (const auto& c : coeffs) {
    const auto base = detail::field<std::string>(c, "base");
    if (base != "0" && base != "r/N") throw Error(ErrorCode::ParseError, "base must be '0' or 'r/N'");
    const auto t = detail::field<std::int64_t>(c, "translate");
    const json& rows = c.at("matrix");
    if (!rows.is_array() || static_cast<int>(rows.size()) != m)
      throw Error(ErrorCode::ChannelMismatch, "matrix must have M rows");
    Matrix x(m, m);
    for (int i = 0; i < m; ++i) {
      if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != m)
        throw Error(ErrorCode::ChannelMismatch, "matrix must have M columns");
      for (int k = 0; k < m; ++k) x(i, k) = complex_from(rows[i][k]);
    }
    const auto ticks = lat.ticks_of(lat.point(base == "0" ? Coset::zero : Coset::r_over_N, t));
    if (g.find(ticks)) throw Error(ErrorCode::ParseError, "duplicate coefficient index");
    g.set(ticks, std::move(x));
  }
  return g;
}

inline json bank_to_json(const MaskBank& b) {
  json w = json::array();
  for (const auto& h : b.wavelets) w.push_back(mask_to_json(h));
  return {{"scaling", mask_to_json(b.scaling)}, {"wavelets", std::move(w)}};
}

inline MaskBank bank_from_json(const json& j) {
  if (!j.is_object() || !j.contains("scaling") || !j.contains("wavelets"))
    throw Error(ErrorCode::ParseError, "bank needs 'scaling' and 'wavelets'");
  MaskBank b{mask_from_json(j.at("scaling")), {}};
  if (!j.at("wavelets").is_array()) throw Error(ErrorCode::ParseError, "'wavelets' must be an array");
  for (const auto& w : j.at("wavelets")) {
    auto h = mask_from_json(w);
    if (!(h.lattice() == b.lattice())) throw Error(ErrorCode::LatticeMismatch, "wavelet lattice");
    if (h.M() != b.M()) throw Error(ErrorCode::ChannelMismatch, "wavelet channel count");
    h.set_role(MaskRole::wavelet);
    b.wavelets.push_back(std::move(h));
  }
  return b;
}

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline VectorMask load_mask(const std::string& path) { return mask_from_json(parse_json(read_text(path))); }
inline MaskBank load_bank(const std::string& path) { return bank_from_json(parse_json(read_text(path))); }
inline void save_mask(const std::string& path, const VectorMask& g) {
  write_text(path, mask_to_json(g).dump(2) + "\n");
}
inline void save_bank(const std::string& path, const MaskBank& b) {
  write_text(path, bank_to_json(b).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// VNMR binary dump
// ---------------------------------------------------------------------------
//
// Little-endian header: "VNMR", u32 version, u32 M, u64 count, f64 start,
// f64 step, u8 domain (0 time, 1 omega), then complex128 samples row-major.
// Version 1 holds count x M vectors, version 2 count x M x M matrices.

enum class Domain : std::uint8_t { time = 0, omega = 1 };

namespace detail {

static_assert(std::endian::native == std::endian::little, "VNMR writer assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw Error(ErrorCode::ParseError, "truncated VNMR file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::string header(std::uint32_t version, std::uint32_t m, const Grid& g, Domain d) {
  std::string buf = "VNMR";
  put<std::uint32_t>(buf, version);
  put<std::uint32_t>(buf, m);
  put<std::uint64_t>(buf, g.count);
  put<double>(buf, g.start);
  put<double>(buf, g.step);
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(d));
  return buf;
}

struct Header {
  std::uint32_t version, m;
  Grid grid;
  Domain domain;
};

inline Header read_header(const std::string& buf, std::size_t& pos) {
  if (buf.size() < 4 || buf.compare(0, 4, "VNMR") != 0)
    throw Error(ErrorCode::ParseError, "not a VNMR file");
  pos = 4;
  Header h{};
  h.version = take<std::uint32_t>(buf, pos);
  h.m = take<std::uint32_t>(buf, pos);
  h.grid.count = take<std::uint64_t>(buf, pos);
  h.grid.start = take<double>(buf, pos);
  h.grid.step = take<double>(buf, pos);
  const auto d = take<std::uint8_t>(buf, pos);
  if (d > 1) throw Error(ErrorCode::ParseError, "bad VNMR domain byte");
  h.domain = static_cast<Domain>(d);
  if (h.version != 1 && h.version != 2) throw Error(ErrorCode::ParseError, "unknown VNMR version");
  if (h.m == 0) throw Error(ErrorCode::ParseError, "VNMR channel count is zero");
  const std::uint64_t per = h.version == 1 ? h.m : static_cast<std::uint64_t>(h.m) * h.m;
  if (buf.size() - pos != h.grid.count * per * 16)
    throw Error(ErrorCode::ParseError, "VNMR payload size disagrees with header");
  return h;
}

}  // namespace detail

inline std::string encode_vnmr(const SampledVectorFunction& f, Domain d = Domain::time) {
  std::string buf = detail::header(1, static_cast<std::uint32_t>(f.channels()), f.grid, d);
  for (Eigen::Index k = 0; k < f.values.rows(); ++k)
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      detail::put<double>(buf, f.values(k, c).real());
      detail::put<double>(buf, f.values(k, c).imag());
    }
  return buf;
}

inline std::string encode_vnmr(const SampledMatrixFunction& f, Domain d) {
  std::string buf = detail::header(2, static_cast<std::uint32_t>(f.M()), f.grid, d);
  for (const auto& x : f.values)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index k = 0; k < x.cols(); ++k) {
        detail::put<double>(buf, x(i, k).real());
        detail::put<double>(buf, x(i, k).imag());
      }
  return buf;
}

inline SampledVectorFunction decode_vnmr_vector(const std::string& buf, Domain* d = nullptr) {
  std::size_t pos = 0;
  const auto h = detail::read_header(buf, pos);
  if (h.version != 1) throw Error(ErrorCode::ParseError, "expected a vector (version 1) dump");
  if (d) *d = h.domain;
  SampledVectorFunction f(h.grid, static_cast<int>(h.m));
  for (Eigen::Index k = 0; k < f.values.rows(); ++k)
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
      const double re = detail::take<double>(buf, pos);
      f.values(k, c) = cd(re, detail::take<double>(buf, pos));
    }
  return f;
}

inline SampledMatrixFunction decode_vnmr_matrix(const std::string& buf, Domain* d = nullptr) {
  std::size_t pos = 0;
  const auto h = detail::read_header(buf, pos);
  if (h.version != 2) throw Error(ErrorCode::ParseError, "expected a matrix (version 2) dump");
  if (d) *d = h.domain;
  const auto m = static_cast<Eigen::Index>(h.m);
  SampledMatrixFunction f{h.grid, {}};
  f.values.reserve(h.grid.count);
  for (std::uint64_t k = 0; k < h.grid.count; ++k) {
    Matrix x(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index c = 0; c < m; ++c) {
        const double re = detail::take<double>(buf, pos);
        x(i, c) = cd(re, detail::take<double>(buf, pos));
      }
    f.values.push_back(std::move(x));
  }
  return f;
}

inline bool is_vnmr(const std::string& buf) { return buf.size() >= 4 && buf.compare(0, 4, "VNMR") == 0; }

// ---------------------------------------------------------------------------
// Signal CSV: t, re_0, im_0, re_1, im_1, ...
// ---------------------------------------------------------------------------

inline std::string fmt17(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

inline std::string encode_csv(const SampledVectorFunction& f) {
  std::string out = "# grid " + fmt17(f.grid.start) + "," + fmt17(f.grid.step) + "," +
                    std::to_string(f.grid.count) + "\nt";
  for (int c = 0; c < f.channels(); ++c)
    out += ",re_" + std::to_string(c) + ",im_" + std::to_string(c);
  out += '\n';
  for (std::size_t k = 0; k < f.grid.count; ++k) {
    out += fmt17(f.grid.point(k));
    for (int c = 0; c < f.channels(); ++c) {
      const cd z = f.values(static_cast<Eigen::Index>(k), c);
      out += ',' + fmt17(z.real()) + ',' + fmt17(z.imag());
    }
    out += '\n';
  }
  return out;
}

inline SampledVectorFunction decode_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<Grid> declared;
  std::vector<double> ts;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# grid ", 0) == 0) {
      Grid g;
      unsigned long long count = 0;
      if (std::sscanf(line.c_str() + 7, "%lf,%lf,%llu", &g.start, &g.step, &count) != 3)
        throw Error(ErrorCode::ParseError, "bad grid comment");
      g.count = count;
      declared = g;
      continue;
    }
    if (line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "non-numeric CSV cell '" + cell + "'");
      }
    }
    if (vals.size() < 3 || vals.size() % 2 == 0)
      throw Error(ErrorCode::ParseError, "CSV rows need t followed by re,im pairs");
    if (!rows.empty() && vals.size() != rows.front().size() + 1)
      throw Error(ErrorCode::ParseError, "ragged CSV row");
    ts.push_back(vals.front());
    rows.emplace_back(vals.begin() + 1, vals.end());
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "signal file holds no samples");
  Grid g;
  if (declared) {
    g = *declared;
    if (g.count != rows.size()) throw Error(ErrorCode::ParseError, "grid comment count mismatch");
  } else {
    g.start = ts.front();
    g.count = rows.size();
    g.step = rows.size() > 1 ? (ts.back() - ts.front()) / static_cast<double>(rows.size() - 1) : 1.0;
  }
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (std::abs(ts[k] - g.point(k)) > 1e-9 * std::max(1.0, std::abs(ts[k])))
      throw Error(ErrorCode::ParseError, "time column is not uniform");
  const int m = static_cast<int>(rows.front().size() / 2);
  SampledVectorFunction f(g, m);
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (int c = 0; c < m; ++c)
      f.values(static_cast<Eigen::Index>(k), c) = cd(rows[k][2 * c], rows[k][2 * c + 1]);
  return f;
}

/// Signal from a CSV or VNMR (version 1) file.
inline SampledVectorFunction load_signal(const std::string& path) {
  const std::string buf = read_text(path);
  return is_vnmr(buf) ? decode_vnmr_vector(buf) : decode_csv(buf);
}

// ---------------------------------------------------------------------------
// Coefficient pyramid JSON
// ---------------------------------------------------------------------------

inline json pyramid_to_json(const CoefficientPyramid& p, const Lattice& lat) {
  json entries = json::array();
  auto emit = [&](int level, const std::string& band, const Band& b) {
    for (const auto& [ticks, v] : b) {
      const auto pt = lat.point_from_ticks(ticks);
      json vec = json::array();
      for (Eigen::Index i = 0; i < v.size(); ++i) vec.push_back(complex_json(v(i)));
      entries.push_back({{"level", level},
                         {"band", band},
                         {"base", pt.base == Coset::zero ? "0" : "r/N"},
                         {"translate", pt.translate},
                         {"vector", std::move(vec)}});
    }
  };
  emit(p.fine_level - p.levels, "approx", p.approx);
  for (std::size_t i = 0; i < p.details.size(); ++i)
    for (std::size_t l = 0; l < p.details[i].size(); ++l)
      emit(p.fine_level - 1 - static_cast<int>(i), "detail-" + std::to_string(l + 1), p.details[i][l]);
  return {{"levels", p.levels},
          {"M", p.M},
          {"N", p.N},
          {"r", p.r},
          {"fine_level", p.fine_level},
          {"grid", json::array({p.grid.start, p.grid.step, p.grid.count})},
          {"bands", p.details.empty() ? 0 : p.details.front().size()},
          {"entries", std::move(entries)}};
}

inline CoefficientPyramid pyramid_from_json(const json& j) {
  CoefficientPyramid p;
  p.levels = detail::field<int>(j, "levels");
  p.M = detail::field<int>(j, "M");
  p.N = detail::field<std::int64_t>(j, "N");
  p.r = detail::field<std::int64_t>(j, "r");
  p.fine_level = detail::field<int>(j, "fine_level");
  const auto g = detail::field<std::vector<double>>(j, "grid");
  if (g.size() != 3) throw Error(ErrorCode::ParseError, "grid is [start, step, count]");
  p.grid = Grid{g[0], g[1], static_cast<std::size_t>(g[2])};
  const auto bands = detail::field<std::size_t>(j, "bands");
  if (p.levels < 1) throw Error(ErrorCode::ParseError, "levels must be >= 1");
  const Lattice lat = Lattice::make(p.N, p.r);
  p.details.assign(static_cast<std::size_t>(p.levels), std::vector<Band>(bands));
  for (const auto& e : j.at("entries")) {
    const auto level = detail::field<int>(e, "level");
    const auto band = detail::field<std::string>(e, "band");
    const auto base = detail::field<std::string>(e, "base");
    if (base != "0" && base != "r/N") throw Error(ErrorCode::ParseError, "base must be '0' or 'r/N'");
    const auto ticks = lat.ticks_of(
        lat.point(base == "0" ? Coset::zero : Coset::r_over_N, detail::field<std::int64_t>(e, "translate")));
    const json& vec = e.at("vector");
    if (!vec.is_array() || static_cast<int>(vec.size()) != p.M)
      throw Error(ErrorCode::IncompatiblePyramid, "coefficient vector length differs from M");
    Vector v(p.M);
    for (int i = 0; i < p.M; ++i) v(i) = complex_from(vec[static_cast<std::size_t>(i)]);
    if (band == "approx") {
      if (level != p.fine_level - p.levels) throw Error(ErrorCode::IncompatiblePyramid, "approx level");
      p.approx[ticks] = v;
      continue;
    }
    if (band.rfind("detail-", 0) != 0) throw Error(ErrorCode::ParseError, "unknown band " + band);
    const int ell = std::stoi(band.substr(7));
    const int i = p.fine_level - 1 - level;
    if (ell < 1 || static_cast<std::size_t>(ell) > bands || i < 0 || i >= p.levels)
      throw Error(ErrorCode::IncompatiblePyramid, "entry outside the pyramid: " + band);
    p.details[static_cast<std::size_t>(i)][static_cast<std::size_t>(ell - 1)][ticks] = v;
  }
  return p;
}

}  // namespace lctvnumra::io
