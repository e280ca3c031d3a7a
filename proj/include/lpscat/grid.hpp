#pragma once
// Periodic box [-L, L)^d, its frequency lattice, the DFT provider and the
// Fourier symbols used throughout the library.
//
// Fourier convention: fhat(xi) = (2 pi)^{-d/2} \int e^{-i x.xi} f(x) dx, with the
// same factor on the inverse. Frequency-side fields store samples of fhat on
// the lattice xi_k = pi k / L (+ an optional Bloch shift), unshifted FFT order.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpscat/errors.hpp"

namespace lpscat {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

inline constexpr double kPi = std::numbers::pi;

struct Grid {
  int d = 3;
  double L = 1.0;
  int N = 8;

  double dx() const { return 2.0 * L / N; }
  double dxi() const { return kPi / L; }
  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(N);
    return s;
  }
  double cell() const { return std::pow(dx(), d); }
  double dcell() const { return std::pow(dxi(), d); }
  // Unshifted FFT index -> integer wave number.
  int wave(int i) const { return i < N / 2 ? i : i - N; }
  double coord(int i) const { return -L + i * dx(); }
  double xi_max() const { return kPi * N / (2.0 * L) * std::sqrt(static_cast<double>(d)); }
  bool operator==(const Grid& o) const { return d == o.d && L == o.L && N == o.N; }
};

inline Grid make_grid(int d, double L, int N) {
  std::string err;
  if (d != 2 && d != 3) err += "d must be 2 or 3 (got " + std::to_string(d) + "); ";
  if (!(L > 0.0) || !std::isfinite(L)) err += "L must be positive and finite; ";
  if (N % 2 != 0) err += "N must be even (got " + std::to_string(N) + "); ";
  if (N < 8) err += "N must be at least 8 (got " + std::to_string(N) + "); ";
  if (!err.empty()) throw ParameterError("make_grid: " + err.substr(0, err.size() - 2));
  return Grid{d, L, N};
}

enum class Side { physical, frequency };

inline const char* side_name(Side s) { return s == Side::physical ? "physical" : "frequency"; }

// d-dimensional complex samples, lexicographic order with the last axis
// fastest. `shift` is a Bloch offset of the frequency lattice (zero except for
// the CGO fields); physical samples always hold the true values.
struct ComplexField {
  Grid grid;
  Side side = Side::physical;
  std::vector<cplx> data;
  Vec3 shift{0.0, 0.0, 0.0};

  ComplexField() = default;
  ComplexField(const Grid& g, Side s) : grid(g), side(s), data(g.size(), cplx(0.0)) {}

  std::size_t size() const { return data.size(); }
  bool shifted() const { return shift[0] != 0.0 || shift[1] != 0.0 || shift[2] != 0.0; }
};

struct RealField {
  Grid grid;
  std::vector<double> data;
};

// ---------------------------------------------------------------- iteration

// Calls fn(idx, i) for every lattice index; i holds d per-axis indices.
template <class Fn>
inline void for_each_index(const Grid& g, Fn&& fn) {
  std::array<int, 3> i{0, 0, 0};
  const int N = g.N;
  std::size_t idx = 0;
  if (g.d == 2) {
    for (i[0] = 0; i[0] < N; ++i[0])
      for (i[1] = 0; i[1] < N; ++i[1]) fn(idx++, i);
  } else {
    for (i[0] = 0; i[0] < N; ++i[0])
      for (i[1] = 0; i[1] < N; ++i[1])
        for (i[2] = 0; i[2] < N; ++i[2]) fn(idx++, i);
  }
}

// fn(idx, x) with physical coordinates.
template <class Fn>
inline void for_each_point(const Grid& g, Fn&& fn) {
  std::vector<double> c(g.N);
  for (int n = 0; n < g.N; ++n) c[n] = g.coord(n);
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    Vec3 x{0.0, 0.0, 0.0};
    for (int a = 0; a < g.d; ++a) x[a] = c[i[a]];
    fn(idx, x);
  });
}

// fn(idx, xi) with lattice frequencies (including a Bloch shift).
template <class Fn>
inline void for_each_mode(const Grid& g, const Vec3& shift, Fn&& fn) {
  const double s = g.dxi();
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    Vec3 xi{0.0, 0.0, 0.0};
    for (int a = 0; a < g.d; ++a) xi[a] = s * g.wave(i[a]) + shift[a];
    fn(idx, xi);
  });
}

template <class Fn>
inline void for_each_mode(const Grid& g, Fn&& fn) {
  for_each_mode(g, Vec3{0.0, 0.0, 0.0}, std::forward<Fn>(fn));
}

inline double norm2(const Vec3& v, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += v[a] * v[a];
  return s;
}

// ---------------------------------------------------------------- DFT

namespace detail {

inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  FftPlan(int d, int N) : n_(1) {
    for (int a = 0; a < d; ++a) n_ *= static_cast<std::size_t>(N);
    std::lock_guard<std::mutex> lock(fftw_mutex());
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
    int dims[3] = {N, N, N};
    fwd_ = fftw_plan_dft(d, dims, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(d, dims, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  // In-place unnormalized transform of n complex values.
  void run(cplx* data, bool forward) {
    std::memcpy(buf_, data, sizeof(fftw_complex) * n_);
    fftw_execute(forward ? fwd_ : bwd_);
    std::memcpy(static_cast<void*>(data), buf_, sizeof(fftw_complex) * n_);
  }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

// One plan cache per thread.
inline FftPlan& plan_for(int d, int N) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
  auto key = std::make_pair(d, N);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<FftPlan>(d, N)).first;
  return *it->second;
}

inline void apply_bloch(ComplexField& f, double sign) {
  if (!f.shifted()) return;
  const Vec3 s = f.shift;
  const int d = f.grid.d;
  for_each_point(f.grid, [&](std::size_t idx, const Vec3& x) {
    double ph = 0.0;
    for (int a = 0; a < d; ++a) ph += s[a] * x[a];
    f.data[idx] *= std::polar(1.0, sign * ph);
  });
}

}  // namespace detail

// Symmetric-normalized transform to the frequency side (no-op if already there).
inline ComplexField to_frequency(ComplexField f) {
  if (f.side == Side::frequency) return f;
  const Grid& g = f.grid;
  detail::apply_bloch(f, -1.0);
  detail::plan_for(g.d, g.N).run(f.data.data(), true);
  const double c = std::pow(2.0 * kPi, -0.5 * g.d) * g.cell();
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    int par = 0;
    for (int a = 0; a < g.d; ++a) par += i[a];
    f.data[idx] *= (par & 1) ? -c : c;
  });
  f.side = Side::frequency;
  return f;
}

inline ComplexField to_physical(ComplexField f) {
  if (f.side == Side::physical) return f;
  const Grid& g = f.grid;
  const double c = std::pow(2.0 * kPi, -0.5 * g.d) * g.dcell();
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    int par = 0;
    for (int a = 0; a < g.d; ++a) par += i[a];
    f.data[idx] *= (par & 1) ? -c : c;
  });
  detail::plan_for(g.d, g.N).run(f.data.data(), false);
  f.side = Side::physical;
  detail::apply_bloch(f, +1.0);
  return f;
}

inline ComplexField on_side(const ComplexField& f, Side s) {
  return s == Side::physical ? to_physical(f) : to_frequency(f);
}

// L2 norm; Plancherel makes the two sides agree.
inline double l2_norm(const ComplexField& f) {
  double s = 0.0;
  for (const auto& v : f.data) s += std::norm(v);
  const double w = f.side == Side::physical ? f.grid.cell() : f.grid.dcell();
  return std::sqrt(s * w);
}

// L^p norm by the equal-weight rule on physical samples; p = inf gives the max.
inline double lp_norm(const ComplexField& f, double p) {
  const ComplexField u = to_physical(f);
  if (std::isinf(p)) {
    double m = 0.0;
    for (const auto& v : u.data) m = std::max(m, std::abs(v));
    return m;
  }
  if (!(p >= 1.0)) throw ParameterError("lp_norm: p must be >= 1");
  double mx = 0.0;
  for (const auto& v : u.data) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& v : u.data) s += std::pow(std::abs(v) / mx, p);
  return mx * std::pow(s * u.grid.cell(), 1.0 / p);
}

// Physical samples of fn(x).
template <class Fn>
inline ComplexField sample(const Grid& g, Fn&& fn) {
  ComplexField f(g, Side::physical);
  for_each_point(g, [&](std::size_t idx, const Vec3& x) { f.data[idx] = fn(x); });
  return f;
}

// ---------------------------------------------------------------- symbols

enum class SymbolKind { m_lambda, q_tau, p_zeta, lambda_minus_xi2 };

struct SymbolSpec {
  SymbolKind kind = SymbolKind::m_lambda;
  double lambda = 0.0;
  double tau = 0.0;
  CVec3 zeta{cplx(0.0), cplx(0.0), cplx(0.0)};
};

inline double m_lambda(double lambda, const Vec3& xi, int d) { return std::abs(lambda - norm2(xi, d)); }

inline cplx q_tau(double tau, const Vec3& xi, int d) {
  return cplx(tau * tau - norm2(xi, d), 2.0 * tau * xi[d - 1]);
}

inline cplx p_zeta(const CVec3& zeta, const Vec3& xi, int d) {
  cplx dot(0.0);
  for (int a = 0; a < d; ++a) dot += zeta[a] * xi[a];
  return -norm2(xi, d) + cplx(0.0, 2.0) * dot;
}

inline cplx eval_symbol_at(const SymbolSpec& s, const Vec3& xi, int d) {
  switch (s.kind) {
    case SymbolKind::m_lambda: return m_lambda(s.lambda, xi, d);
    case SymbolKind::q_tau: return q_tau(s.tau, xi, d);
    case SymbolKind::p_zeta: return p_zeta(s.zeta, xi, d);
    case SymbolKind::lambda_minus_xi2: return s.lambda - norm2(xi, d);
  }
  return 0.0;
}

inline ComplexField eval_symbol(const SymbolSpec& s, const Grid& g, const Vec3& shift = {0.0, 0.0, 0.0}) {
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = finite(s.lambda) && finite(s.tau);
  for (const auto& z : s.zeta) ok = ok && finite(z.real()) && finite(z.imag());
  if (!ok) throw ParameterError("eval_symbol: non-finite symbol parameter");
  if ((s.kind == SymbolKind::m_lambda || s.kind == SymbolKind::lambda_minus_xi2) && s.lambda < 0.0)
    throw ParameterError("eval_symbol: lambda must be >= 0");
  if (s.kind == SymbolKind::q_tau && s.tau < 0.0) throw ParameterError("eval_symbol: tau must be >= 0");
  ComplexField out(g, Side::frequency);
  out.shift = shift;
  for_each_mode(g, shift, [&](std::size_t idx, const Vec3& xi) { out.data[idx] = eval_symbol_at(s, xi, g.d); });
  return out;
}

// Multiply a field by a frequency multiplier m(xi); returns a frequency-side field.
template <class Fn>
inline ComplexField apply_multiplier(const ComplexField& f, Fn&& m) {
  ComplexField F = to_frequency(f);
  const int d = F.grid.d;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) { F.data[idx] *= m(xi, d); });
  return F;
}

// ---------------------------------------------------------------- dyadic indices

struct CriticalIndex {
  int k_lambda = 0;
  std::array<int, 4> I{};
};

// 2^{k-1} < sqrt(lambda) <= 2^k.
inline CriticalIndex critical_index(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("critical_index: lambda must be > 0");
  const double s = std::sqrt(lambda);
  int k = static_cast<int>(std::ceil(std::log2(s)));
  while (std::ldexp(1.0, k) < s) ++k;
  while (std::ldexp(1.0, k - 1) >= s) --k;
  return CriticalIndex{k, {k - 2, k - 1, k, k + 1}};
}

// Annulus label for radius r: 0 for r <= 1, else the j with 2^{j-1} < r <= 2^j.
inline int annulus_of(double r2) {
  if (r2 <= 1.0 * (1.0 + 1e-12)) return 0;
  int j = 1;
  double hi = 4.0;
  while (r2 > hi * (1.0 + 1e-12)) {
    hi *= 4.0;
    ++j;
  }
  return j;
}

// Largest j with 2^j <= L sqrt(d): the annuli that enter the weighted norms.
inline int annulus_top(const Grid& g) {
  const double rmax = g.L * std::sqrt(static_cast<double>(g.d));
  int j = 0;
  while (std::ldexp(1.0, j + 1) <= rmax) ++j;
  return j;
}

// Per-point annulus labels, cached per grid.
inline const std::vector<int>& annulus_labels(const Grid& g) {
  thread_local std::map<std::tuple<int, double, int>, std::vector<int>> cache;
  auto key = std::make_tuple(g.d, g.L, g.N);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<int> lab(g.size());
  for_each_point(g, [&](std::size_t idx, const Vec3& x) { lab[idx] = annulus_of(norm2(x, g.d)); });
  return cache.emplace(key, std::move(lab)).first->second;
}

struct AnnulusMask {
  RealField mask;
  bool truncated = false;
};

inline AnnulusMask annulus_mask(const Grid& g, int j) {
  if (j < 0) throw ParameterError("annulus_mask: j must be >= 0");
  AnnulusMask out;
  out.mask.grid = g;
  out.mask.data.assign(g.size(), 0.0);
  const auto& lab = annulus_labels(g);
  for (std::size_t n = 0; n < lab.size(); ++n) out.mask.data[n] = lab[n] == j ? 1.0 : 0.0;
  out.truncated = std::ldexp(1.0, j) > g.L;
  return out;
}

// ---------------------------------------------------------------- field files

namespace detail {

inline int phys_to_fft(int p, int N) { return (p + N / 2) % N; }

template <class T>
inline T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

// Lexicographic index of the physically ordered layout for an FFT-ordered one.
inline std::vector<std::size_t> physical_order(const Grid& g, Side s) {
  std::vector<std::size_t> perm(g.size());
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    std::size_t p = 0;
    for (int a = 0; a < g.d; ++a) {
      int q = s == Side::frequency ? (i[a] + g.N / 2) % g.N : i[a];
      p = p * g.N + q;
    }
    perm[idx] = p;
  });
  return perm;
}

}  // namespace detail

inline nlohmann::json field_sidecar(const ComplexField& f) {
  nlohmann::json j{{"d", f.grid.d}, {"L", f.grid.L}, {"N", f.grid.N}, {"side", side_name(f.side)}, {"dtype", "c128-le"}};
  if (f.shifted()) j["shift"] = std::vector<double>(f.shift.begin(), f.shift.begin() + f.grid.d);
  return j;
}

// Raw little-endian bytes, physically ordered (frequency side: k = -N/2 ... N/2-1).
inline std::string field_bytes(const ComplexField& f) {
  const auto perm = detail::physical_order(f.grid, f.side);
  std::vector<double> buf(2 * f.size());
  for (std::size_t n = 0; n < f.size(); ++n) {
    buf[2 * perm[n]] = detail::to_le(f.data[n].real());
    buf[2 * perm[n] + 1] = detail::to_le(f.data[n].imag());
  }
  return std::string(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(double));
}

inline ComplexField field_from(const nlohmann::json& side, const std::string& bytes) {
  Grid g;
  std::string s;
  try {
    g = make_grid(side.at("d").get<int>(), side.at("L").get<double>(), side.at("N").get<int>());
    s = side.at("side").get<std::string>();
    if (side.at("dtype").get<std::string>() != "c128-le") throw IoError("field: unsupported dtype");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("field sidecar: ") + e.what());
  }
  if (s != "physical" && s != "frequency") throw IoError("field sidecar: bad side '" + s + "'");
  ComplexField f(g, s == "physical" ? Side::physical : Side::frequency);
  if (side.contains("shift")) {
    auto v = side["shift"].get<std::vector<double>>();
    for (int a = 0; a < g.d && a < static_cast<int>(v.size()); ++a) f.shift[a] = v[a];
  }
  if (bytes.size() != 2 * f.size() * sizeof(double))
    throw IoError("field binary: expected " + std::to_string(2 * f.size() * sizeof(double)) + " bytes, got " +
                  std::to_string(bytes.size()));
  std::vector<double> buf(2 * f.size());
  std::memcpy(buf.data(), bytes.data(), bytes.size());
  const auto perm = detail::physical_order(g, f.side);
  for (std::size_t n = 0; n < f.size(); ++n)
    f.data[n] = cplx(detail::to_le(buf[2 * perm[n]]), detail::to_le(buf[2 * perm[n] + 1]));
  return f;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// `base.json` + `base.bin`.
inline ComplexField read_field(const std::string& base) {
  std::string stem = base;
  for (const char* ext : {".json", ".bin"})
    if (stem.size() > 5 && stem.substr(stem.size() - std::strlen(ext)) == ext) stem.resize(stem.size() - std::strlen(ext));
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(stem + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("field sidecar " + stem + ".json: " + e.what());
  }
  return field_from(side, read_file(stem + ".bin"));
}

}  // namespace lpscat
