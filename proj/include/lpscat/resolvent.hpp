#pragma once
// Outgoing/incoming resolvent (Delta + lambda +- i0)^{-1} with three backends,
// the fundamental solution, and the conjugated inverses for q_tau and p_zeta.
//
// pv_sphere: u = u_R + u_S. With k = sqrt(lambda), a radial cutoff chi equal
// to 1 only at |xi| = k, and h(omega) = fhat(k omega),
//   uhat_R = [fhat - chi h(xi/|xi|)] / (lambda - |xi|^2)     (smooth, on the lattice)
//   u_S(x) = (2pi)^{-d/2} int_{S^{d-1}} h(omega) J(omega.x) domega
//   J(t)   = PV int chi(r) r^{d-1} e^{irt} / (lambda - r^2) dr -+ i pi k^{d-2} e^{ikt} / 2.
// absorption: truncated kernel with k^2 = lambda +- i eps, Richardson in eps.
// green3d: truncated kernel with real k on the doubled box (d = 3).

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpscat/grid.hpp"
#include "lpscat/lp.hpp"
#include "lpscat/norms.hpp"
#include "lpscat/potentials.hpp"

namespace lpscat {

enum class Backend { pv_sphere, absorption, green3d };

inline const char* backend_name(Backend b) {
  switch (b) {
    case Backend::pv_sphere: return "pv_sphere";
    case Backend::absorption: return "absorption";
    case Backend::green3d: return "green3d";
  }
  return "?";
}

inline Backend parse_backend(const std::string& s) {
  if (s == "pv_sphere") return Backend::pv_sphere;
  if (s == "absorption") return Backend::absorption;
  if (s == "green3d") return Backend::green3d;
  throw ParameterError("unknown resolvent backend '" + s + "' (expected pv_sphere, absorption or green3d)");
}

struct ResolventSpec {
  double lambda = 1.0;
  int sign = +1;  // +1 outgoing, -1 incoming
  Backend backend = Backend::pv_sphere;
  int sphere_order = 0;  // 0: chosen from lambda and the box
  double eps0 = 0.0;     // 0: lambda / 10
  int levels = 4;
  bool pad = true;  // pv_sphere: regular part on the doubled box
};

inline void validate(const ResolventSpec& s, int d) {
  std::string err;
  if (!(s.lambda > 0.0) || !std::isfinite(s.lambda)) err += "lambda must be > 0; ";
  if (s.sign != 1 && s.sign != -1) err += "sign must be +1 or -1; ";
  if (s.sphere_order != 0 && s.sphere_order < 8) err += "sphere order must be >= 8; ";
  if (s.eps0 < 0.0 || !std::isfinite(s.eps0)) err += "eps0 must be >= 0; ";
  if (s.levels < 2) err += "absorption needs at least 2 levels; ";
  if (s.backend == Backend::green3d && d != 3) err += "green3d requires d = 3; ";
  if (!err.empty()) throw ParameterError("resolvent: " + err.substr(0, err.size() - 2));
}

// ---------------------------------------------------------------- special functions

namespace special {

inline constexpr double kEuler = 0.57721566490153286061;

// J0, J1, Y0, Y1 by their power series (complex argument, moderate |z|).
struct Bessel01 {
  cplx j0, j1, y0, y1;
};

inline Bessel01 bessel01(cplx z) {
  const cplx q = -0.25 * z * z;
  cplx t0 = 1.0, t1 = 1.0;  // (-z^2/4)^m / (m!)^2 and / (m!(m+1)!)
  cplx j0 = 0.0, s1 = 0.0, sy0 = 0.0, sy1 = 0.0;
  double hm = 0.0;  // harmonic number H_m
  for (int m = 0; m < 400; ++m) {
    if (m > 0) {
      t0 *= q / (double(m) * m);
      t1 *= q / (double(m) * (m + 1));
      hm += 1.0 / m;
    }
    j0 += t0;
    s1 += t1;
    sy0 += hm * t0;
    // psi(m+1) + psi(m+2) = -2 gamma + 2 H_m + 1/(m+1)
    sy1 += (-2.0 * kEuler + 2.0 * hm + 1.0 / (m + 1)) * t1;
    if (m > 4 && std::abs(t0) < 1e-18 * std::abs(j0) && std::abs(t1) < 1e-18 * std::abs(s1)) break;
  }
  const cplx half = 0.5 * z;
  const cplx lg = std::log(half);
  Bessel01 b;
  b.j0 = j0;
  b.j1 = half * s1;
  // Y0 = (2/pi)(ln(z/2) + gamma) J0 - (2/pi) sum H_m (-z^2/4)^m/(m!)^2
  b.y0 = (2.0 / kPi) * ((lg + kEuler) * j0 - sy0);
  b.y1 = -2.0 / (kPi * z) + (2.0 / kPi) * lg * b.j1 - (1.0 / kPi) * half * sy1;
  return b;
}

// H^{(1)}_0 and H^{(1)}_1.
inline std::pair<cplx, cplx> hankel1_01(cplx z) {
  if (z.imag() == 0.0 && z.real() > 0.0) {
    const double x = z.real();
    return {cplx(std::cyl_bessel_j(0.0, x), std::cyl_neumann(0.0, x)),
            cplx(std::cyl_bessel_j(1.0, x), std::cyl_neumann(1.0, x))};
  }
  const auto b = bessel01(z);
  const cplx i(0.0, 1.0);
  return {b.j0 + i * b.y0, b.j1 + i * b.y1};
}

// (e^{i z R} - 1) / z, stable for small |z R|.
inline cplx expm1_ratio(cplx z, double R) {
  const cplx a = cplx(0.0, 1.0) * z * R;
  if (std::abs(a) < 1e-3) return cplx(0.0, R) * (1.0 + a / 2.0 + a * a / 6.0 + a * a * a / 24.0);
  return (std::exp(a) - 1.0) / z;
}

}  // namespace special

// k with k^2 = lambda + i sign eps and Im k >= 0; eps = 0 gives sign*sqrt(lambda).
inline cplx wave_number(double lambda, int sign, double eps) {
  if (eps == 0.0) return cplx(sign * std::sqrt(lambda), 0.0);
  cplx k = std::sqrt(cplx(lambda, sign * eps));
  if (k.imag() < 0.0) k = -k;
  return k;
}

// Free-space fundamental solution Phi (Delta + k^2) Phi = delta and dPhi/dr.
inline std::pair<cplx, cplx> green_radial(int d, cplx k, double r) {
  const cplx i(0.0, 1.0);
  if (d == 3) {
    const cplx e = std::exp(i * k * r);
    return {-e / (4.0 * kPi * r), -e * (i * k * r - 1.0) / (4.0 * kPi * r * r)};
  }
  // d = 2: -(i/4) H0(kr) for Im k >= 0 or k > 0; the incoming real case is the conjugate.
  if (k.imag() == 0.0 && k.real() < 0.0) {
    auto [g, dg] = green_radial(2, -k, r);
    return {std::conj(g), std::conj(dg)};
  }
  auto [h0, h1] = special::hankel1_01(k * r);
  return {-0.25 * i * h0, 0.25 * i * k * h1};
}

// Fourier multiplier of the kernel truncated to |x| < R (unnormalized transform).
inline cplx truncated_kernel(int d, double s, cplx k, double R) {
  const cplx i(0.0, 1.0);
  if (d == 3) {
    if (s == 0.0) {
      const cplx e = std::exp(i * k * R);
      return -(e * (R / (i * k) + 1.0 / (k * k)) - 1.0 / (k * k));
    }
    return (special::expm1_ratio(k + s, R) - special::expm1_ratio(k - s, R)) / (2.0 * s);
  }
  auto eval = [&](double sv) {
    auto [g, dg] = green_radial(2, k, R);
    const double J0 = std::cyl_bessel_j(0.0, sv * R), J1 = std::cyl_bessel_j(1.0, sv * R);
    return (1.0 + 2.0 * kPi * R * (g * (-sv * J1) - dg * J0)) / (k * k - sv * sv);
  };
  const double kk = std::abs(k);
  if (std::abs(k * k - s * s) < 1e-6 * kk * kk) {
    const double del = 1e-4 * kk;
    return 0.5 * (eval(s + del) + eval(s - del));
  }
  return eval(s);
}

// ---------------------------------------------------------------- padding

inline Grid doubled(const Grid& g) { return Grid{g.d, 2.0 * g.L, 2 * g.N}; }

inline ComplexField pad_physical(const ComplexField& f) {
  const ComplexField u = to_physical(f);
  const Grid& g = u.grid;
  ComplexField big(doubled(g), Side::physical);
  const int N = g.N, M = 2 * N, o = N / 2;
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    std::size_t p = 0;
    for (int a = 0; a < g.d; ++a) p = p * M + (i[a] + o);
    big.data[p] = u.data[idx];
  });
  return big;
}

inline ComplexField crop_physical(const ComplexField& big, const Grid& g) {
  const ComplexField u = to_physical(big);
  ComplexField out(g, Side::physical);
  const int N = g.N, M = 2 * N, o = N / 2;
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    std::size_t p = 0;
    for (int a = 0; a < g.d; ++a) p = p * M + (i[a] + o);
    out.data[idx] = u.data[p];
  });
  return out;
}

// ---------------------------------------------------------------- DTFT of samples

namespace detail {

// Samples restricted to the bounding cube of their significant values.
struct SampleBox {
  Grid g;
  std::array<int, 3> lo{0, 0, 0}, n{1, 1, 1};
  std::vector<cplx> v;  // lexicographic within the cube
  double radius = 0.0;  // max |x| over significant samples
};

inline SampleBox sample_box(const ComplexField& f, double rel = 1e-16) {
  const ComplexField u = to_physical(f);
  const Grid& g = u.grid;
  double mx = 0.0;
  for (const auto& v : u.data) mx = std::max(mx, std::abs(v));
  SampleBox b;
  b.g = g;
  std::array<int, 3> lo{g.N, g.N, g.N}, hi{-1, -1, -1};
  for_each_index(g, [&](std::size_t idx, const std::array<int, 3>& i) {
    if (std::abs(u.data[idx]) <= rel * mx || mx == 0.0) return;
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      lo[a] = std::min(lo[a], i[a]);
      hi[a] = std::max(hi[a], i[a]);
      r2 += g.coord(i[a]) * g.coord(i[a]);
    }
    b.radius = std::max(b.radius, std::sqrt(r2));
  });
  if (hi[0] < 0) {
    b.n = {0, 0, 0};
    return b;
  }
  std::size_t tot = 1;
  for (int a = 0; a < g.d; ++a) {
    b.lo[a] = lo[a];
    b.n[a] = hi[a] - lo[a] + 1;
    tot *= b.n[a];
  }
  b.v.resize(tot);
  std::size_t k = 0;
  if (g.d == 2) {
    for (int i = 0; i < b.n[0]; ++i)
      for (int j = 0; j < b.n[1]; ++j) b.v[k++] = u.data[(std::size_t)(lo[0] + i) * g.N + lo[1] + j];
  } else {
    for (int i = 0; i < b.n[0]; ++i)
      for (int j = 0; j < b.n[1]; ++j)
        for (int l = 0; l < b.n[2]; ++l)
          b.v[k++] = u.data[((std::size_t)(lo[0] + i) * g.N + lo[1] + j) * g.N + lo[2] + l];
  }
  return b;
}

// (2pi)^{-d/2} dx^d sum_n f(x_n) e^{-i eta.x_n}.
inline cplx dtft(const SampleBox& b, const Vec3& eta) {
  if (b.v.empty()) return 0.0;
  const Grid& g = b.g;
  std::array<std::vector<cplx>, 3> e;
  for (int a = 0; a < g.d; ++a) {
    e[a].resize(b.n[a]);
    const cplx step = std::polar(1.0, -eta[a] * g.dx());
    cplx cur = std::polar(1.0, -eta[a] * g.coord(b.lo[a]));
    for (int i = 0; i < b.n[a]; ++i) {
      e[a][i] = cur;
      cur *= step;
    }
    // Refresh against drift on long runs.
    for (int i = 0; i < b.n[a]; i += 64) e[a][i] = std::polar(1.0, -eta[a] * g.coord(b.lo[a] + i));
  }
  cplx tot = 0.0;
  const cplx* p = b.v.data();
  if (g.d == 2) {
    for (int i = 0; i < b.n[0]; ++i) {
      cplx row = 0.0;
      for (int j = 0; j < b.n[1]; ++j) row += p[j] * e[1][j];
      p += b.n[1];
      tot += e[0][i] * row;
    }
  } else {
    for (int i = 0; i < b.n[0]; ++i) {
      cplx plane = 0.0;
      for (int j = 0; j < b.n[1]; ++j) {
        cplx row = 0.0;
        for (int l = 0; l < b.n[2]; ++l) row += p[l] * e[2][l];
        p += b.n[2];
        plane += e[1][j] * row;
      }
      tot += e[0][i] * plane;
    }
  }
  return tot * std::pow(2.0 * kPi, -0.5 * g.d) * g.cell();
}

// Cubic Hermite table of J(t) and J'(t) on [-T, T].
struct JTable {
  double t0 = 0.0, dt = 1.0;
  std::vector<cplx> J, dJ;

  cplx operator()(double t) const {
    double u = (t - t0) / dt;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, static_cast<int>(J.size()) - 2);
    const double s = u - i, s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * J[i] + (s3 - 2 * s2 + s) * dt * dJ[i] + (-2 * s3 + 3 * s2) * J[i + 1] +
           (s3 - s2) * dt * dJ[i + 1];
  }
};

struct ShellCutoff {
  double k, w;
  LPBasis b;
  // chi(k) = 1, support |r - k| < w, flat to all orders at r = k.
  double operator()(double r) const { return b.phi(1.0 + std::abs(r - k) / w); }
  double rmax() const { return k + w; }
};

inline JTable make_jtable(int d, const ShellCutoff& chi, int sign, double T) {
  const double k = chi.k;
  const auto gl = gauss_legendre(16);
  const int panels = 16;
  std::vector<double> rr, ww;
  const double a = k - chi.w, h = 2.0 * chi.w / panels;
  for (int p = 0; p < panels; ++p)
    for (int q = 0; q < 16; ++q) {
      rr.push_back(a + h * (p + 0.5 * (gl.x[q] + 1.0)));
      ww.push_back(0.5 * h * gl.w[q]);
    }
  std::vector<double> cr(rr.size());
  for (std::size_t q = 0; q < rr.size(); ++q) cr[q] = chi(rr[q]) * std::pow(rr[q], d - 1) / (k + rr[q]);
  JTable t;
  t.dt = 0.0125 / chi.rmax();
  const int n = static_cast<int>(std::ceil(2.0 * T / t.dt)) + 2;
  t.t0 = -T - t.dt;
  t.J.resize(n);
  t.dJ.resize(n);
  const cplx i(0.0, 1.0);
  const double hk = std::pow(k, d - 1) / (2.0 * k);
  for (int m = 0; m < n; ++m) {
    const double tt = t.t0 + m * t.dt;
    const cplx Hk = hk * std::polar(1.0, k * tt);
    const cplx dHk = i * k * Hk;
    cplx s = 0.0, ds = 0.0;
    for (std::size_t q = 0; q < rr.size(); ++q) {
      const cplx e = std::polar(1.0, rr[q] * tt);
      const cplx H = cr[q] * e, dH = i * rr[q] * H;
      s += ww[q] * (H - Hk) / (k - rr[q]);
      ds += ww[q] * (dH - dHk) / (k - rr[q]);
    }
    const cplx delta = -static_cast<double>(sign) * i * kPi * hk;
    t.J[m] = s + delta * std::polar(1.0, k * tt);
    t.dJ[m] = ds + delta * i * k * std::polar(1.0, k * tt);
  }
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------- results

struct Resolution {
  ComplexField u;                 // physical samples on the input grid
  std::optional<ComplexField> big;  // green3d: frequency field on the doubled box
  nlohmann::json info = nlohmann::json::object();

  // Off-grid value; exact band-limited evaluation of the doubled-box field when
  // present, else the Fourier interpolant of u.
  cplx at(const Vec3& x) const { return big ? eval_at(*big, x) : eval_points(u, {x})[0]; }
  std::vector<cplx> at(const std::vector<Vec3>& xs) const {
    if (!big) return eval_points(u, xs);
    std::vector<cplx> out(xs.size());
    for (std::size_t n = 0; n < xs.size(); ++n) out[n] = eval_at(*big, xs[n]);
    return out;
  }
  // Gradient at x via the i xi multiplier on the stored spectrum.
  std::array<cplx, 3> grad(const Vec3& x) const {
    const ComplexField F = big ? *big : to_frequency(u);
    std::array<cplx, 3> out{0.0, 0.0, 0.0};
    for (int a = 0; a < F.grid.d; ++a) {
      ComplexField D = apply_multiplier(F, [&](const Vec3& xi, int) { return cplx(0.0, xi[a]); });
      out[a] = eval_at(D, x);
    }
    return out;
  }
};

// ---------------------------------------------------------------- backends

namespace detail {

inline void check_finite(const ComplexField& f) {
  for (const auto& v : f.data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DivergenceError("resolve: non-finite input");
}

inline Resolution resolve_pv(const ComplexField& f, const ResolventSpec& spec) {
  const Grid& g = f.grid;
  const int d = g.d;
  const double lambda = spec.lambda, k = std::sqrt(lambda);
  const ShellCutoff chi{k, 0.9 * k, LPBasis{}};
  const SampleBox sb = sample_box(f);

  // Lattice for the regular part.
  ComplexField F = spec.pad ? to_frequency(pad_physical(f)) : to_frequency(f);
  const Grid& gl = F.grid;
  double fmax = 0.0;
  for (const auto& v : F.data) fmax = std::max(fmax, std::abs(v));

  for_each_mode(gl, [&](std::size_t, const Vec3& xi) {
    if (std::abs(lambda - norm2(xi, d)) < 1e-12 * lambda)
      throw RegimeError("resonant lattice collision: lambda = " + std::to_string(lambda) +
                        " equals a lattice |xi|^2; perturb lambda or change L");
  });

  // Sphere quadrature and the samples of fhat on S_lambda.
  const double T = std::sqrt(static_cast<double>(d)) * g.L;
  int n = spec.sphere_order;
  if (n == 0) n = std::max(8, static_cast<int>(std::ceil(chi.rmax() * (T + sb.radius) / 2.0)) + 8);
  const Hypersurface S = sphere_quadrature(d, 1.0, {0, 0, 0}, d == 3 ? n : 2 * n);
  std::vector<cplx> h(S.size());
  double hmax = 0.0, mass = 0.0;
  for (std::size_t q = 0; q < S.size(); ++q) {
    Vec3 eta{0, 0, 0};
    for (int a = 0; a < d; ++a) eta[a] = k * S.nodes[q][a];
    h[q] = dtft(sb, eta);
    hmax = std::max(hmax, std::abs(h[q]));
    mass += S.weights[q] * std::pow(k, d - 1) * std::norm(h[q]);
  }
  const bool singular = hmax > 1e-11 * fmax;

  // Regular part.
  for_each_mode(gl, [&](std::size_t idx, const Vec3& xi) {
    const double r2 = norm2(xi, d), r = std::sqrt(r2);
    cplx num = F.data[idx];
    const double c = singular && r > 0.0 ? chi(r) : 0.0;
    if (c > 0.0) {
      Vec3 eta{0, 0, 0};
      for (int a = 0; a < d; ++a) eta[a] = k * xi[a] / r;
      num -= c * dtft(sb, eta);
    }
    F.data[idx] = num / (lambda - r2);
  });
  Resolution res;
  res.u = spec.pad ? crop_physical(F, g) : to_physical(F);

  // Singular part on the grid points.
  if (singular) {
    const JTable J = make_jtable(d, chi, spec.sign, T * (1 + 1e-9));
    const double c = std::pow(2.0 * kPi, -0.5 * d);
    std::vector<Vec3> xs(g.size());
    for_each_point(g, [&](std::size_t idx, const Vec3& x) { xs[idx] = x; });
    for (std::size_t q = 0; q < S.size(); ++q) {
      const cplx a = c * S.weights[q] * h[q];
      const Vec3& w = S.nodes[q];
      for (std::size_t idx = 0; idx < xs.size(); ++idx) {
        double t = 0.0;
        for (int b = 0; b < d; ++b) t += w[b] * xs[idx][b];
        res.u.data[idx] += a * J(t);
      }
    }
  }
  res.info = {{"backend", "pv_sphere"},
              {"shell_mass", std::sqrt(mass)},
              {"sphere_order", n},
              {"sphere_nodes", S.size()},
              {"singular_part", singular},
              {"padded", spec.pad}};
  return res;
}

// Lattice samples of truncated_kernel, memoized: iterative solvers reuse the
// same (grid, k, R) many times.
inline std::shared_ptr<const std::vector<cplx>> kernel_table(const Grid& g, cplx k, double R) {
  using Key = std::tuple<int, double, int, double, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const std::vector<cplx>>> cache;
  const Key key{g.d, g.L, g.N, k.real(), k.imag(), R};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  // |xi|^2 is an integer multiple of dxi^2; tabulate per distinct value.
  const double dxi2 = g.dxi() * g.dxi();
  std::map<long, cplx> radial;
  auto t = std::make_shared<std::vector<cplx>>(g.size());
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    const long n = std::lround(norm2(xi, g.d) / dxi2);
    auto it = radial.find(n);
    if (it == radial.end()) it = radial.emplace(n, truncated_kernel(g.d, std::sqrt(n * dxi2), k, R)).first;
    (*t)[idx] = it->second;
  });
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() >= 16) cache.clear();
  cache.emplace(key, t);
  return t;
}

// Truncated-kernel convolution on the lattice of F; returns frequency field.
inline ComplexField truncated_convolution(const ComplexField& F, cplx k, double R) {
  ComplexField out = F;
  const auto t = kernel_table(F.grid, k, R);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= (*t)[i];
  return out;
}

inline Resolution resolve_absorption(const ComplexField& f, const ResolventSpec& spec) {
  const Grid& g = f.grid;
  const double eps0 = spec.eps0 > 0.0 ? spec.eps0 : spec.lambda / 10.0;
  const ComplexField F = to_frequency(f);
  const int M = spec.levels;
  std::vector<std::vector<ComplexField>> A(M);
  for (int j = 0; j < M; ++j) {
    const double eps = eps0 / std::ldexp(1.0, j);
    A[j].push_back(to_physical(truncated_convolution(F, wave_number(spec.lambda, spec.sign, eps), g.L)));
  }
  for (int m = 1; m < M; ++m)
    for (int j = 0; j + m < M; ++j) {
      const double c = std::ldexp(1.0, m);
      ComplexField e = A[j + 1][m - 1];
      for (std::size_t i = 0; i < e.size(); ++i) e.data[i] = (c * e.data[i] - A[j][m - 1].data[i]) / (c - 1.0);
      A[j].push_back(std::move(e));
    }
  Resolution res;
  res.u = A[0][M - 1];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < res.u.size(); ++i) {
    num += std::norm(res.u.data[i] - A[1][M - 2].data[i]);
    den += std::norm(res.u.data[i]);
  }
  const auto sb = sample_box(f, 1e-14);
  res.info = {{"backend", "absorption"},
              {"eps0", eps0},
              {"levels", M},
              {"extrapolation_residual", den > 0.0 ? std::sqrt(num / den) : 0.0},
              {"valid_radius", g.L - sb.radius}};
  return res;
}

inline Resolution resolve_green3d(const ComplexField& f, const ResolventSpec& spec) {
  const Grid& g = f.grid;
  ComplexField big = truncated_convolution(to_frequency(pad_physical(f)), wave_number(spec.lambda, spec.sign, 0.0),
                                           2.0 * g.L);
  Resolution res;
  res.u = crop_physical(big, g);
  res.big = std::move(big);
  res.info = {{"backend", "green3d"}, {"truncation_radius", 2.0 * g.L}};
  return res;
}

}  // namespace detail

inline Resolution resolve_full(const ComplexField& f, const ResolventSpec& spec) {
  validate(spec, f.grid.d);
  if (f.shifted()) throw ParameterError("resolve: Bloch-shifted fields are not supported");
  detail::check_finite(f);
  switch (spec.backend) {
    case Backend::pv_sphere: return detail::resolve_pv(f, spec);
    case Backend::absorption: return detail::resolve_absorption(f, spec);
    case Backend::green3d: return detail::resolve_green3d(f, spec);
  }
  throw ParameterError("resolve: unknown backend");
}

inline ComplexField resolve(const ComplexField& f, const ResolventSpec& spec) { return resolve_full(f, spec).u; }

// ---------------------------------------------------------------- sources

// Unit-mass Gaussian of width sigma = h/2 centered at y; h defaults to 3 dx.
inline ComplexField mollified_delta(const Grid& g, const Vec3& y, double h = 0.0) {
  if (h == 0.0) h = 3.0 * g.dx();
  if (h < 2.0 * g.dx() * (1 - 1e-12)) throw ParameterError("mollification width must be >= 2 dx");
  const double sigma = 0.5 * h;
  for (int a = 0; a < g.d; ++a)
    if (std::abs(y[a]) + 6.0 * sigma > g.L)
      throw ParameterError("source point too close to the box boundary (wrap-around)");
  const double c = std::pow(2.0 * kPi * sigma * sigma, -0.5 * g.d);
  return sample(g, [&](const Vec3& x) {
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
    return cplx(c * std::exp(-0.5 * r2 / (sigma * sigma)));
  });
}

// Resolve applied to the mollified delta at y.
inline Resolution fundamental_solution(const Grid& g, const Vec3& y, const ResolventSpec& spec, double h = 0.0) {
  return resolve_full(mollified_delta(g, y, h), spec);
}

// Closed-form Phi^{+-}_lambda(x - y).
inline cplx fundamental_closed(int d, double lambda, int sign, const Vec3& x, const Vec3& y) {
  double r2 = 0.0;
  for (int a = 0; a < d; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
  return green_radial(d, wave_number(lambda, sign, 0.0), std::sqrt(r2)).first;
}

// ---------------------------------------------------------------- conjugated inverses

namespace detail {

template <class Sym>
inline ComplexField divide_symbol(const ComplexField& f, double floor, Sym&& sym, const char* name) {
  ComplexField F = to_frequency(f);
  const int d = F.grid.d;
  double tot = 0.0, bad = 0.0;
  for (const auto& v : F.data) tot += std::norm(v);
  int nbad = 0;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) {
    const cplx s = sym(xi, d);
    if (std::abs(s) < floor) {
      bad += std::norm(F.data[idx]);
      ++nbad;
      F.data[idx] = 0.0;
    } else {
      F.data[idx] /= s;
    }
  });
  if (bad > 1e-20 * tot)
    throw RegimeError(std::string("symbol singularity: ") + name + " vanishes on " + std::to_string(nbad) +
                      " mode(s) carrying relative mass " + std::to_string(std::sqrt(bad / tot)));
  return F;
}

}  // namespace detail

// uhat = fhat / q_tau; frequency-side result.
inline ComplexField conj_resolve_tau(const ComplexField& f, double tau) {
  if (!(tau > 0.0)) throw ParameterError("conj_resolve_tau: tau must be > 0");
  return detail::divide_symbol(f, epsilon_floor(tau), [&](const Vec3& xi, int d) { return q_tau(tau, xi, d); },
                               "q_tau");
}

inline cplx bilinear(const CVec3& a, const CVec3& b, int d) {
  cplx s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

// uhat = fhat / p_zeta on the (possibly shifted) lattice of f.
inline ComplexField conj_resolve_zeta(const ComplexField& f, const CVec3& zeta, double lambda) {
  const int d = f.grid.d;
  const cplx zz = bilinear(zeta, zeta, d);
  const double az = cnorm(zeta, d);
  if (std::abs(zz + lambda) > 1e-12 * std::max(1.0, az * az))
    throw ParameterError("conj_resolve_zeta: zeta.zeta must equal -lambda");
  return detail::divide_symbol(f, epsilon_floor(az), [&](const Vec3& xi, int dd) { return p_zeta(zeta, xi, dd); },
                               "p_zeta");
}

}  // namespace lpscat
