#pragma once
// V = V0 + alpha dsigma: grid potentials, surface quadratures for the shell,
// exact off-grid evaluation of band-limited fields, and the shell pairing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpscat/grid.hpp"

namespace lpscat {

// ---------------------------------------------------------------- quadrature

struct GaussRule {
  std::vector<double> x, w;
};

// Gauss-Legendre on [-1, 1] by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw ParameterError("gauss_legendre: n must be >= 1");
  if (n == 1) return GaussRule{{0.0}, {2.0}};
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

// ---------------------------------------------------------------- types

struct GridPotential {
  ComplexField field;  // physical side, real values
  double support_radius = 0.0;
};

enum class SurfaceKind { sphere, polyhedral };

struct Hypersurface {
  int d = 3;
  SurfaceKind kind = SurfaceKind::sphere;
  nlohmann::json params;
  std::vector<Vec3> nodes;
  std::vector<double> weights;
  std::vector<Vec3> normals;

  std::size_t size() const { return nodes.size(); }
  double area() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
  double max_radius() const {
    double m = 0.0;
    for (const auto& p : nodes) m = std::max(m, std::sqrt(norm2(p, d)));
    return m;
  }
};

struct DeltaShell {
  Hypersurface surface;
  std::vector<double> alpha;

  double alpha_inf() const {
    double m = 0.0;
    for (double a : alpha) m = std::max(m, std::abs(a));
    return m;
  }
};

// ---------------------------------------------------------------- constructors

inline GridPotential make_grid_potential(const ComplexField& v, double R0) {
  ComplexField f = to_physical(v);
  double scale = 0.0;
  for (const auto& z : f.data) scale = std::max(scale, std::abs(z));
  double rmax = 0.0;
  bool outside = false;
  for_each_point(f.grid, [&](std::size_t idx, const Vec3& x) {
    const double a = std::abs(f.data[idx]);
    if (std::abs(f.data[idx].imag()) > 1e-12 * std::max(scale, 1e-300))
      throw ParameterError("grid potential must be real-valued");
    f.data[idx] = cplx(f.data[idx].real(), 0.0);
    if (a > 0.0) {
      const double r = std::sqrt(norm2(x, f.grid.d));
      rmax = std::max(rmax, r);
      if (r > R0 * (1 + 1e-12)) outside = true;
    }
  });
  if (outside) throw ParameterError("grid potential not supported in |x| <= R0 = " + std::to_string(R0));
  return GridPotential{f, rmax};
}

// A*exp(1 - 1/(1 - (r/R)^2)) for r < R: smooth, sup A at the origin.
inline GridPotential bump_potential(const Grid& g, double amplitude, double R, const Vec3& center = {0, 0, 0}) {
  if (!(R > 0.0)) throw ParameterError("bump radius must be > 0");
  auto f = sample(g, [&](const Vec3& x) {
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    const double t = r2 / (R * R);
    return cplx(t < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0, 0.0);
  });
  double c = 0.0;
  for (int a = 0; a < g.d; ++a) c += center[a] * center[a];
  return GridPotential{f, R + std::sqrt(c)};
}

// amplitude * exp(-|x - c|^2 / (2 s^2)), cut where it falls below 1e-16 of the
// peak. Spectrally resolved once s >= 2.5 dx, unlike the compact bump.
inline GridPotential gaussian_potential(const Grid& g, double amplitude, double s, const Vec3& center = {0, 0, 0}) {
  if (!(s > 0.0)) throw ParameterError("gaussian width must be > 0");
  const double R = s * std::sqrt(2.0 * std::log(1e16));
  auto f = sample(g, [&](const Vec3& x) {
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    return cplx(r2 < R * R ? amplitude * std::exp(-0.5 * r2 / (s * s)) : 0.0, 0.0);
  });
  double c = 0.0;
  for (int a = 0; a < g.d; ++a) c += center[a] * center[a];
  return GridPotential{f, R + std::sqrt(c)};
}

inline GridPotential zero_potential(const Grid& g) { return GridPotential{ComplexField(g, Side::physical), 0.0}; }

inline bool is_zero(const GridPotential& v) {
  for (const auto& z : v.field.data)
    if (z != cplx(0.0)) return false;
  return true;
}

inline bool is_zero(const DeltaShell& s) {
  for (double a : s.alpha)
    if (a != 0.0) return false;
  return true;
}

namespace detail {

inline void check_inside(const Hypersurface& s, double R0) {
  if (s.max_radius() > R0 * (1 + 1e-12))
    throw ParameterError("surface leaves B0: max |node| = " + std::to_string(s.max_radius()) +
                         " > R0 = " + std::to_string(R0));
}

}  // namespace detail

// d=3: Gauss-Legendre in cos(theta) (n nodes) times 2n equispaced longitudes.
// d=2: n equispaced points.
inline Hypersurface sphere_quadrature(int d, double r, const Vec3& center, int n,
                                      double R0 = std::numeric_limits<double>::infinity()) {
  if (!(r > 0.0)) throw ParameterError("sphere radius must be > 0");
  if (n < 1) throw ParameterError("sphere resolution must be >= 1");
  if (d != 2 && d != 3) throw ParameterError("sphere_quadrature: d must be 2 or 3");
  Hypersurface s;
  s.d = d;
  s.kind = SurfaceKind::sphere;
  s.params = {{"r", r}, {"center", std::vector<double>(center.begin(), center.begin() + d)}, {"n", n}};
  if (d == 2) {
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * i / n;
      const Vec3 nu{std::cos(t), std::sin(t), 0.0};
      s.nodes.push_back({center[0] + r * nu[0], center[1] + r * nu[1], 0.0});
      s.normals.push_back(nu);
      s.weights.push_back(2.0 * kPi * r / n);
    }
  } else {
    const auto gl = gauss_legendre(n);
    const int m = 2 * n;
    for (int i = 0; i < n; ++i) {
      const double ct = gl.x[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int k = 0; k < m; ++k) {
        const double p = 2.0 * kPi * (k + 0.5) / m;
        const Vec3 nu{st * std::cos(p), st * std::sin(p), ct};
        s.nodes.push_back({center[0] + r * nu[0], center[1] + r * nu[1], center[2] + r * nu[2]});
        s.normals.push_back(nu);
        s.weights.push_back(r * r * gl.w[i] * 2.0 * kPi / m);
      }
    }
  }
  detail::check_inside(s, R0);
  return s;
}

// Axis-aligned box with half-sides h, tensor Gauss-Legendre (n per edge) on each face.
inline Hypersurface box_quadrature(int d, const Vec3& half, const Vec3& center, int n,
                                   double R0 = std::numeric_limits<double>::infinity()) {
  if (d != 2 && d != 3) throw ParameterError("box_quadrature: d must be 2 or 3");
  for (int a = 0; a < d; ++a)
    if (!(half[a] > 0.0)) throw ParameterError("box half-sides must be > 0");
  if (n < 1) throw ParameterError("box resolution must be >= 1");
  Hypersurface s;
  s.d = d;
  s.kind = SurfaceKind::polyhedral;
  s.params = {{"half", std::vector<double>(half.begin(), half.begin() + d)},
              {"center", std::vector<double>(center.begin(), center.begin() + d)},
              {"n", n}};
  const auto gl = gauss_legendre(n);
  for (int a = 0; a < d; ++a) {
    for (int sgn : {-1, 1}) {
      Vec3 nu{0, 0, 0};
      nu[a] = sgn;
      const int b = (a + 1) % d, c = (a + 2) % d;
      if (d == 2) {
        for (int i = 0; i < n; ++i) {
          Vec3 p = center;
          p[a] += sgn * half[a];
          p[b] += half[b] * gl.x[i];
          s.nodes.push_back(p);
          s.normals.push_back(nu);
          s.weights.push_back(half[b] * gl.w[i]);
        }
      } else {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            Vec3 p = center;
            p[a] += sgn * half[a];
            p[b] += half[b] * gl.x[i];
            p[c] += half[c] * gl.x[j];
            s.nodes.push_back(p);
            s.normals.push_back(nu);
            s.weights.push_back(half[b] * half[c] * gl.w[i] * gl.w[j]);
          }
      }
    }
  }
  detail::check_inside(s, R0);
  return s;
}

inline DeltaShell constant_shell(const Hypersurface& s, double alpha) {
  return DeltaShell{s, std::vector<double>(s.size(), alpha)};
}

// ---------------------------------------------------------------- surface files

inline nlohmann::json shell_to_json(const DeltaShell& sh) {
  const auto& s = sh.surface;
  auto vec = [&](const Vec3& v) { return std::vector<double>(v.begin(), v.begin() + s.d); };
  nlohmann::json j;
  j["kind"] = s.kind == SurfaceKind::sphere ? "sphere" : "polyhedral";
  j["d"] = s.d;
  j["params"] = s.params;
  j["nodes"] = nlohmann::json::array();
  j["normals"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    j["nodes"].push_back(vec(s.nodes[i]));
    j["normals"].push_back(vec(s.normals[i]));
  }
  j["weights"] = s.weights;
  j["alpha"] = sh.alpha;
  return j;
}

inline DeltaShell shell_from_json(const nlohmann::json& j) {
  DeltaShell sh;
  try {
    auto& s = sh.surface;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "sphere" && kind != "polyhedral") throw ParameterError("surface kind must be sphere or polyhedral");
    s.kind = kind == "sphere" ? SurfaceKind::sphere : SurfaceKind::polyhedral;
    s.params = j.value("params", nlohmann::json::object());
    const auto nodes = j.at("nodes").get<std::vector<std::vector<double>>>();
    const auto normals = j.at("normals").get<std::vector<std::vector<double>>>();
    s.weights = j.at("weights").get<std::vector<double>>();
    sh.alpha = j.at("alpha").get<std::vector<double>>();
    s.d = j.value("d", nodes.empty() ? 3 : static_cast<int>(nodes[0].size()));
    if (nodes.size() != normals.size() || nodes.size() != s.weights.size() || nodes.size() != sh.alpha.size())
      throw ParameterError("surface file: nodes, normals, weights and alpha must have equal length");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (static_cast<int>(nodes[i].size()) != s.d || static_cast<int>(normals[i].size()) != s.d)
        throw ParameterError("surface file: point dimension mismatch");
      Vec3 p{0, 0, 0}, q{0, 0, 0};
      for (int a = 0; a < s.d; ++a) p[a] = nodes[i][a], q[a] = normals[i][a];
      s.nodes.push_back(p);
      s.normals.push_back(q);
      if (!(s.weights[i] > 0.0)) throw ParameterError("surface file: weights must be positive");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("surface file: ") + e.what());
  }
  return sh;
}

// ---------------------------------------------------------------- off-grid evaluation

namespace detail {

// Per-axis phase tables e^{+-i xi_i x_a}; the unshifted Nyquist mode uses cos.
inline std::vector<cplx> axis_phases(const Grid& g, double shift, double x, double sign) {
  std::vector<cplx> e(g.N);
  const double s = g.dxi();
  for (int i = 0; i < g.N; ++i) {
    const double xi = s * g.wave(i) + shift;
    if (i == g.N / 2 && shift == 0.0)
      e[i] = std::cos(xi * x);
    else
      e[i] = std::polar(1.0, sign * xi * x);
  }
  return e;
}

}  // namespace detail

// u(y) = (2pi)^{-d/2} sum_k uhat_k e^{i xi_k.y} dxi^d: exact for band-limited u.
inline cplx eval_at(const ComplexField& F, const Vec3& y) {
  const Grid& g = F.grid;
  const int N = g.N;
  std::array<std::vector<cplx>, 3> e;
  for (int a = 0; a < g.d; ++a) e[a] = detail::axis_phases(g, F.shift[a], y[a], +1.0);
  cplx total = 0.0;
  if (g.d == 2) {
    for (int i = 0; i < N; ++i) {
      cplx row = 0.0;
      const cplx* p = F.data.data() + static_cast<std::size_t>(i) * N;
      for (int j = 0; j < N; ++j) row += p[j] * e[1][j];
      total += e[0][i] * row;
    }
  } else {
    for (int i = 0; i < N; ++i) {
      cplx plane = 0.0;
      for (int j = 0; j < N; ++j) {
        cplx row = 0.0;
        const cplx* p = F.data.data() + (static_cast<std::size_t>(i) * N + j) * N;
        for (int k = 0; k < N; ++k) row += p[k] * e[2][k];
        plane += e[1][j] * row;
      }
      total += e[0][i] * plane;
    }
  }
  return total * std::pow(2.0 * kPi, -0.5 * g.d) * g.dcell();
}

inline std::vector<cplx> eval_points(const ComplexField& u, const std::vector<Vec3>& pts) {
  const ComplexField F = to_frequency(u);
  std::vector<cplx> out(pts.size());
  for (std::size_t n = 0; n < pts.size(); ++n) out[n] = eval_at(F, pts[n]);
  return out;
}

inline std::vector<cplx> trace_eval(const ComplexField& u, const Hypersurface& s) { return eval_points(u, s.nodes); }

// Band-limited point charges: Fhat(xi) = (2pi)^{-d/2} sum_j q_j e^{-i xi.y_j}.
// Adjoint of eval_points: <spread(q), u> = sum_j q_j conj(u(y_j)).
inline ComplexField spread(const Grid& g, const std::vector<Vec3>& pts, const std::vector<cplx>& q,
                           const Vec3& shift = {0, 0, 0}) {
  if (pts.size() != q.size()) throw ParameterError("spread: size mismatch");
  ComplexField F(g, Side::frequency);
  F.shift = shift;
  const int N = g.N;
  const double c = std::pow(2.0 * kPi, -0.5 * g.d);
  std::array<std::vector<cplx>, 3> e;
  for (std::size_t n = 0; n < pts.size(); ++n) {
    if (q[n] == cplx(0.0)) continue;
    for (int a = 0; a < g.d; ++a) e[a] = detail::axis_phases(g, shift[a], pts[n][a], -1.0);
    const cplx qn = q[n] * c;
    if (g.d == 2) {
      for (int i = 0; i < N; ++i) {
        const cplx a = qn * e[0][i];
        cplx* p = F.data.data() + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) p[j] += a * e[1][j];
      }
    } else {
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          const cplx a = qn * e[0][i] * e[1][j];
          cplx* p = F.data.data() + (static_cast<std::size_t>(i) * N + j) * N;
          for (int k = 0; k < N; ++k) p[k] += a * e[2][k];
        }
    }
  }
  return F;
}

// Shell charges w_i alpha_i t_i as a band-limited layer.
inline ComplexField spread_shell(const Grid& g, const DeltaShell& sh, const std::vector<cplx>& t,
                                 const Vec3& shift = {0, 0, 0}) {
  std::vector<cplx> q(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) q[i] = sh.surface.weights[i] * sh.alpha[i] * t[i];
  return spread(g, sh.surface.nodes, q, shift);
}

// ---------------------------------------------------------------- potential action

struct PotentialAction {
  ComplexField grid_part;         // V0 u, physical side
  std::vector<cplx> shell_part;   // w_i alpha_i u(node_i)
};

inline PotentialAction apply_potential(const GridPotential& V0, const DeltaShell* shell, const ComplexField& u) {
  PotentialAction out;
  out.grid_part = to_physical(u);
  if (!(out.grid_part.grid == V0.field.grid)) throw ParameterError("apply_potential: grid mismatch");
  for (std::size_t i = 0; i < out.grid_part.size(); ++i) out.grid_part.data[i] *= V0.field.data[i].real();
  if (shell) {
    const auto tr = trace_eval(u, shell->surface);
    out.shell_part.resize(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i)
      out.shell_part[i] = shell->surface.weights[i] * shell->alpha[i] * tr[i];
  }
  return out;
}

// <alpha dsigma, f g> = sum_i w_i alpha_i f_i g_i (bilinear).
inline cplx shell_pairing(const DeltaShell& sh, const std::vector<cplx>& f, const std::vector<cplx>& g) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < sh.alpha.size(); ++i) s += sh.surface.weights[i] * sh.alpha[i] * f[i] * g[i];
  return s;
}

// <V0 f, g> = int V0 f g (bilinear).
inline cplx grid_pairing(const GridPotential& V0, const ComplexField& f, const ComplexField& g) {
  const auto a = to_physical(f), b = to_physical(g);
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += V0.field.data[i].real() * a.data[i] * b.data[i];
  return s * a.grid.cell();
}

// <V f, g> for V = V0 + alpha dsigma.
inline cplx potential_pairing(const GridPotential& V0, const DeltaShell* shell, const ComplexField& f,
                              const ComplexField& g) {
  cplx s = grid_pairing(V0, f, g);
  if (shell) s += shell_pairing(*shell, trace_eval(f, shell->surface), trace_eval(g, shell->surface));
  return s;
}

// V = V0 + alpha dsigma.
struct Potential {
  GridPotential V0;
  std::optional<DeltaShell> shell;

  const DeltaShell* shell_ptr() const { return shell ? &*shell : nullptr; }
  bool zero() const { return is_zero(V0) && (!shell || is_zero(*shell)); }
};

// || 1_F V0 ||_{L^{d/2}} with F = {|V0| > lambda^{1/4}}.
inline double large_part_norm(const GridPotential& V0, double lambda) {
  const double thr = std::pow(lambda, 0.25);
  const double p = 0.5 * V0.field.grid.d;
  double s = 0.0;
  for (const auto& v : V0.field.data) {
    const double a = std::abs(v.real());
    if (a > thr) s += std::pow(a, p);
  }
  return std::pow(s * V0.field.grid.cell(), 1.0 / p);
}

}  // namespace lpscat
