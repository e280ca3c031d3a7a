#pragma once
// Direct point-source scattering by V = V0 + alpha dsigma.
//
// Grid-to-grid coupling is the resolvent backend. Couplings of a shell node to
// the grid or to other nodes use the fundamental solution with its static
// singularity smoothed over a Gaussian of width sigma; away from the node this
// is Phi to roundoff. Sources and receivers lie off all supports and use Phi. With N = Neumann resolvent for V0 and
// W_p = Phi_p + N(V0 Phi_p), the V0-corrected point kernel is
//   K(p, q) = Phi_sigma(p - q) + <Phi_p, V0 W_q>,
// which is symmetric because every piece is. The shell unknowns T_i = u(z_i)
// solve (I - K diag(w alpha)) T = b, b_i = K(z_i, y).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lpscat/resolvent.hpp"

namespace lpscat {

// ---------------------------------------------------------------- kernels

// Phi with the Coulomb/log part replaced by its Gaussian-smoothed version.
// sigma = 0 gives Phi itself.
inline cplx smoothed_kernel(int d, double lambda, int sign, double r, double sigma) {
  const cplx k = wave_number(lambda, sign, 0.0);
  if (sigma == 0.0) return green_radial(d, k, r).first;
  if (d == 3) {
    const cplx reg = -special::expm1_ratio(cplx(r, 0.0), k.real()) / (4.0 * kPi);  // Phi + 1/(4 pi r)
    const double c = r < 1e-12 * sigma ? std::sqrt(2.0 / kPi) / sigma : std::erf(r / (std::sqrt(2.0) * sigma)) / r;
    return reg - c / (4.0 * kPi);
  }
  // d = 2: Phi - log(r)/(2 pi) is bounded at 0.
  cplx reg;
  const double kr = std::abs(k.real()) * r;
  if (kr < 1e-3) {
    reg = cplx((std::log(std::abs(k.real()) / 2.0) + special::kEuler) / (2.0 * kPi), -0.25 * sign);
  } else {
    reg = green_radial(2, k, r).first - std::log(r) / (2.0 * kPi);
  }
  const double x = r * r / (2.0 * sigma * sigma);
  const double smooth_log =
      x < 1e-300 ? 0.5 * (std::log(2.0 * sigma * sigma) - special::kEuler) : std::log(r) - 0.5 * std::expint(-x);
  return reg + smooth_log / (2.0 * kPi);
}

inline double distance(const Vec3& a, const Vec3& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Smoothed kernel centred at p, sampled on the grid.
inline ComplexField point_field(const Grid& g, const Vec3& p, double lambda, int sign, double sigma) {
  return sample(g, [&](const Vec3& x) { return smoothed_kernel(g.d, lambda, sign, distance(x, p, g.d), sigma); });
}

inline Backend default_backend(int d) { return d == 3 ? Backend::green3d : Backend::absorption; }

// ---------------------------------------------------------------- incident wave

struct IncidentWave {
  int d = 3;
  Vec3 y{0, 0, 0};
  double lambda = 1.0;
  int sign = +1;
  ComplexField source;  // mollified delta scaled so the far field is exactly Phi
  Resolution field;

  cplx at(const Vec3& x) const { return fundamental_closed(d, lambda, sign, x, y); }
};

inline IncidentWave incident_wave(const Grid& g, const Vec3& y, double lambda, int sign, double h = 0.0) {
  if (h == 0.0) h = 3.0 * g.dx();
  const double sigma = 0.5 * h;
  IncidentWave w;
  w.d = g.d;
  w.y = y;
  w.lambda = lambda;
  w.sign = sign;
  // A radial source rho radiates Phi * rhohat(k) outside its support; for the
  // Gaussian rhohat(k) = exp(-lambda sigma^2 / 2).
  w.source = mollified_delta(g, y, h);
  const double scale = std::exp(0.5 * lambda * sigma * sigma);
  for (auto& v : w.source.data) v *= scale;
  ResolventSpec spec;
  spec.lambda = lambda;
  spec.sign = sign;
  spec.backend = default_backend(g.d);
  w.field = resolve_full(w.source, spec);
  return w;
}

// ---------------------------------------------------------------- Neumann series for V0

inline ComplexField multiply(const GridPotential& V0, const ComplexField& u) {
  ComplexField out = to_physical(u);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= V0.field.data[i].real();
  return out;
}

struct NeumannSpec {
  ResolventSpec resolvent;
  double tol = 1e-12;  // successive-term x_star ratio
  int max_iter = 60;
  int stall = 5;  // non-decreasing terms over this many steps => divergence
};

struct NeumannResult {
  ComplexField u;
  std::optional<ComplexField> big;  // green3d: doubled-box spectrum of u
  int iterations = 0;
  double rho = 0.0;
  std::vector<double> term_norms;
  double residual = std::numeric_limits<double>::quiet_NaN();
  std::string residual_kind;

  nlohmann::json info() const {
    return {{"iterations", iterations},
            {"rho", rho},
            {"term_norms", term_norms},
            {"residual", residual},
            {"residual_kind", residual_kind}};
  }
};

// On-shell plane waves along each axis.
inline std::vector<ComplexField> default_probes(const Grid& g, double lambda) {
  std::vector<ComplexField> out;
  const double k = std::sqrt(lambda);
  for (int a = 0; a < g.d; ++a) out.push_back(sample(g, [&](const Vec3& x) { return std::polar(1.0, k * x[a]); }));
  return out;
}

// max over probes of ||R(V0 p)||_{X*} / ||p||_{X*}.
inline double contraction_proxy(const GridPotential& V0, const ResolventSpec& spec,
                                const std::vector<ComplexField>& probes) {
  double rho = 0.0;
  for (const auto& p : probes) {
    const double den = x_star_norm(p, spec.lambda).value;
    if (den == 0.0) continue;
    rho = std::max(rho, x_star_norm(resolve(multiply(V0, p), spec), spec.lambda).value / den);
  }
  return rho;
}

// ||f||_2 over the whole grid.
inline double field_l2(const ComplexField& f) { return l2_norm(to_physical(f)); }

inline NeumannResult neumann_resolve_V0(const ComplexField& f, const GridPotential& V0, const NeumannSpec& ns,
                                        std::optional<double> rho_known = std::nullopt) {
  const ResolventSpec& spec = ns.resolvent;
  const double lambda = spec.lambda;
  NeumannResult out;
  Resolution first = resolve_full(f, spec);
  out.u = first.u;
  out.big = first.big;
  out.iterations = 1;
  const bool trivial = is_zero(V0) || field_l2(f) == 0.0;
  if (!trivial) {
    if (rho_known) {
      out.rho = *rho_known;
    } else {
      auto probes = default_probes(f.grid, lambda);
      probes.insert(probes.begin(), first.u);
      out.rho = contraction_proxy(V0, spec, probes);
    }
    if (out.rho >= 1.0)
      throw RegimeError("below lambda_0: contraction proxy rho = " + num(out.rho) +
                        " >= 1 for R o V0; increase lambda or weaken V0");
    ComplexField term = first.u;
    out.term_norms.push_back(x_star_norm(term, lambda).value);
    bool converged = false;
    while (out.iterations < ns.max_iter) {
      Resolution r = resolve_full(multiply(V0, term), spec);
      term = r.u;
      for (std::size_t i = 0; i < term.size(); ++i) out.u.data[i] += term.data[i];
      if (out.big)
        for (std::size_t i = 0; i < out.big->size(); ++i) out.big->data[i] += r.big->data[i];
      ++out.iterations;
      const double tn = x_star_norm(term, lambda).value;
      out.term_norms.push_back(tn);
      if (tn <= ns.tol * x_star_norm(out.u, lambda).value) {
        converged = true;
        break;
      }
      const std::size_t m = out.term_norms.size();
      if (m > static_cast<std::size_t>(ns.stall)) {
        bool growing = true;
        for (std::size_t i = m - ns.stall; i < m; ++i) growing = growing && out.term_norms[i] >= out.term_norms[i - 1];
        if (growing)
          throw RegimeError("below lambda_0: Neumann terms grew for " + std::to_string(ns.stall) +
                            " steps (contraction proxy rho = " + num(out.rho) + ")");
      }
    }
    if (!converged)
      throw DivergenceError("Neumann series not converged after " + std::to_string(ns.max_iter) +
                            " terms (last term ratio " +
                            num(out.term_norms.back() / x_star_norm(out.u, lambda).value) + ")");
  }

  // Residual of (Delta + lambda - V0) u = f.
  const double fn = field_l2(f);
  if (fn == 0.0) {
    out.residual = 0.0;
    out.residual_kind = out.big ? "pde" : "lippmann_schwinger";
    return out;
  }
  const ComplexField v0u = multiply(V0, out.u);
  const ComplexField fp = to_physical(f);
  if (out.big) {
    // The truncated kernel reaches every source point only from the inscribed ball.
    const Grid& g = f.grid;
    ComplexField lap = crop_physical(
        apply_multiplier(*out.big, [&](const Vec3& xi, int d) { return cplx(lambda - norm2(xi, d)); }), g);
    double num = 0.0, den = 0.0;
    for_each_point(g, [&](std::size_t i, const Vec3& x) {
      if (norm2(x, g.d) > g.L * g.L) return;
      num += std::norm(lap.data[i] - v0u.data[i] - fp.data[i]);
      den += std::norm(fp.data[i]);
    });
    out.residual = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num) / fn;
    out.residual_kind = "pde";
  } else {
    // u - R(V0 u) - R f, relative to R f.
    ComplexField r = resolve(v0u, spec);
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = out.u.data[i] - r.data[i] - first.u.data[i];
    out.residual = l2_norm(r) / l2_norm(first.u);
    out.residual_kind = "lippmann_schwinger";
  }
  return out;
}

// ---------------------------------------------------------------- problem and data

struct ScatteringProblem {
  Grid grid;
  GridPotential V0;
  std::optional<DeltaShell> shell;
  double lambda = 1.0;
  int sign = +1;
  double R0 = 1.0;
  std::vector<Vec3> sources, receivers;
  Backend backend = Backend::green3d;
  double sigma = 0.0;  // 0: 1.5 dx
  double tol = 1e-12;
  int max_iter = 60;
  bool keep_fields = false;  // store the volume u_sc per source; smoothed within ~6 sigma of shell nodes
};

// Lat-long (d = 3) or equispaced (d = 2) points on |x| = R0.
inline std::vector<Vec3> boundary_points(int d, double R0, int n) {
  return sphere_quadrature(d, R0, {0, 0, 0}, n).nodes;
}

inline void validate(const ScatteringProblem& p) {
  std::string err;
  const int d = p.grid.d;
  if (!(p.lambda > 0.0)) err += "lambda must be > 0; ";
  if (p.sign != 1 && p.sign != -1) err += "sign must be +1 or -1; ";
  if (p.R0 < 1.0) err += "R0 must be >= 1; ";
  if (p.R0 > p.grid.L / 4.0 * (1 + 1e-12))
    err += "R0 = " + num(p.R0) + " exceeds L/4 = " + num(p.grid.L / 4.0) + " (margin); ";
  if (!(p.V0.field.grid == p.grid)) err += "V0 grid differs from the problem grid; ";
  if (p.V0.support_radius > p.R0) err += "V0 support exceeds B0; ";
  if (p.shell && p.shell->surface.max_radius() >= p.R0) err += "shell leaves B0; ";
  if (p.shell && p.shell->surface.d != d) err += "shell dimension differs from the grid; ";
  if (p.backend == Backend::green3d && d != 3) err += "green3d requires d = 3; ";
  auto on_boundary = [&](const std::vector<Vec3>& pts, const char* what) {
    for (const auto& y : pts)
      if (std::abs(distance(y, {0, 0, 0}, d) - p.R0) > 1e-9 * p.R0) {
        err += std::string(what) + " must lie on |x| = R0; ";
        return;
      }
  };
  on_boundary(p.sources, "sources");
  on_boundary(p.receivers, "receivers");
  if (p.sources.empty()) err += "no sources; ";
  if (!err.empty()) throw ParameterError("scattering problem: " + err.substr(0, err.size() - 2));
}

struct ScatteringData {
  std::vector<Vec3> receivers, sources;
  Eigen::MatrixXcd values;  // (receiver, source)
  double lambda = 1.0;
  int sign = +1;

  std::string to_csv() const {
    std::string s = "receiver,source,re,im\n";
    char buf[96];
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g\n", static_cast<long>(i), static_cast<long>(j),
                      values(i, j).real(), values(i, j).imag());
        s += buf;
      }
    return s;
  }
};

struct ScatteringSolution {
  ScatteringData data;
  std::vector<std::vector<cplx>> shell_traces;  // u_sc at shell nodes, per source
  std::vector<ComplexField> u_sc;               // when keep_fields
  nlohmann::json info = nlohmann::json::object();
};

namespace detail {

// Values of V0 on its support with the matching grid points.
struct Support {
  std::vector<std::size_t> idx;
  std::vector<Vec3> x;
  std::vector<double> v;
};

inline Support support_of(const GridPotential& V0) {
  Support s;
  for_each_point(V0.field.grid, [&](std::size_t i, const Vec3& x) {
    const double v = V0.field.data[i].real();
    if (v == 0.0) return;
    s.idx.push_back(i);
    s.x.push_back(x);
    s.v.push_back(v);
  });
  return s;
}

}  // namespace detail

inline ScatteringSolution solve_scattering(const ScatteringProblem& p) {
  validate(p);
  const Grid& g = p.grid;
  const int d = g.d;
  const double sigma = p.sigma > 0.0 ? p.sigma : 1.5 * g.dx();
  const double cell = g.cell();
  // Sources and receivers sit off the supports, so their couplings use Phi itself.
  auto ker = [&](const Vec3& a, const Vec3& b, double sg) {
    return smoothed_kernel(d, p.lambda, p.sign, distance(a, b, d), sg);
  };

  auto bdot = [](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return (a.array() * b.array()).sum(); };
  const bool has_v0 = !is_zero(p.V0);
  const bool has_shell = p.shell && !is_zero(*p.shell);
  const detail::Support S = detail::support_of(p.V0);
  const std::size_t ns = S.idx.size();

  NeumannSpec nspec;
  nspec.resolvent.lambda = p.lambda;
  nspec.resolvent.sign = p.sign;
  nspec.resolvent.backend = p.backend;
  nspec.tol = p.tol;
  nspec.max_iter = p.max_iter;

  // Kernel from point q restricted to the support, times V0 and the cell.
  auto kv = [&](const Vec3& q, double sg) {
    Eigen::VectorXcd out(ns);
    for (std::size_t s = 0; s < ns; ++s) out[s] = ker(S.x[s], q, sg) * (S.v[s] * cell);
    return out;
  };
  auto ksupp = [&](const Vec3& q, double sg) {
    Eigen::VectorXcd out(ns);
    for (std::size_t s = 0; s < ns; ++s) out[s] = ker(S.x[s], q, sg);
    return out;
  };

  std::optional<double> rho;
  int neumann_solves = 0, max_iters = 0;
  double max_residual = 0.0;
  // W_q on the support: Phi_q + N(V0 Phi_q).
  auto w_on_support = [&](const Vec3& q, double sg) {
    Eigen::VectorXcd w = ksupp(q, sg);
    if (!has_v0) return w;
    ComplexField src(g, Side::physical);
    for (std::size_t s = 0; s < ns; ++s) src.data[S.idx[s]] = w[s] * S.v[s];
    if (!rho) {
      auto probes = default_probes(g, p.lambda);
      probes.insert(probes.begin(), resolve(src, nspec.resolvent));
      rho = contraction_proxy(p.V0, nspec.resolvent, probes);
    }
    const NeumannResult nr = neumann_resolve_V0(src, p.V0, nspec, rho);
    ++neumann_solves;
    max_iters = std::max(max_iters, nr.iterations);
    if (std::isfinite(nr.residual)) max_residual = std::max(max_residual, nr.residual);
    for (std::size_t s = 0; s < ns; ++s) w[s] += nr.u.data[S.idx[s]];
    return w;
  };

  const std::size_t nsrc = p.sources.size(), nrec = p.receivers.size();
  std::vector<Eigen::VectorXcd> Wy(nsrc);
  for (std::size_t j = 0; j < nsrc; ++j) Wy[j] = w_on_support(p.sources[j], 0.0);

  // Shell system.
  const std::size_t nn = has_shell ? p.shell->surface.size() : 0;
  Eigen::MatrixXcd Tm(nn, nsrc), Sm(nn, nsrc);  // total traces, charges
  std::vector<Eigen::VectorXcd> Wz(nn);
  double rcond = 1.0, sigma_shell = sigma;
  bool singular = false;
  Eigen::VectorXd wa(nn);
  if (has_shell) {
    const auto& z = p.shell->surface.nodes;
    double wmax = 0.0;
    for (std::size_t j = 0; j < nn; ++j) {
      wa[j] = p.shell->surface.weights[j] * p.shell->alpha[j];
      wmax = std::max(wmax, p.shell->surface.weights[j]);
    }
    // Node-to-node smoothing at least the node spacing, so the node sum of the
    // smoothed kernel is a converged quadrature. On a flat patch the smoothing
    // adds sigma/sqrt(2 pi) to the layer integral in both d = 2 and 3; the
    // diagonal takes that back out.
    const double spacing = d == 3 ? std::sqrt(wmax) : wmax;
    sigma_shell = has_v0 ? std::max(sigma, spacing) : spacing;
    auto knode = [&](std::size_t i, std::size_t j) {
      cplx v = smoothed_kernel(d, p.lambda, p.sign, distance(z[i], z[j], d), sigma_shell);
      if (i == j) v -= sigma_shell / (std::sqrt(2.0 * kPi) * p.shell->surface.weights[i]);
      return v;
    };
    std::vector<Eigen::VectorXcd> kz(nn);
    for (std::size_t j = 0; j < nn; ++j) {
      kz[j] = kv(z[j], sigma);
      Wz[j] = w_on_support(z[j], sigma);
    }
    Eigen::MatrixXcd K(nn, nn), B(nn, nsrc);
    for (std::size_t i = 0; i < nn; ++i) {
      for (std::size_t j = 0; j < nn; ++j) K(i, j) = knode(i, j) + (has_v0 ? bdot(kz[i], Wz[j]) : 0.0);
      for (std::size_t m = 0; m < nsrc; ++m)
        B(i, m) = ker(z[i], p.sources[m], 0.0) + (has_v0 ? bdot(kz[i], Wy[m]) : 0.0);
    }
    // Symmetrize against roundoff in the V0 correction.
    K = 0.5 * (K + K.transpose()).eval();
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(nn, nn) - K * wa.asDiagonal();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    rcond = lu.rcond();
    singular = !(rcond > 1e-10);
    Tm = lu.solve(B);
    Sm = wa.asDiagonal() * Tm;
  }

  ScatteringSolution sol;
  sol.data.receivers = p.receivers;
  sol.data.sources = p.sources;
  sol.data.lambda = p.lambda;
  sol.data.sign = p.sign;
  sol.data.values = Eigen::MatrixXcd::Zero(nrec, nsrc);
  for (std::size_t r = 0; r < nrec; ++r) {
    const Eigen::VectorXcd kx = has_v0 ? kv(p.receivers[r], 0.0) : Eigen::VectorXcd();
    Eigen::VectorXcd c(nn);
    for (std::size_t j = 0; j < nn; ++j)
      c[j] = ker(p.receivers[r], p.shell->surface.nodes[j], 0.0) + (has_v0 ? bdot(kx, Wz[j]) : 0.0);
    for (std::size_t m = 0; m < nsrc; ++m) {
      cplx v = has_v0 ? bdot(kx, Wy[m]) : 0.0;
      if (has_shell) v += (c.array() * Sm.col(m).array()).sum();
      sol.data.values(r, m) = v;
    }
  }

  sol.shell_traces.resize(nsrc);
  for (std::size_t m = 0; m < nsrc; ++m) {
    sol.shell_traces[m].resize(nn);
    for (std::size_t i = 0; i < nn; ++i) sol.shell_traces[m][i] = Tm(i, m) - ker(p.shell->surface.nodes[i], p.sources[m], 0.0);
  }

  if (p.keep_fields) {
    for (std::size_t m = 0; m < nsrc; ++m) {
      // u_sc = sum_j s_j Phi_zj + N(V0 (Phi_y + sum_j s_j Phi_zj))
      ComplexField shell_part(g, Side::physical);
      for (std::size_t j = 0; j < nn; ++j) {
        const ComplexField pf = point_field(g, p.shell->surface.nodes[j], p.lambda, p.sign, sigma);
        for (std::size_t i = 0; i < pf.size(); ++i) shell_part.data[i] += Sm(j, m) * pf.data[i];
      }
      ComplexField u = shell_part;
      if (has_v0) {
        ComplexField src(g, Side::physical);
        for (std::size_t s = 0; s < ns; ++s)
          src.data[S.idx[s]] = S.v[s] * (ker(S.x[s], p.sources[m], 0.0) + shell_part.data[S.idx[s]]);
        const NeumannResult nr = neumann_resolve_V0(src, p.V0, nspec, rho);
        for (std::size_t i = 0; i < u.size(); ++i) u.data[i] += nr.u.data[i];
      }
      sol.u_sc.push_back(std::move(u));
    }
  }

  sol.info = {{"lambda", p.lambda},
              {"sign", p.sign},
              {"backend", backend_name(p.backend)},
              {"sigma", sigma},
              {"sigma_shell", sigma_shell},
              {"support_points", ns},
              {"shell_nodes", nn},
              {"neumann_solves", neumann_solves},
              {"neumann_max_iterations", max_iters},
              {"neumann_max_residual", max_residual},
              {"contraction_proxy", rho ? *rho : 0.0},
              {"fredholm_rcond", rcond},
              {"fredholm_singular", singular}};
  return sol;
}

// ---------------------------------------------------------------- structural checks

// Least-squares slope of log y against log x; NaN if some y <= 0.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct ReciprocityReport {
  double defect = 0.0;  // max |D - D^T| / max |D|
  double max_abs = 0.0;
};

inline ReciprocityReport reciprocity_check(const ScatteringData& data) {
  if (data.values.rows() != data.values.cols() || data.sources.size() != data.receivers.size())
    throw ParameterError("reciprocity_check: data matrix must be square with sources = receivers");
  for (std::size_t i = 0; i < data.sources.size(); ++i)
    for (int a = 0; a < 3; ++a)
      if (std::abs(data.sources[i][a] - data.receivers[i][a]) > 1e-12)
        throw ParameterError("reciprocity_check: source and receiver lists differ");
  ReciprocityReport r;
  const auto& D = data.values;
  r.max_abs = D.cwiseAbs().maxCoeff();
  const double diff = (D - D.transpose()).cwiseAbs().maxCoeff();
  r.defect = r.max_abs > 0.0 ? diff / r.max_abs : 0.0;
  return r;
}

// Value and gradient of a field at a point.
using FieldEvaluator = std::function<std::pair<cplx, std::array<cplx, 3>>(const Vec3&)>;

inline FieldEvaluator closed_form_evaluator(int d, double lambda, int sign, const Vec3& y = {0, 0, 0}) {
  return [=](const Vec3& x) {
    const double r = distance(x, y, d);
    auto [phi, dphi] = green_radial(d, wave_number(lambda, sign, 0.0), r);
    std::array<cplx, 3> gr{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) gr[a] = dphi * (x[a] - y[a]) / r;
    return std::make_pair(phi, gr);
  };
}

inline FieldEvaluator resolution_evaluator(const Resolution& r) {
  return [&r](const Vec3& x) { return std::make_pair(r.at(x), r.grad(x)); };
}

struct SrcReport {
  std::vector<double> radii, values;
  double slope = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const { return {{"radii", radii}, {"values", values}, {"slope", slope}}; }
};

// max_{|x| = R} |xhat . grad u -+ i k u| per R and the least-squares slope of
// log(value R^{(d-1)/2}) against log R.
inline SrcReport src_residual(int d, const FieldEvaluator& u, double lambda, int sign, const std::vector<double>& radii,
                              double max_radius = std::numeric_limits<double>::infinity(), int n = 8) {
  if (radii.size() < 2) throw ParameterError("src_residual: need at least two radii");
  for (double R : radii)
    if (!(R > 0.0) || R > max_radius) throw ParameterError("src_residual: radius outside the evaluation domain");
  const double k = std::sqrt(lambda);
  SrcReport rep;
  rep.radii = radii;
  for (double R : radii) {
    double mx = 0.0;
    const auto pts = sphere_quadrature(d, R, {0, 0, 0}, n).nodes;
    for (const auto& x : pts) {
      auto [v, gr] = u(x);
      cplx dr = 0.0;
      for (int a = 0; a < d; ++a) dr += gr[a] * x[a] / R;
      mx = std::max(mx, std::abs(dr - cplx(0.0, sign * k) * v));
    }
    rep.values.push_back(mx);
  }
  std::vector<double> scaled(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) scaled[i] = rep.values[i] * std::pow(radii[i], 0.5 * (d - 1));
  rep.slope = loglog_slope(radii, scaled);
  return rep;
}

// ---------------------------------------------------------------- orthogonality

// Weak residual of (Delta + lambda - V) v = 0 in B0: Gaussian tests phi centred at
// 0 and +-R0/2 e_a, relative to ||v||_{L^2(B0)} max ||(Delta + lambda) phi||.
inline double weak_residual(const ComplexField& v, const GridPotential& V0, const DeltaShell* shell, double lambda,
                            double R0) {
  const ComplexField u = to_physical(v);
  const Grid& g = u.grid;
  const int d = g.d;
  const double s = std::max(2.0 * g.dx(), R0 / 10.0);
  std::vector<Vec3> centers{{0, 0, 0}};
  for (int a = 0; a < d; ++a)
    for (double sg : {-1.0, 1.0}) {
      Vec3 c{0, 0, 0};
      c[a] = sg * R0 / 2.0;
      centers.push_back(c);
    }
  double vb = 0.0;
  for_each_point(g, [&](std::size_t i, const Vec3& x) {
    if (norm2(x, d) <= R0 * R0) vb += std::norm(u.data[i]);
  });
  vb = std::sqrt(vb * g.cell());
  if (vb == 0.0) return 0.0;
  const std::vector<cplx> tr = shell ? trace_eval(u, shell->surface) : std::vector<cplx>{};
  double worst = 0.0, scale = 0.0;
  for (const auto& c : centers) {
    cplx lhs = 0.0, rhs = 0.0;
    double lphi = 0.0;
    for_each_point(g, [&](std::size_t i, const Vec3& x) {
      const double r2 = distance(x, c, d) * distance(x, c, d);
      const double phi = std::exp(-0.5 * r2 / (s * s));
      const double lap = (r2 / (s * s * s * s) - d / (s * s)) * phi;
      lhs += u.data[i] * (lap + lambda * phi);
      rhs += V0.field.data[i].real() * u.data[i] * phi;
      lphi += (lap + lambda * phi) * (lap + lambda * phi);
    });
    lhs *= g.cell();
    rhs *= g.cell();
    if (shell) {
      std::vector<cplx> ph(tr.size());
      for (std::size_t j = 0; j < ph.size(); ++j) {
        const double r = distance(shell->surface.nodes[j], c, d);
        ph[j] = std::exp(-0.5 * r * r / (s * s));
      }
      rhs += shell_pairing(*shell, tr, ph);
    }
    worst = std::max(worst, std::abs(lhs - rhs));
    scale = std::max(scale, std::sqrt(lphi * g.cell()));
  }
  return worst / (vb * scale);
}

// <(V1 - V2) v1, v2>, both parts bilinear. v_j must solve (Delta + lambda - V_j) v_j = 0 in B0.
inline cplx orthogonality_test(const GridPotential& V1, const DeltaShell* sh1, const GridPotential& V2,
                               const DeltaShell* sh2, const ComplexField& v1, const ComplexField& v2, double lambda,
                               double R0, double max_residual = 1e-6) {
  const double r1 = weak_residual(v1, V1, sh1, lambda, R0), r2 = weak_residual(v2, V2, sh2, lambda, R0);
  if (r1 > max_residual || r2 > max_residual)
    throw ParameterError("orthogonality_test: fields do not solve their equations in B0 (weak residuals " +
                         num(r1) + ", " + num(r2) + ")");
  const ComplexField a = to_physical(v1), b = to_physical(v2);
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (V1.field.data[i].real() - V2.field.data[i].real()) * a.data[i] * b.data[i];
  s *= a.grid.cell();
  if (sh1) s += shell_pairing(*sh1, trace_eval(a, sh1->surface), trace_eval(b, sh1->surface));
  if (sh2) s -= shell_pairing(*sh2, trace_eval(a, sh2->surface), trace_eval(b, sh2->surface));
  return s;
}

}  // namespace lpscat
