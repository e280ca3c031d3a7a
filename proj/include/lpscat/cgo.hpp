#pragma once
// Complex geometrical optics solutions v = e^{zeta.x}(1 + w) of (Delta + lambda - V) v = 0,
// the Fourier reconstruction of V1 - V2 from pairs of them, and the
// rotation-averaged decay of ||V||_{X^{-1/2}_zeta}.
//
// w is never multiplied by e^{zeta.x}: it solves (Delta + 2 zeta.grad) w = V(1 + w)
// on the box, with quasi-periodic boundary conditions chosen so the lattice
// avoids the zero set of p_zeta (which always contains xi = 0).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lpscat/scattering.hpp"

namespace lpscat {

struct ZetaPair {
  CVec3 zeta1{}, zeta2{};
  Vec3 kappa{0, 0, 0}, eta{0, 0, 0}, theta{0, 0, 0};
  double tau = 0.0, lambda = 0.0;

  nlohmann::json to_json() const {
    auto c = [](const CVec3& z) {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& v : z) j.push_back({v.real(), v.imag()});
      return j;
    };
    return {{"zeta1", c(zeta1)}, {"zeta2", c(zeta2)}, {"kappa", kappa}, {"eta", eta},
            {"theta", theta},    {"tau", tau},        {"lambda", lambda}};
  }
};

namespace detail {

inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Gram-Schmidt of v against the unit vectors in basis; false if v is (nearly) dependent.
inline bool orthonormalize(Vec3& v, const std::vector<Vec3>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) {
      const double c = dot3(v, b);
      for (int a = 0; a < 3; ++a) v[a] -= c * b[a];
    }
  const double n = std::sqrt(dot3(v, v));
  if (n < 1e-8) return false;
  for (auto& x : v) x /= n;
  return true;
}

}  // namespace detail

// zeta1 = tau eta + i(-kappa/2 + s theta), zeta2 = -tau eta + i(-kappa/2 - s theta),
// s = (tau^2 + lambda - |kappa|^2/4)^{1/2}; eta, theta orthonormal and normal to kappa.
inline ZetaPair make_zeta_pair(const Vec3& kappa, double tau, double lambda, std::uint64_t seed = 0) {
  for (double v : kappa)
    if (!std::isfinite(v)) throw ParameterError("make_zeta_pair: kappa must be finite");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("make_zeta_pair: tau must be > 0");
  if (!(lambda > 0.0)) throw ParameterError("make_zeta_pair: lambda must be > 0");
  const double k2 = detail::dot3(kappa, kappa);
  const double s2 = tau * tau + lambda - 0.25 * k2;
  if (s2 < -1e-12 * (tau * tau + lambda))
    throw ParameterError("make_zeta_pair: tau too small, need tau^2 >= |kappa|^2/4 - lambda");
  const double s = std::sqrt(std::max(0.0, s2));

  std::vector<Vec3> basis;
  if (k2 > 0.0) {
    const double kn = std::sqrt(k2);
    basis.push_back({kappa[0] / kn, kappa[1] / kn, kappa[2] / kn});
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto draw = [&] {
    for (;;) {
      Vec3 v{nd(rng), nd(rng), nd(rng)};
      if (detail::orthonormalize(v, basis)) return v;
    }
  };
  ZetaPair z;
  z.eta = draw();
  basis.push_back(z.eta);
  z.theta = draw();
  z.kappa = kappa;
  z.tau = tau;
  z.lambda = lambda;
  for (int a = 0; a < 3; ++a) {
    z.zeta1[a] = cplx(tau * z.eta[a], -0.5 * kappa[a] + s * z.theta[a]);
    z.zeta2[a] = cplx(-tau * z.eta[a], -0.5 * kappa[a] - s * z.theta[a]);
  }
  return z;
}

// ---------------------------------------------------------------- correction w

// Bloch shift (fractions of dxi per axis) maximizing min |p_zeta| over the lattice.
inline Vec3 bloch_shift(const Grid& g, const CVec3& zeta) {
  const int d = g.d;
  const double fr[] = {0.0, 0.25, 0.5, 0.75};
  Vec3 best{0, 0, 0};
  double best_min = -1.0;
  const int nc = d == 3 ? 64 : 16;
  for (int c = 1; c < nc; ++c) {
    Vec3 sh{0, 0, 0};
    for (int a = 0, r = c; a < d; ++a, r /= 4) sh[a] = fr[r % 4] * g.dxi();
    double mn = std::numeric_limits<double>::infinity();
    for_each_mode(g, sh, [&](std::size_t, const Vec3& xi) { mn = std::min(mn, std::abs(p_zeta(zeta, xi, d))); });
    if (mn > best_min) {
      best_min = mn;
      best = sh;
    }
  }
  return best;
}

struct CgoSpec {
  double tol = 1e-12;  // successive X^{1/2}_zeta increment relative to ||w||
  int max_iter = 200;
  int stall = 5;
};

struct CgoResult {
  ComplexField w;  // frequency side, shifted lattice
  Vec3 bloch{0, 0, 0};
  int iterations = 0;
  double w_norm = 0.0;  // ||w||_{X^{1/2}_zeta}
  double v_norm = 0.0;  // ||V||_{X^{-1/2}_zeta}
  double residual = 0.0;  // ||p_zeta w - V(1 + w)|| / ||V||, frequency side
  std::vector<double> increments;

  double ratio() const { return v_norm > 0.0 ? w_norm / v_norm : 0.0; }
  nlohmann::json info() const {
    return {{"iterations", iterations}, {"w_norm", w_norm},         {"v_norm", v_norm},
            {"ratio", ratio()},         {"residual", residual},     {"increments", increments},
            {"bloch", bloch}};
  }
};

namespace detail {

// V(1 + w) on the lattice shifted by `shift`; w may be empty (w = 0).
inline ComplexField potential_times(const Potential& V, const ComplexField* w, const Vec3& shift) {
  const Grid& g = V.V0.field.grid;
  ComplexField p(g, Side::physical);
  p.shift = shift;
  if (w) {
    const ComplexField wp = to_physical(*w);
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = V.V0.field.data[i].real() * (1.0 + wp.data[i]);
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = V.V0.field.data[i].real();
  }
  ComplexField F = to_frequency(p);
  if (V.shell && !is_zero(*V.shell)) {
    std::vector<cplx> t(V.shell->surface.size(), 1.0);
    if (w) {
      const auto tw = eval_points(*w, V.shell->surface.nodes);
      for (std::size_t j = 0; j < t.size(); ++j) t[j] += tw[j];
    }
    const ComplexField S = spread_shell(g, *V.shell, t, shift);
    for (std::size_t i = 0; i < F.size(); ++i) F.data[i] += S.data[i];
  }
  return F;
}

inline double freq_l2(const ComplexField& F) {
  double s = 0.0;
  for (const auto& v : F.data) s += std::norm(v);
  return std::sqrt(s * F.grid.dcell());
}

}  // namespace detail

// Fixed point w <- (Delta + 2 zeta.grad)^{-1} V(1 + w).
inline CgoResult cgo_correction(const Potential& V, const CVec3& zeta, double lambda, const CgoSpec& spec = {}) {
  const Grid& g = V.V0.field.grid;
  if (V.shell && V.shell->surface.d != g.d) throw ParameterError("cgo_correction: shell dimension differs from grid");
  if (spec.max_iter < 1 || !(spec.tol > 0.0)) throw ParameterError("cgo_correction: bad tolerance or iteration cap");
  CgoResult r;
  r.bloch = bloch_shift(g, zeta);
  const ComplexField Vhat = detail::potential_times(V, nullptr, r.bloch);
  r.w = ComplexField(g, Side::frequency);
  r.w.shift = r.bloch;
  const double vl2 = detail::freq_l2(Vhat);
  if (vl2 == 0.0) return r;  // w = 0 exactly
  r.v_norm = xzeta_norm(Vhat, zeta, -0.5).value;

  r.w = conj_resolve_zeta(Vhat, zeta, lambda);
  r.iterations = 1;
  bool converged = false;
  while (r.iterations < spec.max_iter) {
    ComplexField next = conj_resolve_zeta(detail::potential_times(V, &r.w, r.bloch), zeta, lambda);
    ComplexField diff = next;
    for (std::size_t i = 0; i < diff.size(); ++i) diff.data[i] -= r.w.data[i];
    r.w = std::move(next);
    ++r.iterations;
    const double inc = xzeta_norm(diff, zeta, 0.5).value;
    r.increments.push_back(inc);
    if (inc <= spec.tol * xzeta_norm(r.w, zeta, 0.5).value) {
      converged = true;
      break;
    }
    const std::size_t m = r.increments.size();
    if (m > static_cast<std::size_t>(spec.stall)) {
      bool growing = true;
      for (std::size_t i = m - spec.stall; i < m; ++i) growing = growing && r.increments[i] >= r.increments[i - 1];
      if (growing)
        throw RegimeError("cgo_correction: outside contraction regime (increments grew for " +
                          std::to_string(spec.stall) + " steps, last " + num(inc) + ")");
    }
  }
  if (!converged)
    throw DivergenceError("cgo_correction: not converged after " + std::to_string(spec.max_iter) + " iterations");
  r.w_norm = xzeta_norm(r.w, zeta, 0.5).value;
  ComplexField res = apply_multiplier(r.w, [&](const Vec3& xi, int d) { return p_zeta(zeta, xi, d); });
  const ComplexField rhs = detail::potential_times(V, &r.w, r.bloch);
  for (std::size_t i = 0; i < res.size(); ++i) res.data[i] -= rhs.data[i];
  r.residual = detail::freq_l2(res) / vl2;
  return r;
}

// ---------------------------------------------------------------- reconstruction

struct PairingParts {
  cplx direct = 0.0;     // <V1 - V2, e^{-i kappa.x}>
  cplx remainder = 0.0;  // <V1 - V2, e^{-i kappa.x}(w1 + w2 + w1 w2)>
  cplx estimate() const { return direct + remainder; }
};

// <(V1 - V2) v1, v2> for v_j = e^{zeta_j.x}(1 + w_j), zeta1 + zeta2 = -i kappa, split
// into the Fourier coefficient and the w-terms. w_j may be null (w = 0).
inline PairingParts cgo_pairing(const Potential& V1, const Potential& V2, const Vec3& kappa, const ComplexField* w1,
                                const ComplexField* w2) {
  const Grid& g = V1.V0.field.grid;
  const int d = g.d;
  auto phase = [&](const Vec3& x) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += kappa[a] * x[a];
    return std::polar(1.0, -s);
  };
  PairingParts out;
  const ComplexField a = w1 ? to_physical(*w1) : ComplexField(g, Side::physical);
  const ComplexField b = w2 ? to_physical(*w2) : ComplexField(g, Side::physical);
  for_each_point(g, [&](std::size_t i, const Vec3& x) {
    const double dv = V1.V0.field.data[i].real() - V2.V0.field.data[i].real();
    if (dv == 0.0) return;
    const cplx e = dv * phase(x);
    out.direct += e;
    out.remainder += e * (a.data[i] + b.data[i] + a.data[i] * b.data[i]);
  });
  out.direct *= g.cell();
  out.remainder *= g.cell();
  // Each shell summed on its own so identical potentials cancel exactly.
  auto shell_terms = [&](const Potential& V) {
    PairingParts p;
    if (!V.shell || is_zero(*V.shell)) return p;
    const auto& nodes = V.shell->surface.nodes;
    const auto ta = w1 ? eval_points(*w1, nodes) : std::vector<cplx>(nodes.size(), 0.0);
    const auto tb = w2 ? eval_points(*w2, nodes) : std::vector<cplx>(nodes.size(), 0.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const cplx e = V.shell->surface.weights[j] * V.shell->alpha[j] * phase(nodes[j]);
      p.direct += e;
      p.remainder += e * (ta[j] + tb[j] + ta[j] * tb[j]);
    }
    return p;
  };
  const PairingParts s1 = shell_terms(V1), s2 = shell_terms(V2);
  out.direct += s1.direct - s2.direct;
  out.remainder += s1.remainder - s2.remainder;
  return out;
}

struct FourierRow {
  Vec3 kappa{0, 0, 0};
  double tau = 0.0;
  bool present = true;  // false if some correction failed
  cplx direct = 0.0, estimate = 0.0, remainder = 0.0;
  double remainder_abs = 0.0;  // mean over seeds of |remainder|
  double remainder_std = 0.0;  // spread of |remainder| over seeds
  int seeds = 0;
  std::string note;
};

struct FourierSpec {
  std::vector<Vec3> kappas;
  std::vector<double> taus;
  int seeds = 3;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  CgoSpec cgo;
};

// Kappa on an n^3 (or n^2) grid in [-kmax, kmax]^d.
inline std::vector<Vec3> kappa_grid(int d, double kmax, int n) {
  std::vector<Vec3> out;
  auto c = [&](int i) { return n == 1 ? 0.0 : -kmax + 2.0 * kmax * i / (n - 1); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < (d == 3 ? n : 1); ++k) out.push_back({c(i), c(j), d == 3 ? c(k) : 0.0});
  return out;
}

inline std::vector<FourierRow> reconstruct_fourier(const Potential& V1, const Potential& V2, const FourierSpec& fs) {
  const Grid& g = V1.V0.field.grid;
  if (g.d != 3) throw ParameterError("reconstruct_fourier: d = 3 only");
  if (!(V2.V0.field.grid == g)) throw ParameterError("reconstruct_fourier: potentials on different grids");
  if (fs.seeds < 1) throw ParameterError("reconstruct_fourier: seeds must be >= 1");
  std::vector<FourierRow> rows;
  for (const auto& kappa : fs.kappas)
    for (double tau : fs.taus) {
      FourierRow row;
      row.kappa = kappa;
      row.tau = tau;
      std::vector<double> mags;
      for (int s = 0; s < fs.seeds; ++s) {
        try {
          const ZetaPair z = make_zeta_pair(kappa, tau, fs.lambda, fs.seed + 1000003ull * s);
          const CgoResult c1 = cgo_correction(V1, z.zeta1, fs.lambda, fs.cgo);
          const CgoResult c2 = cgo_correction(V2, z.zeta2, fs.lambda, fs.cgo);
          const PairingParts p = cgo_pairing(V1, V2, kappa, &c1.w, &c2.w);
          row.direct = p.direct;
          row.remainder += p.remainder;
          mags.push_back(std::abs(p.remainder));
        } catch (const Error& e) {
          row.present = false;
          row.note = e.what();
          break;
        }
      }
      if (row.present) {
        row.seeds = static_cast<int>(mags.size());
        row.remainder /= static_cast<double>(row.seeds);
        row.estimate = row.direct + row.remainder;
        double m = 0.0, v = 0.0;
        for (double x : mags) m += x;
        m /= mags.size();
        for (double x : mags) v += (x - m) * (x - m);
        row.remainder_abs = m;
        row.remainder_std = mags.size() > 1 ? std::sqrt(v / (mags.size() - 1)) : 0.0;
      }
      rows.push_back(row);
    }
  return rows;
}

// ---------------------------------------------------------------- rotation averaging

// Haar-distributed rotation: QR of a Gaussian matrix with the sign fix, then det = +1.
inline Eigen::Matrix3d haar_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Matrix3d A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(A);
  Eigen::Matrix3d Q = qr.householderQ();
  const Eigen::Matrix3d R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 3; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  if (Q.determinant() < 0.0) Q.col(0) *= -1.0;
  return Q;
}

struct DecayRow {
  double M = 0.0, mean = 0.0, stderr_ = 0.0;
  int samples = 0;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& x : rows) r.push_back({{"M", x.M}, {"mean", x.mean}, {"stderr", x.stderr_}, {"samples", x.samples}});
    return {{"rows", r}, {"slope", slope}};
  }
};

// Average of ||V||^2_{X^{-1/2}_zeta} over tau ~ U[M, 2M] and zeta = tau T e1 + i (tau^2 + lambda)^{1/2} T e2,
// T Haar on SO(3); slope of log(mean) against log M.
inline DecayTable rotation_average_decay(const Potential& V, double lambda, const std::vector<double>& Ms, int samples,
                                         std::uint64_t seed = 0) {
  const Grid& g = V.V0.field.grid;
  if (g.d != 3) throw ParameterError("rotation_average_decay: d = 3 only");
  if (samples < 2) throw ParameterError("rotation_average_decay: need at least 2 samples");
  for (double M : Ms)
    if (!(M > 0.0)) throw ParameterError("rotation_average_decay: M must be > 0");
  const ComplexField Vhat = detail::potential_times(V, nullptr, {0, 0, 0});
  std::mt19937_64 rng(seed);
  DecayTable t;
  for (double M : Ms) {
    std::uniform_real_distribution<double> ud(M, 2.0 * M);
    std::vector<double> vals;
    for (int s = 0; s < samples; ++s) {
      const Eigen::Matrix3d T = haar_rotation(rng);
      const double tau = ud(rng), b = std::sqrt(tau * tau + lambda);
      CVec3 zeta{};
      for (int a = 0; a < 3; ++a) zeta[a] = cplx(tau * T(a, 0), b * T(a, 1));
      const double n = xzeta_norm(Vhat, zeta, -0.5).value;
      vals.push_back(n * n);
    }
    DecayRow row;
    row.M = M;
    row.samples = samples;
    for (double v : vals) row.mean += v;
    row.mean /= samples;
    double var = 0.0;
    for (double v : vals) var += (v - row.mean) * (v - row.mean);
    row.stderr_ = std::sqrt(var / (samples - 1) / samples);
    t.rows.push_back(row);
  }
  if (Ms.size() >= 2) {
    std::vector<double> means;
    for (const auto& r : t.rows) means.push_back(r.mean);
    t.slope = loglog_slope(Ms, means);
  }
  return t;
}

}  // namespace lpscat
