#pragma once
// Empirical constants for the resolvent, embedding, trace and Carleman
// inequalities: max over seeded samples of LHS / RHS per parameter value.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpscat/errors.hpp"
#include "lpscat/grid.hpp"
#include "lpscat/lp.hpp"
#include "lpscat/norms.hpp"
#include "lpscat/potentials.hpp"
#include "lpscat/resolvent.hpp"
#include "lpscat/scattering.hpp"

namespace lpscat {

enum class Ineq { agmon, ah, krs, haberman, ht_local, krs_cgo, embedding_x, resolvent_x, trace, carleman, multiplication };
enum class Family { gaussian, band_limited, annulus, shell_source };

inline const std::vector<std::pair<Ineq, std::string>>& ineq_names() {
  static const std::vector<std::pair<Ineq, std::string>> v = {
      {Ineq::agmon, "agmon"},       {Ineq::ah, "ah"},
      {Ineq::krs, "krs"},           {Ineq::haberman, "haberman"},
      {Ineq::ht_local, "ht_local"}, {Ineq::krs_cgo, "krs_cgo"},
      {Ineq::embedding_x, "embedding_x"}, {Ineq::resolvent_x, "resolvent_x"},
      {Ineq::trace, "trace"},       {Ineq::carleman, "carleman"},
      {Ineq::multiplication, "multiplication"}};
  return v;
}

inline std::string ineq_name(Ineq i) {
  for (const auto& [k, s] : ineq_names())
    if (k == i) return s;
  return "?";
}

inline Ineq parse_ineq(const std::string& s) {
  for (const auto& [k, n] : ineq_names())
    if (n == s) return k;
  std::string all;
  for (const auto& kv : ineq_names()) all += (all.empty() ? "" : ", ") + kv.second;
  throw ParameterError("unknown inequality '" + s + "' (expected one of: " + all + ")");
}

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::band_limited: return "band_limited";
    case Family::annulus: return "annulus";
    case Family::shell_source: return "shell_source";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "band_limited") return Family::band_limited;
  if (s == "annulus") return Family::annulus;
  if (s == "shell_source") return Family::shell_source;
  throw ParameterError("unknown field family '" + s + "' (expected gaussian, band_limited, annulus or shell_source)");
}

// The parameter is tau for the conjugated-operator inequalities, lambda otherwise.
inline bool tau_indexed(Ineq i) {
  return i == Ineq::haberman || i == Ineq::ht_local || i == Ineq::krs_cgo || i == Ineq::carleman;
}

struct BenchSpec {
  Ineq ineq = Ineq::krs;
  std::vector<double> params;  // lambda or tau grid, strictly increasing
  Family family = Family::band_limited;
  int samples = 50;
  std::uint64_t seed = 1;
  Grid grid{3, 4.0, 32};
  int sign = +1;
  std::optional<Backend> backend;  // default_backend(d)
  double p = 0.0;                  // krs / embedding_x exponent; 0: p_d (krs), q_d (embedding_x)
  double delta = 0.75;             // agmon weight exponent
  double M = 64.0, R = 1.0;        // carleman
  double surface_radius = 1.0;     // trace
  std::string chi = "lp";          // ht_local: "lp" or "gaussian"
  double chi_radius = 1.0;
  LPBasis basis{};
  int threads = 1;
  bool keep_witness = false;
  bool allow_small_samples = false;  // unit tests only; reported constants need >= 50
};

struct BenchRow {
  double param = 0.0;
  double constant = 0.0;
  std::string witness;
  int used = 0;
  int skipped = 0;
  double alt_basis = std::numeric_limits<double>::quiet_NaN();  // witness ratio under the other LP basis
  int violations = 0;                                           // carleman only
  std::optional<ComplexField> witness_field;
};

struct BenchResult {
  BenchSpec spec;
  std::vector<BenchRow> rows;
  std::string bound = "estimate";  // "lower" when the denominator is an upper bound
  nlohmann::ordered_json notes = nlohmann::ordered_json::array();

  std::string to_csv() const {
    std::string s = std::string(tau_indexed(spec.ineq) ? "tau" : "lambda") + ",constant,witness,samples,skipped,bound\n";
    char b[128];
    for (const auto& r : rows) {
      std::snprintf(b, sizeof b, "%.17g,%.17g,", r.param, r.constant);
      s += b + r.witness + "," + std::to_string(r.used) + "," + std::to_string(r.skipped) + "," + bound + "\n";
    }
    return s;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["ineq"] = ineq_name(spec.ineq);
    j["family"] = family_name(spec.family);
    j["samples"] = spec.samples;
    j["seed"] = spec.seed;
    j["grid"] = {{"d", spec.grid.d}, {"L", spec.grid.L}, {"N", spec.grid.N}};
    j["basis"] = basis_name(spec.basis.kind);
    j["bound"] = bound;
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json x;
      x["param"] = r.param;
      x["constant"] = r.constant;
      x["witness"] = r.witness;
      x["samples"] = r.used;
      x["skipped"] = r.skipped;
      if (std::isfinite(r.alt_basis)) x["alt_basis_constant"] = r.alt_basis;
      if (spec.ineq == Ineq::carleman) x["violations"] = r.violations;
      rs.push_back(x);
    }
    j["rows"] = rs;
    j["notes"] = notes;
    return j;
  }
};

// ---------------------------------------------------------------- field families

namespace detail {

inline double nyquist(const Grid& g) { return kPi * g.N / (2.0 * g.L); }

inline std::mt19937_64 cell_rng(std::uint64_t seed, std::size_t param_index, std::size_t sample) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                  static_cast<std::uint32_t>(param_index), static_cast<std::uint32_t>(sample)};
  return std::mt19937_64(s);
}

inline cplx cnormal(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng);
  return {a, n(rng)};
}

inline Vec3 random_direction(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v{0, 0, 0};
  double s = 0.0;
  do {
    s = 0.0;
    for (int a = 0; a < d; ++a) {
      v[a] = n(rng);
      s += v[a] * v[a];
    }
  } while (s < 1e-12);
  for (int a = 0; a < d; ++a) v[a] /= std::sqrt(s);
  return v;
}

// Random coefficients on lattice modes with lo <= |xi| <= hi, then a Gaussian window of width L/8.
inline ComplexField random_shell_modes(const Grid& g, double lo, double hi, std::mt19937_64& rng) {
  ComplexField F(g, Side::frequency);
  int count = 0;
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    const double r = std::sqrt(norm2(xi, g.d));
    if (r >= lo && r <= hi) {
      F.data[idx] = cnormal(rng);
      ++count;
    }
  });
  if (count == 0) F.data[0] = cnormal(rng);
  ComplexField u = to_physical(F);
  const double w = g.L / 8.0;
  for_each_point(g, [&](std::size_t idx, const Vec3& x) { u.data[idx] *= std::exp(-norm2(x, g.d) / (2.0 * w * w)); });
  return u;
}

}  // namespace detail

// One seeded sample; k0 is the frequency scale of the sweep (sqrt(lambda) or tau).
inline ComplexField draw_field(const Grid& g, Family fam, double k0, std::mt19937_64& rng) {
  const double nyq = detail::nyquist(g);
  const double kc = std::clamp(k0, 3.0 * g.dxi(), 0.7 * nyq);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  switch (fam) {
    case Family::band_limited: return detail::random_shell_modes(g, 0.0, kc, rng);
    case Family::annulus: {
      double lo = kc / std::sqrt(2.0), hi = std::min(kc * std::sqrt(2.0), 0.9 * nyq);
      if (hi - lo < 2.0 * g.dxi()) lo = std::max(0.0, hi - 2.0 * g.dxi());
      return detail::random_shell_modes(g, lo, hi, rng);
    }
    case Family::gaussian: {
      const double slo = 2.0 * g.dx(), shi = std::max(slo, g.L / 6.0);
      const double s = slo + (shi - slo) * U(rng);
      Vec3 c{0, 0, 0};
      for (int a = 0; a < g.d; ++a) c[a] = (U(rng) - 0.5) * 0.5 * g.L;
      const Vec3 dir = detail::random_direction(g.d, rng);
      const double m = std::min(1.5 * kc * U(rng), 0.7 * nyq);
      const cplx amp = detail::cnormal(rng);
      return sample(g, [&](const Vec3& x) {
        double r2 = 0.0, ph = 0.0;
        for (int a = 0; a < g.d; ++a) {
          r2 += (x[a] - c[a]) * (x[a] - c[a]);
          ph += m * dir[a] * x[a];
        }
        return amp * std::exp(-r2 / (2.0 * s * s)) * std::polar(1.0, ph);
      });
    }
    case Family::shell_source: {
      const double r = std::min(1.0, g.L / 4.0);
      const auto S = sphere_quadrature(g.d, r, {0, 0, 0}, g.d == 3 ? 6 : 24);
      std::vector<cplx> q(S.size());
      for (std::size_t n = 0; n < q.size(); ++n) q[n] = S.weights[n] * detail::cnormal(rng);
      ComplexField F = spread(g, S.nodes, q);
      const double sg = 2.0 * g.dx();
      F = apply_multiplier(F, [&](const Vec3& xi, int d) { return std::exp(-0.5 * sg * sg * norm2(xi, d)); });
      return to_physical(F);
    }
  }
  return ComplexField(g, Side::physical);
}

// ---------------------------------------------------------------- auxiliary fields

// Smooth cutoff supported in |x| < r, equal to 1 at the origin; the profile is
// already below 1e-7 at 0.8 r, which keeps the edge resolvable.
inline ComplexField radial_cutoff(const Grid& g, double r) {
  return sample(g, [&](const Vec3& x) {
    const double t2 = norm2(x, g.d) / (r * r);
    return cplx(t2 < 1.0 ? std::exp(-4.0 * t2 / (1.0 - t2)) : 0.0);
  });
}

// (2 pi)^{-d/2} int e^{i s e.xi} phi(xi) dxi for a unit vector e, with phi = LP phi(2|xi|)
// supported in the unit ball.
inline double chi_profile(int d, double s, const LPBasis& b = {}) {
  const auto gl = gauss_legendre(64);
  double acc = 0.0;
  for (std::size_t n = 0; n < gl.x.size(); ++n) {
    const double rho = 0.5 * (gl.x[n] + 1.0), w = 0.5 * gl.w[n];
    const double ph = b.phi(2.0 * rho);
    if (d == 3) {
      const double z = s * rho;
      acc += w * ph * rho * rho * 4.0 * kPi * (z == 0.0 ? 1.0 : std::sin(z) / z);
    } else {
      acc += w * ph * rho * 2.0 * kPi * std::cyl_bessel_j(0.0, s * rho);
    }
  }
  return std::pow(2.0 * kPi, -0.5 * d) * acc;
}

// Largest delta in (0, 1] with |int e^{i x.xi} phi| >= (1/2) int phi for |x| <= delta.
inline double chi_delta(int d, const LPBasis& b = {}) {
  const double half = 0.5 * chi_profile(d, 0.0, b);
  double delta = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double s = i * 1e-3;
    if (std::abs(chi_profile(d, s, b)) < half) break;
    delta = s;
  }
  return delta;
}

inline ComplexField chi_field(const Grid& g, const std::string& kind, double R, const LPBasis& b = {}) {
  if (kind == "gaussian") return sample(g, [&](const Vec3& x) { return cplx(std::exp(-norm2(x, g.d) / (2.0 * R * R))); });
  if (kind != "lp") throw ParameterError("unknown chi '" + kind + "' (expected lp or gaussian)");
  const double a = chi_delta(g.d, b) / R;
  return sample(g, [&](const Vec3& x) { return cplx(chi_profile(g.d, a * std::sqrt(norm2(x, g.d)), b)); });
}

// e^phi Delta (e^{-phi} u) for phi = tau x_d + M x_d^2 / 2.
inline ComplexField carleman_operator(const ComplexField& u, double tau, double M) {
  const Grid& g = u.grid;
  const int d = g.d;
  const ComplexField U = to_frequency(u);
  const ComplexField lap = to_physical(apply_multiplier(U, [](const Vec3& xi, int dd) { return cplx(-norm2(xi, dd)); }));
  const ComplexField dd =
      to_physical(apply_multiplier(U, [d](const Vec3& xi, int) { return cplx(0.0, xi[d - 1]); }));
  const ComplexField up = to_physical(u);
  ComplexField out(g, Side::physical);
  for_each_point(g, [&](std::size_t idx, const Vec3& x) {
    const double a = tau + M * x[d - 1];
    out.data[idx] = lap.data[idx] - 2.0 * a * dd.data[idx] + (a * a - M) * up.data[idx];
  });
  return out;
}

inline double weighted_l2(const ComplexField& f, double e) {
  const ComplexField u = to_physical(f);
  double s = 0.0;
  for_each_point(u.grid, [&](std::size_t idx, const Vec3& x) {
    s += std::pow(1.0 + norm2(x, u.grid.d), e) * std::norm(u.data[idx]);
  });
  return std::sqrt(s * u.grid.cell());
}

// ---------------------------------------------------------------- the bench

inline void validate(const BenchSpec& s) {
  std::string err;
  const int d = s.grid.d;
  if (s.params.empty()) err += "parameter grid is empty; ";
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    if (!(s.params[i] > 0.0) || !std::isfinite(s.params[i])) err += "parameters must be positive; ";
    if (i && !(s.params[i] > s.params[i - 1])) err += "parameter grid must be strictly increasing; ";
  }
  if (s.samples < 1 || (s.samples < 50 && !s.allow_small_samples)) err += "sample count must be >= 50; ";
  if (s.threads < 1) err += "threads must be >= 1; ";
  if ((s.ineq == Ineq::krs || s.ineq == Ineq::haberman || s.ineq == Ineq::krs_cgo) && d < 3)
    err += ineq_name(s.ineq) + " requires d >= 3; ";
  if (s.ineq == Ineq::krs && d >= 3) {
    const double p = s.p > 0.0 ? s.p : p_exponent(d);
    const double gap = 1.0 - 2.0 / p;
    if (!(p > 2.0) || gap < 2.0 / (d + 1) - 1e-12 || gap > 2.0 / d + 1e-12)
      err += "krs exponent p = " + num(p) + " outside 2/(d+1) <= 1/p' - 1/p <= 2/d; ";
  }
  if (s.ineq == Ineq::embedding_x) {
    const double p = s.p > 0.0 ? s.p : q_exponent(d);
    const double hi = p_exponent(d);
    if (p < q_exponent(d) * (1 - 1e-12) || (!std::isinf(hi) && p > hi * (1 + 1e-12)))
      err += "embedding exponent p = " + num(p) + " outside [q_d, p_d]; ";
  }
  if (s.ineq == Ineq::agmon && !(s.delta > 0.5)) err += "agmon weight exponent must be > 1/2; ";
  if (s.ineq == Ineq::carleman) {
    if (!(s.R >= 1.0)) err += "carleman R must be >= 1; ";
    if (!(s.M >= 1.0)) err += "carleman M must be >= 1; ";
    if (s.R >= s.grid.L) err += "carleman ball |x| < R must lie inside the box; ";
    for (double t : s.params)
      if (!(t > 8.0 * s.M * s.R)) {
        err += "carleman side condition tau > 8 M R fails at tau = " + num(t) + "; ";
        break;
      }
  }
  if (s.ineq == Ineq::trace && !(s.surface_radius > 0.0 && s.surface_radius < s.grid.L))
    err += "trace surface radius must lie in (0, L); ";
  if (s.ineq == Ineq::ht_local && s.chi != "lp" && s.chi != "gaussian") err += "chi must be lp or gaussian; ";
  if (!err.empty()) throw ParameterError("bench: " + err.substr(0, err.size() - 2));
}

namespace detail {

struct Ratio {
  double value = 0.0;
  bool skipped = false;
};

// LHS / RHS for one sample; the basis argument matters only for the LP-based norms.
inline Ratio bench_ratio(const BenchSpec& s, double param, const ComplexField& f, const LPBasis& b,
                         const ComplexField* aux) {
  const Grid& g = f.grid;
  const int d = g.d;
  auto ratio = [](double lhs, double rhs) { return rhs > 0.0 ? Ratio{lhs / rhs, false} : Ratio{0.0, true}; };
  ResolventSpec rs;
  rs.lambda = param;
  rs.sign = s.sign;
  rs.backend = s.backend.value_or(default_backend(d));
  switch (s.ineq) {
    case Ineq::agmon: {
      const ComplexField u = resolve(f, rs);
      return ratio(std::sqrt(param) * weighted_l2(u, -s.delta), weighted_l2(f, s.delta));
    }
    case Ineq::ah: {
      const ComplexField u = resolve(f, rs);
      return ratio(std::sqrt(param) * ah_dual_norm(u).value, ah_norm(f).value);
    }
    case Ineq::krs: {
      const double p = s.p > 0.0 ? s.p : p_exponent(d);
      const double pp = dual_exponent(p);
      const double e = 0.5 * d * (1.0 / pp - 1.0 / p) - 1.0;
      const ComplexField u = resolve(f, rs);
      return ratio(lp_norm(u, p), std::pow(param, e) * lp_norm(f, pp));
    }
    case Ineq::haberman: return ratio(lp_norm(f, p_exponent(d)), bourgain_norm(f, param, 0.5).value);
    case Ineq::ht_local: {
      ComplexField cf = to_physical(f);
      for (std::size_t i = 0; i < cf.size(); ++i) cf.data[i] *= aux->data[i];
      return ratio(std::sqrt(param) * l2_norm(cf), bourgain_norm(f, param, 0.5).value);
    }
    case Ineq::krs_cgo: {
      const double pd = p_exponent(d);
      return ratio(lp_norm(conj_resolve_tau(f, param), pd), lp_norm(f, dual_exponent(pd)));
    }
    case Ineq::embedding_x: {
      const double p = s.p > 0.0 ? s.p : q_exponent(d);
      const double lhs = std::pow(param, 0.25) * ah_dual_norm(f).value +
                         std::pow(param, 0.5 * d * (inv(p) - inv(p_exponent(d)))) * lp_norm(f, p);
      return ratio(lhs, x_star_norm(f, param, b).value);
    }
    case Ineq::resolvent_x: {
      const ComplexField u = resolve(f, rs);
      return ratio(x_star_norm(u, param, b).value, x_norm_upper(f, param, b).value);
    }
    case Ineq::trace: {
      const double r = s.surface_radius;
      const int n = std::max(8, static_cast<int>(std::ceil(nyquist(g) * r)));
      const auto S = sphere_quadrature(d, r, {0, 0, 0}, d == 3 ? n : 4 * n);
      const auto t = trace_eval(f, S);
      double l2 = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) l2 += S.weights[i] * std::norm(t[i]);
      return ratio(std::sqrt(l2), y_star_norm(f, param, b).value);
    }
    case Ineq::carleman: {
      const ComplexField Pu = carleman_operator(f, param, s.M);
      return ratio(ytm_norm(f, param, s.M, 0.5).value, s.R * ytm_norm(Pu, param, s.M, -0.5).value);
    }
    case Ineq::multiplication: {
      ComplexField vu = to_physical(f);
      for (std::size_t i = 0; i < vu.size(); ++i) vu.data[i] *= aux->data[i];
      return ratio(x_norm_upper(vu, param, b).value, x_star_norm(f, param, b).value);
    }
  }
  return {};
}

inline bool basis_dependent(Ineq i) {
  return i == Ineq::embedding_x || i == Ineq::resolvent_x || i == Ineq::trace || i == Ineq::multiplication;
}

}  // namespace detail

inline BenchResult bench(const BenchSpec& spec) {
  validate(spec);
  const Grid& g = spec.grid;
  BenchResult res;
  res.spec = spec;
  if (spec.ineq == Ineq::resolvent_x) {
    res.bound = "lower";
    res.notes.push_back("denominator is the blockwise upper bound on the X_lambda norm; constants are lower bounds");
  }
  std::optional<ComplexField> aux;
  if (spec.ineq == Ineq::ht_local) {
    aux = chi_field(g, spec.chi, spec.chi_radius, spec.basis);
    res.notes.push_back("chi = " + spec.chi + ", radius " + num(spec.chi_radius));
  }
  if (spec.ineq == Ineq::multiplication) {
    aux = gaussian_potential(g, 1.0, g.L / 8.0).field;
    res.notes.push_back("V0 = unit Gaussian of width L/8");
  }
  ComplexField cutoff;
  if (spec.ineq == Ineq::carleman) {
    cutoff = radial_cutoff(g, 0.95 * spec.R);
    res.notes.push_back("samples multiplied by a smooth cutoff supported in |x| < 0.95 R");
  }
  if (2.0 * g.L < 8.0 * std::min(1.0, g.L / 4.0)) res.notes.push_back("box is small relative to the sample support");
  const LPBasis alt{spec.basis.kind == BasisKind::smooth ? BasisKind::c2poly : BasisKind::smooth};

  for (std::size_t pi = 0; pi < spec.params.size(); ++pi) {
    const double param = spec.params[pi];
    const double k0 = tau_indexed(spec.ineq) ? param : std::sqrt(param);
    std::vector<detail::Ratio> out(spec.samples);
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&]() {
      for (int n; (n = next++) < spec.samples;) {
        try {
          auto rng = detail::cell_rng(spec.seed, pi, static_cast<std::size_t>(n));
          ComplexField f = draw_field(g, spec.family, k0, rng);
          if (spec.ineq == Ineq::carleman)
            for (std::size_t i = 0; i < f.size(); ++i) f.data[i] *= cutoff.data[i];
          out[n] = detail::bench_ratio(spec, param, f, spec.basis, aux ? &*aux : nullptr);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          next = spec.samples;
        }
      }
    };
    const int nt = std::min(spec.threads, spec.samples);
    if (nt <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nt; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);

    BenchRow row;
    row.param = param;
    int arg = -1;
    for (int n = 0; n < spec.samples; ++n) {
      if (out[n].skipped) {
        ++row.skipped;
        continue;
      }
      ++row.used;
      if (arg < 0 || out[n].value > row.constant) {
        row.constant = out[n].value;
        arg = n;
      }
      if (spec.ineq == Ineq::carleman && out[n].value * spec.R * spec.R >= spec.M) ++row.violations;
    }
    if (arg >= 0) {
      row.witness = std::string(family_name(spec.family)) + "#" + std::to_string(arg);
      if (spec.keep_witness || detail::basis_dependent(spec.ineq)) {
        auto rng = detail::cell_rng(spec.seed, pi, static_cast<std::size_t>(arg));
        ComplexField f = draw_field(g, spec.family, k0, rng);
        if (spec.ineq == Ineq::carleman)
          for (std::size_t i = 0; i < f.size(); ++i) f.data[i] *= cutoff.data[i];
        if (detail::basis_dependent(spec.ineq))
          row.alt_basis = detail::bench_ratio(spec, param, f, alt, aux ? &*aux : nullptr).value;
        if (spec.keep_witness) row.witness_field = std::move(f);
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

// ---------------------------------------------------------------- summary

struct SweepSummary {
  std::string ineq;
  double max_constant = 0.0;
  double spread = std::numeric_limits<double>::quiet_NaN();  // max / min constant over the grid
  std::optional<double> slope;
  double basis_sensitivity = std::numeric_limits<double>::quiet_NaN();
  int violations = 0;
  std::string bound;
  std::string reason;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["ineq"] = ineq;
    j["max_constant"] = max_constant;
    j["spread"] = std::isfinite(spread) ? nlohmann::ordered_json(spread) : nlohmann::ordered_json();
    j["slope"] = slope ? nlohmann::ordered_json(*slope) : nlohmann::ordered_json();
    j["basis_sensitivity"] =
        std::isfinite(basis_sensitivity) ? nlohmann::ordered_json(basis_sensitivity) : nlohmann::ordered_json();
    j["violations"] = violations;
    j["bound"] = bound;
    if (!reason.empty()) j["reason"] = reason;
    return j;
  }
};

inline SweepSummary sweep_report(const BenchResult& r) {
  SweepSummary s;
  s.ineq = ineq_name(r.spec.ineq);
  s.bound = r.bound;
  std::vector<double> x, y;
  double sens = -1.0;
  for (const auto& row : r.rows) {
    s.violations += row.violations;
    if (row.used == 0) continue;
    x.push_back(row.param);
    y.push_back(row.constant);
    s.max_constant = std::max(s.max_constant, row.constant);
    if (std::isfinite(row.alt_basis) && row.constant > 0.0)
      sens = std::max(sens, std::abs(row.alt_basis / row.constant - 1.0));
  }
  if (sens >= 0.0) s.basis_sensitivity = sens;
  if (x.empty()) {
    s.reason = "no samples with nonzero right-hand side";
    return s;
  }
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo > 0.0) s.spread = *hi / *lo;
  if (x.size() < 2) {
    s.reason = "slope needs at least 2 grid points";
    return s;
  }
  const double sl = loglog_slope(x, y);
  if (std::isfinite(sl))
    s.slope = sl;
  else
    s.reason = "zero constant on the grid; slope undefined";
  return s;
}

}  // namespace lpscat
