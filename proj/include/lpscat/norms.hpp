#pragma once
// Norms: Agmon-Hormander pair, Y / Z / X families adapted to lambda, and the
// frequency-weighted spaces attached to q_tau and p_zeta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpscat/grid.hpp"
#include "lpscat/lp.hpp"

namespace lpscat {

struct NormReport {
  std::string name;
  double value = 0.0;
  std::vector<std::pair<std::string, double>> blocks;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::vector<std::string> truncation_flags;

  double block(const std::string& label) const {
    for (const auto& [k, v] : blocks)
      if (k == label) return v;
    return 0.0;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["value"] = value;
    nlohmann::ordered_json b = nlohmann::ordered_json::object();
    for (const auto& [k, v] : blocks) b[k] = v;
    j["blocks"] = b;
    j["params"] = params;
    j["truncation_flags"] = truncation_flags;
    return j;
  }
};

// ---------------------------------------------------------------- exponents

inline double q_exponent(int d) { return 2.0 * (d + 1) / (d - 1.0); }

// p_d, with p_2 = infinity.
inline double p_exponent(int d) {
  return d == 2 ? std::numeric_limits<double>::infinity() : 1.0 / (0.5 - 1.0 / d);
}

inline double dual_exponent(double p) {
  if (std::isinf(p)) return 1.0;
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return p / (p - 1.0);
}

inline double inv(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

// ---------------------------------------------------------------- AH norms

struct AnnulusL2 {
  std::vector<double> l2;  // index j = 0..top
  std::vector<std::string> flags;
};

inline std::vector<std::string> annulus_flags(const Grid& g) {
  std::vector<std::string> flags;
  for (int j = 0; j <= annulus_top(g); ++j)
    if (std::ldexp(1.0, j) > g.L) flags.push_back("D_" + std::to_string(j) + " exceeds the box");
  return flags;
}

inline AnnulusL2 annulus_l2(const ComplexField& f) {
  const ComplexField u = to_physical(f);
  const Grid& g = u.grid;
  const int top = annulus_top(g);
  const auto& lab = annulus_labels(g);
  std::vector<double> s(top + 1, 0.0);
  for (std::size_t n = 0; n < u.size(); ++n)
    if (lab[n] <= top) s[lab[n]] += std::norm(u.data[n]);
  AnnulusL2 out;
  out.l2.resize(top + 1);
  for (int j = 0; j <= top; ++j) out.l2[j] = std::sqrt(s[j] * g.cell());
  out.flags = annulus_flags(g);
  return out;
}

inline NormReport ah_norm(const ComplexField& f) {
  NormReport r;
  r.name = "ah";
  auto a = annulus_l2(f);
  for (std::size_t j = 0; j < a.l2.size(); ++j) {
    const double c = std::sqrt(std::ldexp(1.0, static_cast<int>(j))) * a.l2[j];
    r.blocks.emplace_back("j=" + std::to_string(j), c);
    r.value += c;
  }
  r.truncation_flags = std::move(a.flags);
  return r;
}

inline NormReport ah_dual_norm(const ComplexField& f) {
  NormReport r;
  r.name = "ah_dual";
  auto a = annulus_l2(f);
  for (std::size_t j = 0; j < a.l2.size(); ++j) {
    const double c = a.l2[j] / std::sqrt(std::ldexp(1.0, static_cast<int>(j)));
    r.blocks.emplace_back("j=" + std::to_string(j), c);
    r.value = std::max(r.value, c);
  }
  r.truncation_flags = std::move(a.flags);
  return r;
}

// ---------------------------------------------------------------- lambda blocks

namespace detail {

// Off-critical part: low block ||m^e P_{<I} fhat|| and the high blocks
// sum_{k > k_lambda+1} ||m^e P_k fhat||^2 (returned as a root).
struct OffCritical {
  double low = 0.0;
  double high = 0.0;
};

inline OffCritical off_critical(const ComplexField& F, double lambda, double e, const LPBasis& b) {
  const auto ci = critical_index(lambda);
  const int klow = ci.k_lambda - 3;
  const int khigh = ci.k_lambda + 2;
  const int d = F.grid.d;
  double lo = 0.0, hi = 0.0;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) {
    const double a2 = std::norm(F.data[idx]);
    if (a2 == 0.0) return;
    const double r2 = norm2(xi, d);
    const double r = std::sqrt(r2);
    const double m = std::abs(lambda - r2);
    const double pl = phi_k(b, r, klow);
    double ph2 = 0.0;
    if (r > 0.0) {
      const int kc = static_cast<int>(std::floor(std::log2(r)));
      for (int k = std::max(khigh, kc - 1); k <= kc + 2; ++k) {
        const double p = psi_k(b, r, k);
        ph2 += p * p;
      }
    }
    if (pl == 0.0 && ph2 == 0.0) return;
    if (m == 0.0) throw std::logic_error("off-critical block meets the zero set of m_lambda");
    const double w = std::pow(m, 2.0 * e);
    lo += pl * pl * a2 * w;
    hi += ph2 * a2 * w;
  });
  const double dc = F.grid.dcell();
  return {std::sqrt(lo * dc), std::sqrt(hi * dc)};
}

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be > 0");
}

}  // namespace detail

// Which piece a critical block contributes.
enum class CriticalPiece { ah_sum, ah_sup, lp, ah_sup_plus_lp };

namespace detail {

inline NormReport lambda_norm(const std::string& name, const ComplexField& f, double lambda, double e,
                              CriticalPiece piece, double p, const LPBasis& b) {
  check_lambda(lambda);
  const ComplexField F = to_frequency(f);
  const int d = F.grid.d;
  const auto ci = critical_index(lambda);
  NormReport r;
  r.name = name;
  r.params["lambda"] = lambda;
  r.params["k_lambda"] = ci.k_lambda;
  r.params["basis"] = basis_name(b.kind);
  const auto off = off_critical(F, lambda, e, b);
  r.blocks.emplace_back("low", off.low);
  double sum2 = off.low * off.low + off.high * off.high;
  const double pd = p_exponent(d);
  const double qd = q_exponent(d);
  for (int k : ci.I) {
    const ComplexField Pk = to_physical(project_freq(F, k, b));
    double c2 = 0.0;
    switch (piece) {
      case CriticalPiece::ah_sum: {
        const double a = ah_norm(Pk).value;
        c2 = std::pow(lambda, -0.5) * a * a;
        break;
      }
      case CriticalPiece::ah_sup: {
        const double a = ah_dual_norm(Pk).value;
        c2 = std::sqrt(lambda) * a * a;
        break;
      }
      case CriticalPiece::lp: {
        // Z_{lambda,p'} when p <= 2 (p is the dual exponent), Z*_{lambda,p} otherwise.
        const double ref = p <= 2.0 ? 1.0 - inv(pd) : inv(pd);
        const double a = lp_norm(Pk, p);
        c2 = std::pow(lambda, d * (inv(p) - ref)) * a * a;
        break;
      }
      case CriticalPiece::ah_sup_plus_lp: {
        const double a = ah_dual_norm(Pk).value;
        const double l = lp_norm(Pk, qd);
        c2 = std::sqrt(lambda) * a * a + std::pow(lambda, d * (1.0 / qd - inv(pd))) * l * l;
        break;
      }
    }
    r.blocks.emplace_back("k=" + std::to_string(k), std::sqrt(c2));
    sum2 += c2;
  }
  r.blocks.emplace_back("high", off.high);
  r.value = std::sqrt(sum2);
  if (piece != CriticalPiece::lp) r.truncation_flags = annulus_flags(F.grid);
  return r;
}

}  // namespace detail

inline NormReport y_norm(const ComplexField& f, double lambda, const LPBasis& b = {}) {
  return detail::lambda_norm("y", f, lambda, -0.5, CriticalPiece::ah_sum, 0.0, b);
}

inline NormReport y_star_norm(const ComplexField& u, double lambda, const LPBasis& b = {}) {
  return detail::lambda_norm("y_star", u, lambda, 0.5, CriticalPiece::ah_sup, 0.0, b);
}

inline void check_p_range(int d, double p, const char* who) {
  const double lo = q_exponent(d), hi = p_exponent(d);
  const double tol = 1e-12;
  const bool ok = std::isinf(p) ? std::isinf(hi) : (p >= lo * (1 - tol) && (std::isinf(hi) || p <= hi * (1 + tol)));
  if (!ok)
    throw ParameterError(std::string(who) + ": p = " + std::to_string(p) + " outside [" + std::to_string(lo) + ", " +
                         (std::isinf(hi) ? std::string("inf") : std::to_string(hi)) + "]");
}

// p_prime is the integrability exponent of g; its dual must lie in [q_d, p_d].
inline NormReport z_norm(const ComplexField& g, double lambda, double p_prime, const LPBasis& b = {}) {
  check_p_range(g.grid.d, dual_exponent(p_prime), "z_norm");
  auto r = detail::lambda_norm("z", g, lambda, -0.5, CriticalPiece::lp, p_prime, b);
  r.params["p_prime"] = p_prime;
  return r;
}

inline NormReport z_star_norm(const ComplexField& u, double lambda, double p, const LPBasis& b = {}) {
  check_p_range(u.grid.d, p, "z_star_norm");
  auto r = detail::lambda_norm("z_star", u, lambda, 0.5, CriticalPiece::lp, p, b);
  r.params["p"] = std::isinf(p) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p);
  return r;
}

inline NormReport x_star_norm(const ComplexField& u, double lambda, const LPBasis& b = {}) {
  return detail::lambda_norm("x_star", u, lambda, 0.5, CriticalPiece::ah_sup_plus_lp, 0.0, b);
}

// Upper bound on the X_lambda norm from an explicit splitting h = f + g where
// g collects the critical blocks sent to Z (at p' = q_d'). Without `refine`
// each block goes wholly to the cheaper side; with it, each block weight t_k
// in g = sum t_k P_k h is tuned by golden-section search.
inline NormReport x_norm_upper(const ComplexField& h, double lambda, const LPBasis& b = {}, bool refine = false) {
  detail::check_lambda(lambda);
  const int d = h.grid.d;
  const double qdp = dual_exponent(q_exponent(d));
  const ComplexField H = to_frequency(h);
  const auto ci = critical_index(lambda);
  std::vector<ComplexField> Pk;
  std::vector<double> t(4, 0.0);
  nlohmann::ordered_json choice = nlohmann::ordered_json::object();
  const double pdp = 1.0 - inv(p_exponent(d));
  for (int n = 0; n < 4; ++n) {
    Pk.push_back(project_freq(H, ci.I[n], b));
    const ComplexField P = to_physical(Pk.back());
    const double y = std::pow(lambda, -0.25) * ah_norm(P).value;
    const double z = std::pow(lambda, 0.5 * d * (1.0 / qdp - pdp)) * lp_norm(P, qdp);
    t[n] = z < y ? 1.0 : 0.0;
    choice["k=" + std::to_string(ci.I[n])] = z < y ? "Z" : "Y";
  }
  auto split_cost = [&](const std::vector<double>& w, double* yv, double* zv) {
    ComplexField g(H.grid, Side::frequency);
    g.shift = H.shift;
    bool any = false;
    for (int n = 0; n < 4; ++n) {
      if (w[n] == 0.0) continue;
      any = true;
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += w[n] * Pk[n].data[i];
    }
    ComplexField f = H;
    for (std::size_t i = 0; i < f.size(); ++i) f.data[i] -= g.data[i];
    const double y = y_norm(f, lambda, b).value;
    const double z = any ? z_norm(g, lambda, qdp, b).value : 0.0;
    if (yv) *yv = y;
    if (zv) *zv = z;
    return y + z;
  };
  double best = split_cost(t, nullptr, nullptr);
  if (refine) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int n = 0; n < 4; ++n) {
        auto cost_at = [&](double s) {
          auto w = t;
          w[n] = s;
          return split_cost(w, nullptr, nullptr);
        };
        double a = 0.0, c = 1.0;
        double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
        double f1 = cost_at(x1), f2 = cost_at(x2);
        for (int it = 0; it < 30; ++it) {
          if (f1 < f2) {
            c = x2; x2 = x1; f2 = f1; x1 = c - gr * (c - a); f1 = cost_at(x1);
          } else {
            a = x1; x1 = x2; f1 = f2; x2 = a + gr * (c - a); f2 = cost_at(x2);
          }
        }
        const double s = f1 < f2 ? x1 : x2;
        const double fs = std::min(f1, f2);
        if (fs < best) {
          best = fs;
          t[n] = s;
        }
      }
    }
    for (int n = 0; n < 4; ++n) choice["k=" + std::to_string(ci.I[n])] = t[n];
  }
  double yv = 0.0, zv = 0.0;
  best = split_cost(t, &yv, &zv);
  NormReport r;
  r.name = "x_upper";
  r.value = best;
  r.blocks.emplace_back("y_part", yv);
  r.blocks.emplace_back("z_part", zv);
  r.params["lambda"] = lambda;
  r.params["basis"] = basis_name(b.kind);
  r.params["refined"] = refine;
  r.params["choice"] = choice;
  r.params["bound"] = "upper";
  return r;
}

// ---------------------------------------------------------------- conjugated spaces

inline double epsilon_floor(double tau) { return 1e-8 * (1.0 + tau * tau); }

inline NormReport bourgain_norm(const ComplexField& f, double tau, double s) {
  if (!(tau > 0.0)) throw ParameterError("bourgain_norm: tau must be > 0");
  const ComplexField F = to_frequency(f);
  const int d = F.grid.d;
  const double floor = epsilon_floor(tau);
  double tot = 0.0;
  for (const auto& v : F.data) tot += std::norm(v);
  const double thr = 1e-28 * tot;
  double sum = 0.0;
  std::string bad;
  int nbad = 0;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) {
    const double a2 = std::norm(F.data[idx]);
    const double q = std::abs(q_tau(tau, xi, d));
    if (s < 0.0 && q < floor) {
      if (a2 > thr) {
        if (nbad++ < 4) {
          bad += " (";
          for (int a = 0; a < d; ++a) bad += (a ? "," : "") + std::to_string(xi[a]);
          bad += ")";
        }
      }
      return;
    }
    if (a2 != 0.0) sum += std::pow(q, 2.0 * s) * a2;
  });
  if (nbad) throw RegimeError("symbol singularity: q_tau vanishes on " + std::to_string(nbad) + " mode(s) carrying mass:" + bad);
  NormReport r;
  r.name = "bourgain";
  r.value = std::sqrt(sum * F.grid.dcell());
  r.blocks.emplace_back("all", r.value);
  r.params["tau"] = tau;
  r.params["s"] = s;
  return r;
}

inline NormReport ytm_norm(const ComplexField& f, double tau, double M, double s) {
  if (!(tau >= 1.0) || !(M >= 1.0)) throw ParameterError("ytm_norm: tau and M must be >= 1");
  const ComplexField F = to_frequency(f);
  const int d = F.grid.d;
  double sum = 0.0;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) {
    const double a2 = std::norm(F.data[idx]);
    if (a2 == 0.0) return;
    const double q2 = std::norm(q_tau(tau, xi, d));
    sum += std::pow(M * tau * tau + q2 / M, s) * a2;
  });
  NormReport r;
  r.name = "ytm";
  r.value = std::sqrt(sum * F.grid.dcell());
  r.blocks.emplace_back("all", r.value);
  r.params["tau"] = tau;
  r.params["M"] = M;
  r.params["s"] = s;
  return r;
}

inline double cnorm(const CVec3& z, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += std::norm(z[a]);
  return std::sqrt(s);
}

inline NormReport xzeta_norm(const ComplexField& f, const CVec3& zeta, double s) {
  const int d = f.grid.d;
  const double az = cnorm(zeta, d);
  if (!(az > 0.0)) throw ParameterError("xzeta_norm: |zeta| must be > 0");
  const ComplexField F = to_frequency(f);
  double sum = 0.0;
  for_each_mode(F.grid, F.shift, [&](std::size_t idx, const Vec3& xi) {
    const double a2 = std::norm(F.data[idx]);
    if (a2 == 0.0) return;
    sum += std::pow(az + std::abs(p_zeta(zeta, xi, d)), 2.0 * s) * a2;
  });
  NormReport r;
  r.name = "xzeta";
  r.value = std::sqrt(sum * F.grid.dcell());
  r.blocks.emplace_back("all", r.value);
  r.params["s"] = s;
  r.params["abs_zeta"] = az;
  return r;
}

}  // namespace lpscat
