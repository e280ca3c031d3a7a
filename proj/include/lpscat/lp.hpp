#pragma once
// Littlewood-Paley projectors built from a radial bump pair (phi, psi).

#include <cmath>
#include <string>

#include "lpscat/grid.hpp"

namespace lpscat {

enum class BasisKind { smooth, c2poly };

inline const char* basis_name(BasisKind b) { return b == BasisKind::smooth ? "smooth" : "c2poly"; }

inline BasisKind parse_basis(const std::string& s) {
  if (s == "smooth") return BasisKind::smooth;
  if (s == "c2poly") return BasisKind::c2poly;
  throw ParameterError("unknown LP basis '" + s + "' (expected smooth or c2poly)");
}

struct LPBasis {
  BasisKind kind = BasisKind::smooth;

  // 1 on [0,1], 0 on [2,inf), nonincreasing in between.
  double phi(double t) const {
    if (t <= 1.0) return 1.0;
    if (t >= 2.0) return 0.0;
    const double s = t - 1.0;
    if (kind == BasisKind::c2poly) return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    return a / (a + b);
  }
  double psi(double t) const { return phi(t) - phi(2.0 * t); }
  int smoothness() const { return kind == BasisKind::smooth ? -1 : 2; }  // -1: C-infinity
};

// Multipliers at |xi| for block k.
inline double psi_k(const LPBasis& b, double r, int k) { return b.psi(std::ldexp(r, -k)); }
inline double phi_k(const LPBasis& b, double r, int k) { return b.phi(std::ldexp(r, -k)); }

inline ComplexField project_freq(const ComplexField& f, int k, const LPBasis& b) {
  return apply_multiplier(f, [&](const Vec3& xi, int d) { return psi_k(b, std::sqrt(norm2(xi, d)), k); });
}

inline ComplexField project_leq_freq(const ComplexField& f, int k, const LPBasis& b) {
  return apply_multiplier(f, [&](const Vec3& xi, int d) { return phi_k(b, std::sqrt(norm2(xi, d)), k); });
}

// P_k f, returned on the side f came in on.
inline ComplexField project(const ComplexField& f, int k, const LPBasis& b = {}) {
  return on_side(project_freq(f, k, b), f.side);
}

// P_{<=k} f.
inline ComplexField project_leq(const ComplexField& f, int k, const LPBasis& b = {}) {
  return on_side(project_leq_freq(f, k, b), f.side);
}

// P_{<I} f = P_{<= k_lambda - 3} f.
inline ComplexField project_below_I(const ComplexField& f, double lambda, const LPBasis& b = {}) {
  const auto ci = critical_index(lambda);
  return project_leq(f, ci.k_lambda - 3, b);
}

// Largest block index whose multiplier support meets the lattice.
inline int top_block(const Grid& g) {
  const double r = g.xi_max();
  int k = 0;
  while (std::ldexp(1.0, k - 1) <= r) ++k;
  return k - 1;
}

}  // namespace lpscat
