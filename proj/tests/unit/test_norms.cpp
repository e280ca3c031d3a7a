#include <gtest/gtest.h>

#include <random>

#include "lpscat/norms.hpp"

using namespace lpscat;

namespace {

ComplexField random_field(const Grid& g, unsigned seed, double band = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexField F(g, Side::frequency);
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    const cplx v(n(rng), n(rng));
    if (band == 0.0 || norm2(xi, g.d) <= band * band) F.data[idx] = v;
  });
  return to_physical(F);
}

ComplexField mode(const Grid& g, const Vec3& k) {
  return sample(g, [&](const Vec3& x) {
    double ph = 0.0;
    for (int a = 0; a < g.d; ++a) ph += k[a] * x[a];
    return std::polar(1.0, ph);
  });
}

cplx pair(const ComplexField& a, const ComplexField& b) {
  const auto A = to_frequency(a), B = to_frequency(b);
  cplx s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A.data[i] * std::conj(B.data[i]);
  return s * A.grid.dcell();
}

ComplexField scaled(ComplexField f, cplx c) {
  for (auto& v : f.data) v *= c;
  return f;
}

}  // namespace

TEST(Exponents, Values) {
  EXPECT_DOUBLE_EQ(q_exponent(3), 4.0);
  EXPECT_DOUBLE_EQ(p_exponent(3), 6.0);
  EXPECT_DOUBLE_EQ(q_exponent(2), 6.0);
  EXPECT_TRUE(std::isinf(p_exponent(2)));
  EXPECT_DOUBLE_EQ(dual_exponent(4.0), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(dual_exponent(p_exponent(2)), 1.0);
}

TEST(AH, ZeroAndBall) {
  auto g = make_grid(3, 2.0, 64);
  EXPECT_EQ(ah_norm(ComplexField(g, Side::physical)).value, 0.0);
  EXPECT_EQ(ah_dual_norm(ComplexField(g, Side::physical)).value, 0.0);
  auto ball = sample(g, [](const Vec3& x) { return cplx(norm2(x, 3) <= 1.0 ? 1.0 : 0.0); });
  const double ref = std::sqrt(4.0 * kPi / 3.0);
  EXPECT_NEAR(ah_norm(ball).value, ref, 0.03 * ref);
  EXPECT_NEAR(ah_dual_norm(ball).value, ref, 0.03 * ref);
  EXPECT_NEAR(ah_norm(ball).value, 2.0466, 0.03 * 2.0466);
}

TEST(AH, SingleAnnulusAndHomogeneity) {
  auto g = make_grid(3, 3.0, 32);
  auto f = sample(g, [](const Vec3& x) {
    const double r = std::sqrt(norm2(x, 3));
    return cplx(r > 1.0 && r <= 2.0 ? std::cos(x[0]) : 0.0, 0.0);
  });
  EXPECT_NEAR(ah_norm(f).value, std::sqrt(2.0) * l2_norm(f), 1e-12 * l2_norm(f));
  EXPECT_NEAR(ah_dual_norm(f).value, l2_norm(f) / std::sqrt(2.0), 1e-12 * l2_norm(f));
  auto r = random_field(g, 3);
  const cplx c(-2.0, 1.5);
  EXPECT_NEAR(ah_dual_norm(scaled(r, c)).value, std::abs(c) * ah_dual_norm(r).value, 1e-12 * ah_dual_norm(r).value * 3);
  EXPECT_FALSE(ah_norm(r).truncation_flags.empty());  // 2^j up to L sqrt(3) exceeds L
}

TEST(YNorm, LowBlockOnly) {
  auto g = make_grid(3, kPi, 16);
  const double lambda = 64.0;  // k_lambda = 3, low block covers |xi| <= 1
  auto f = mode(g, {1.0, 0.0, 0.0});
  auto r = y_norm(f, lambda);
  EXPECT_NEAR(r.block("low"), l2_norm(f) / std::sqrt(lambda - 1.0), 1e-13);
  for (const auto& [k, v] : r.blocks)
    if (k != "low") {
      EXPECT_LT(v, 1e-13) << k;
    }
  EXPECT_NEAR(r.value, r.block("low"), 1e-13);
}

TEST(YStar, CriticalBlockIsolated) {
  auto g = make_grid(3, kPi, 16);
  const double lambda = 16.0;  // |xi| = 4 = 2^{k_lambda}, where only psi_{k_lambda} is nonzero
  auto u = mode(g, {0.0, 4.0, 0.0});
  auto r = y_star_norm(u, lambda);
  const double a = ah_dual_norm(u).value;
  EXPECT_NEAR(r.value * r.value, std::sqrt(lambda) * a * a, 1e-12 * r.value * r.value);
  EXPECT_LT(r.block("low"), 1e-12 * r.value);
  EXPECT_LT(r.block("high"), 1e-12 * r.value);
}

TEST(YNorm, SampledDuality) {
  auto g = make_grid(3, 4.0, 16);
  const double lambda = 9.0;
  for (unsigned s = 0; s < 3; ++s) {
    auto f = random_field(g, 100 + s, 6.0);
    const double yf = y_norm(f, lambda).value;
    double sup = 0.0;
    for (unsigned t = 0; t < 50; ++t) {
      auto u = random_field(g, 1000 + 50 * s + t, 6.0);
      sup = std::max(sup, std::abs(pair(f, u)) / y_star_norm(u, lambda).value);
    }
    EXPECT_LE(sup, yf * (1 + 1e-6));
  }
}

TEST(ZNorm, RangeAndZero) {
  auto g = make_grid(3, 2.0, 16);
  EXPECT_EQ(z_norm(ComplexField(g, Side::physical), 4.0, 4.0 / 3.0).value, 0.0);
  EXPECT_THROW(z_star_norm(random_field(g, 1), 4.0, 2.0), ParameterError);
  EXPECT_THROW(z_star_norm(random_field(g, 1), 4.0, 7.0), ParameterError);
  EXPECT_NO_THROW(z_star_norm(random_field(g, 1), 4.0, 6.0));
  EXPECT_NO_THROW(z_norm(random_field(g, 1), 4.0, 1.2));
  auto g2 = make_grid(2, 2.0, 16);
  EXPECT_NO_THROW(z_star_norm(random_field(g2, 1), 4.0, p_exponent(2)));
}

TEST(ZNorm, AgreesWithYOffCritical) {
  auto g = make_grid(3, kPi, 16);
  const double lambda = 64.0;
  auto f = mode(g, {1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(y_norm(f, lambda).value, z_norm(f, lambda, 1.25).value);
  auto h = mode(g, {0.0, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(y_star_norm(h, lambda).value, z_star_norm(h, lambda, 5.0).value);
}

TEST(ZNorm, EmbeddingChainRecorded) {
  auto g = make_grid(3, 4.0, 16);
  const double lambda = 16.0;
  for (unsigned s = 0; s < 5; ++s) {
    auto f = random_field(g, 40 + s, 6.0);
    const double a = z_norm(f, lambda, dual_exponent(4.0)).value;
    const double b = z_norm(f, lambda, dual_exponent(5.0)).value;
    const double c = z_norm(f, lambda, dual_exponent(6.0)).value;
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a / b, 10.0);
    EXPECT_LT(b / c, 10.0);
    RecordProperty("ratio_qd_p_" + std::to_string(s), std::to_string(a / b));
  }
}

TEST(XStar, ZeroHighAndSandwich) {
  auto g = make_grid(3, kPi, 16);
  EXPECT_EQ(x_star_norm(ComplexField(g, Side::physical), 4.0).value, 0.0);
  const double lambda = 1.0;  // k_lambda = 0, high blocks start at k = 2
  auto u = mode(g, {0.0, 4.0, 0.0});  // |xi| = 2^2 lies in block 2 alone
  EXPECT_NEAR(x_star_norm(u, lambda).value, std::sqrt(16.0 - 1.0) * l2_norm(u), 1e-12 * l2_norm(u) * 4);
  const double lam = 9.0;
  for (unsigned s = 0; s < 100; ++s) {
    auto v = random_field(make_grid(3, 3.0, 8), 500 + s);
    const double x = x_star_norm(v, lam).value;
    const double y = y_star_norm(v, lam).value;
    const double z = z_star_norm(v, lam, q_exponent(3)).value;
    EXPECT_LE(std::max(y, z), x * (1 + 1e-12));
    EXPECT_LE(x, (y + z) * (1 + 1e-12));
  }
}

TEST(XUpper, NoCriticalContentIsExact) {
  auto g = make_grid(3, kPi, 16);
  const double lambda = 64.0;
  auto h = mode(g, {1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(x_norm_upper(h, lambda).value, y_norm(h, lambda).value);
}

TEST(XUpper, SingleCriticalBlock) {
  auto g = make_grid(3, kPi, 16);
  const double lambda = 16.0;
  auto h = mode(g, {4.0, 0.0, 0.0});
  const double qdp = dual_exponent(4.0);
  const double ycost = std::pow(lambda, -0.25) * ah_norm(h).value;
  const double zcost = std::pow(lambda, 1.5 * (1.0 / qdp - 5.0 / 6.0)) * lp_norm(h, qdp);
  auto r = x_norm_upper(h, lambda);
  EXPECT_NEAR(r.value, std::min(ycost, zcost), 1e-12 * r.value);
  auto refined = x_norm_upper(h, lambda, {}, true);
  EXPECT_LE(refined.value, r.value * (1 + 1e-12));
}

TEST(XUpper, SampledDuality) {
  auto g = make_grid(3, 4.0, 16);
  const double lambda = 9.0;
  for (unsigned s = 0; s < 3; ++s) {
    auto h = random_field(g, 700 + s, 6.0);
    const double xh = x_norm_upper(h, lambda).value;
    double sup = 0.0;
    for (unsigned t = 0; t < 50; ++t) {
      auto u = random_field(g, 7000 + 50 * s + t, 6.0);
      sup = std::max(sup, std::abs(pair(h, u)) / x_star_norm(u, lambda).value);
    }
    EXPECT_LE(sup, xh * (1 + 1e-6));
  }
}

TEST(Bourgain, BasicValues) {
  auto g = make_grid(3, kPi, 16);
  auto f = random_field(g, 8);
  EXPECT_NEAR(bourgain_norm(f, 3.0, 0.0).value, l2_norm(f), 1e-12 * l2_norm(f));
  auto m = mode(g, {1.0, 2.0, 2.0});
  const double q = std::abs(q_tau(3.0, {1.0, 2.0, 2.0}, 3));
  EXPECT_NEAR(bourgain_norm(m, 3.0, 0.7).value, std::pow(q, 0.7) * l2_norm(m), 1e-12 * l2_norm(m) * q);
}

TEST(Bourgain, SymbolSingularity) {
  auto g = make_grid(3, kPi, 16);
  auto m = mode(g, {1.0, 0.0, 0.0});  // |xi| = tau, xi_d = 0
  EXPECT_THROW(bourgain_norm(m, 1.0, -0.5), RegimeError);
  try {
    bourgain_norm(m, 1.0, -0.5);
  } catch (const RegimeError& e) {
    EXPECT_NE(std::string(e.what()).find("symbol singularity"), std::string::npos);
  }
  EXPECT_NO_THROW(bourgain_norm(m, 1.0, 0.5));
}

TEST(Ytm, Values) {
  auto g = make_grid(3, kPi, 16);
  auto f = random_field(g, 12);
  EXPECT_NEAR(ytm_norm(f, 2.0, 3.0, 0.0).value, l2_norm(f), 1e-12 * l2_norm(f));
  const Vec3 k{0.0, 1.0, 1.0};
  auto m = mode(g, k);
  const double tau = 5.0;
  const double w = tau * tau + std::norm(q_tau(tau, k, 3));
  EXPECT_NEAR(ytm_norm(m, tau, 1.0, 0.5).value, std::pow(w, 0.25) * l2_norm(m), 1e-12 * l2_norm(m) * 10);
  // M tau^2 dominates: growth like M^{1/4}.
  const double v1 = ytm_norm(m, tau, 100.0, 0.5).value, v2 = ytm_norm(m, tau, 1600.0, 0.5).value;
  EXPECT_NEAR(v2 / v1, 2.0, 0.01);
  EXPECT_THROW(ytm_norm(m, 0.5, 1.0, 0.5), ParameterError);
}

TEST(Xzeta, Values) {
  auto g = make_grid(3, kPi, 16);
  auto f = random_field(g, 13);
  const CVec3 zeta{cplx(2.0, 0.0), cplx(0.0, 2.0), cplx(0.0, 0.0)};
  EXPECT_NEAR(xzeta_norm(f, zeta, 0.0).value, l2_norm(f), 1e-12 * l2_norm(f));
  EXPECT_LE(xzeta_norm(f, zeta, -0.5).value, std::pow(cnorm(zeta, 3), -0.5) * l2_norm(f) * (1 + 1e-12));
  // p_zeta(xi) = 0 at xi = 0.
  auto c = mode(g, {0.0, 0.0, 0.0});
  EXPECT_NEAR(xzeta_norm(c, zeta, 0.5).value, std::pow(cnorm(zeta, 3), 0.5) * l2_norm(c), 1e-12 * l2_norm(c) * 3);
}

TEST(Norms, HomogeneityAndTriangle) {
  auto g = make_grid(3, 3.0, 16);
  const double lambda = 9.0;
  auto f = random_field(g, 31, 6.0), h = random_field(g, 32, 6.0);
  const cplx c(0.5, -3.0);
  auto sum = f;
  for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] += h.data[i];
  using NF = std::function<double(const ComplexField&)>;
  std::vector<NF> norms = {
      [](const ComplexField& u) { return ah_norm(u).value; },
      [](const ComplexField& u) { return ah_dual_norm(u).value; },
      [&](const ComplexField& u) { return y_norm(u, lambda).value; },
      [&](const ComplexField& u) { return y_star_norm(u, lambda).value; },
      [&](const ComplexField& u) { return z_norm(u, lambda, 1.25).value; },
      [&](const ComplexField& u) { return z_star_norm(u, lambda, 5.0).value; },
      [&](const ComplexField& u) { return x_star_norm(u, lambda).value; },
      [](const ComplexField& u) { return bourgain_norm(u, 2.3, 0.5).value; },
      [](const ComplexField& u) { return ytm_norm(u, 2.0, 2.0, -0.5).value; },
  };
  for (std::size_t n = 0; n < norms.size(); ++n) {
    const double a = norms[n](f), b = norms[n](h);
    EXPECT_NEAR(norms[n](scaled(f, c)), std::abs(c) * a, 1e-10 * std::abs(c) * a) << n;
    EXPECT_LE(norms[n](sum), (a + b) * (1 + 1e-10)) << n;
  }
}

TEST(NormReport, Json) {
  auto g = make_grid(3, 3.0, 16);
  auto r = y_norm(random_field(g, 2), 9.0);
  auto j = r.to_json();
  EXPECT_EQ(j["name"], "y");
  EXPECT_EQ(j["blocks"].size(), 6u);
  double s = 0.0;
  for (const auto& [k, v] : r.blocks) s += v * v;
  EXPECT_NEAR(std::sqrt(s), r.value, 1e-12 * r.value);
}
