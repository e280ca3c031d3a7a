#include <gtest/gtest.h>

#include <random>

#include "lpscat/grid.hpp"
#include "lpscat/io.hpp"
#include "lpscat/lp.hpp"

using namespace lpscat;

namespace {

ComplexField random_field(const Grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexField f(g, Side::physical);
  for (auto& v : f.data) v = cplx(n(rng), n(rng));
  return f;
}

double rel_diff(const ComplexField& a, const ComplexField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.data[i] - b.data[i]);
    den += std::norm(b.data[i]);
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST(Grid, LatticeSpacing) {
  auto g = make_grid(2, kPi, 8);
  EXPECT_DOUBLE_EQ(g.dxi(), 1.0);
  EXPECT_EQ(g.wave(4), -4);
  EXPECT_EQ(g.wave(3), 3);
  auto g3 = Grid{3, 1.0, 4};  // below the N >= 8 floor, only spacings are checked
  EXPECT_DOUBLE_EQ(g3.dx(), 0.5);
  EXPECT_DOUBLE_EQ(g3.dxi(), kPi);
}

TEST(Grid, RejectsBadParameters) {
  EXPECT_THROW(make_grid(3, kPi, 7), ParameterError);
  EXPECT_THROW(make_grid(3, kPi, 6), ParameterError);
  EXPECT_THROW(make_grid(1, kPi, 8), ParameterError);
  EXPECT_THROW(make_grid(3, 0.0, 8), ParameterError);
  try {
    make_grid(4, -1.0, 7);
    FAIL();
  } catch (const ParameterError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("d must"), std::string::npos);
    EXPECT_NE(w.find("L must"), std::string::npos);
    EXPECT_NE(w.find("even"), std::string::npos);
  }
}

TEST(Grid, RoundTrip) {
  for (int d : {2, 3}) {
    auto g = make_grid(d, 2.5, 16);
    auto f = random_field(g, 7 + d);
    auto back = to_physical(to_frequency(f));
    EXPECT_LT(rel_diff(back, f), 1e-12);
  }
}

TEST(Grid, BlochRoundTrip) {
  auto g = make_grid(3, 2.0, 16);
  auto f = random_field(g, 3);
  f.shift = {0.3, -0.1, 0.2};
  auto back = to_physical(to_frequency(f));
  EXPECT_LT(rel_diff(back, f), 1e-12);
}

TEST(Grid, GaussianTransformMatchesClosedForm) {
  // exp(-|x|^2/2) is its own transform under the symmetric convention.
  auto g = make_grid(3, 8.0, 48);
  auto f = sample(g, [](const Vec3& x) { return cplx(std::exp(-0.5 * norm2(x, 3))); });
  auto F = to_frequency(f);
  double err = 0.0;
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    err = std::max(err, std::abs(F.data[idx] - std::exp(-0.5 * norm2(xi, 3))));
  });
  EXPECT_LT(err, 1e-12);
  EXPECT_NEAR(l2_norm(f), l2_norm(F), 1e-12 * l2_norm(f));
}

TEST(Grid, PlaneWaveLandsOnOneMode) {
  auto g = make_grid(2, kPi, 8);
  auto f = sample(g, [](const Vec3& x) { return std::exp(cplx(0.0, 2.0 * x[0] - 1.0 * x[1])); });
  auto F = to_frequency(f);
  int hits = 0;
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    if (std::abs(F.data[idx]) > 1e-9) {
      ++hits;
      EXPECT_NEAR(xi[0], 2.0, 1e-12);
      EXPECT_NEAR(xi[1], -1.0, 1e-12);
    }
  });
  EXPECT_EQ(hits, 1);
}

TEST(Symbols, PointValues) {
  SymbolSpec s{SymbolKind::m_lambda, 4.0, 0.0, {}};
  EXPECT_DOUBLE_EQ(eval_symbol_at(s, {0, 0, 0}, 3).real(), 4.0);
  EXPECT_DOUBLE_EQ(eval_symbol_at(s, {2, 0, 0}, 3).real(), 0.0);
  EXPECT_EQ(q_tau(3.0, {0, 0, 0}, 3), cplx(9.0, 0.0));
}

TEST(Symbols, QTauModulusIdentity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 100; ++t) {
    Vec3 xi{u(rng), u(rng), u(rng)};
    const double tau = std::abs(u(rng)) + 0.1;
    const double r2 = norm2(xi, 3);
    const double lhs = std::norm(q_tau(tau, xi, 3));
    const double rhs = (tau * tau - r2) * (tau * tau - r2) + 4 * tau * tau * xi[2] * xi[2];
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + rhs));
  }
}

TEST(Symbols, EvalOnLatticeAndValidation) {
  auto g = make_grid(3, 2.0, 8);
  auto m = eval_symbol({SymbolKind::m_lambda, 4.0, 0.0, {}}, g);
  for_each_mode(g, [&](std::size_t idx, const Vec3& xi) {
    EXPECT_DOUBLE_EQ(m.data[idx].real(), std::abs(4.0 - norm2(xi, 3)));
    EXPECT_GE(m.data[idx].real(), 0.0);
    // Axis permutation leaves m_lambda unchanged.
    EXPECT_DOUBLE_EQ(m_lambda(4.0, {xi[2], xi[0], xi[1]}, 3), m.data[idx].real());
  });
  EXPECT_THROW(eval_symbol({SymbolKind::q_tau, 0.0, std::nan(""), {}}, g), ParameterError);
}

TEST(CriticalIndex, Brackets) {
  auto a = critical_index(16.0);
  EXPECT_EQ(a.k_lambda, 2);
  EXPECT_EQ(a.I, (std::array<int, 4>{0, 1, 2, 3}));
  auto b = critical_index(1.0);
  EXPECT_EQ(b.k_lambda, 0);
  EXPECT_EQ(b.I, (std::array<int, 4>{-2, -1, 0, 1}));
  auto c = critical_index(17.0);
  EXPECT_EQ(c.k_lambda, 3);
  EXPECT_EQ(c.I, (std::array<int, 4>{1, 2, 3, 4}));
  EXPECT_THROW(critical_index(0.0), ParameterError);
}

TEST(Annulus, MasksPartitionAndFlag) {
  auto g = make_grid(3, 4.0, 16);
  const int top = annulus_top(g);
  std::vector<double> sum(g.size(), 0.0);
  for (int j = 0; j <= top; ++j) {
    auto m = annulus_mask(g, j);
    for (std::size_t n = 0; n < g.size(); ++n) sum[n] += m.mask.data[n];
  }
  for_each_point(g, [&](std::size_t idx, const Vec3& x) {
    if (norm2(x, 3) <= std::pow(std::ldexp(1.0, top), 2)) {
      EXPECT_EQ(sum[idx], 1.0);
    }
  });
  // Boundary |x| = 1 belongs to D_0, |x| = 2 to D_1.
  EXPECT_EQ(annulus_of(1.0), 0);
  EXPECT_EQ(annulus_of(4.0), 1);
  EXPECT_EQ(annulus_of(4.01), 2);
  EXPECT_TRUE(annulus_mask(make_grid(3, 1.0, 8), 3).truncated);
  EXPECT_FALSE(annulus_mask(g, 1).truncated);
}

TEST(FieldIo, SidecarRoundTrip) {
  auto g = make_grid(2, 1.5, 8);
  auto f = to_frequency(random_field(g, 5));
  auto j = field_sidecar(f);
  EXPECT_EQ(j["dtype"], "c128-le");
  auto back = field_from(j, field_bytes(f));
  EXPECT_EQ(back.side, Side::frequency);
  EXPECT_EQ(back.data, f.data);
  // The first stored frequency sample is k = (-N/2, -N/2).
  const auto bytes = field_bytes(f);
  double re;
  std::memcpy(&re, bytes.data(), sizeof re);
  EXPECT_EQ(re, f.data[(g.N / 2) * g.N + g.N / 2].real());
}

TEST(FieldIo, WriteAndRead) {
  auto g = make_grid(3, 1.0, 8);
  auto f = random_field(g, 9);
  const std::string base = testing::TempDir() + "lpscat_field_io/f";
  write_field(base, f);
  auto back = read_field(base + ".json");
  EXPECT_EQ(back.data, f.data);
  EXPECT_THROW(read_field(base + "_missing"), IoError);
}

// ---------------------------------------------------------------- LP

TEST(LP, ProfileShape) {
  for (auto kind : {BasisKind::smooth, BasisKind::c2poly}) {
    LPBasis b{kind};
    EXPECT_EQ(b.phi(0.5), 1.0);
    EXPECT_EQ(b.phi(1.0), 1.0);
    EXPECT_EQ(b.phi(2.0), 0.0);
    double prev = 1.0;
    for (double t = 1.0; t <= 2.0; t += 0.01) {
      EXPECT_LE(b.phi(t), prev + 1e-15);
      prev = b.phi(t);
    }
    // Telescoping partition of unity.
    for (double r : {0.013, 0.7, 1.0, 3.3, 17.0}) {
      double s = 0.0;
      for (int k = -20; k <= 20; ++k) s += psi_k(b, r, k);
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
  }
  EXPECT_THROW(parse_basis("wavelet"), ParameterError);
}

TEST(LP, SupportAndSingleMode) {
  auto g = make_grid(3, kPi, 16);
  LPBasis b;
  auto f = sample(g, [](const Vec3& x) { return std::exp(cplx(0.0, 3.0 * x[0])); });
  // |xi0| = 3 sits in the transition of blocks 1 and 2.
  auto P2 = to_frequency(project(f, 2, b));
  auto F = to_frequency(f);
  for (std::size_t i = 0; i < F.size(); ++i) EXPECT_NEAR(std::abs(P2.data[i] - b.psi(3.0 / 4.0) * F.data[i]), 0.0, 1e-12);
  // Low-pass content below 2^{k-1} is annihilated.
  auto low = sample(g, [](const Vec3& x) { return std::exp(cplx(0.0, 1.0 * x[1])); });
  EXPECT_LT(l2_norm(project(low, 3, b)), 1e-12 * l2_norm(low));
  EXPECT_LT(rel_diff(project_leq(low, 0, b), low), 1e-12);
}

TEST(LP, ReconstructionIdentities) {
  auto g = make_grid(3, 3.0, 16);
  auto f = random_field(g, 21);
  for (auto kind : {BasisKind::smooth, BasisKind::c2poly}) {
    LPBasis b{kind};
    ComplexField s = project_leq(f, -21, b);
    for (int k = -20; k <= 20; ++k) {
      auto p = project(f, k, b);
      for (std::size_t i = 0; i < s.size(); ++i) s.data[i] += p.data[i];
    }
    EXPECT_LT(rel_diff(s, f), 1e-12);

    auto a = project_leq(f, 1, b), c = project_leq(f, 0, b), p = project(f, 1, b);
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += p.data[i];
    EXPECT_LT(rel_diff(c, a), 1e-12);

    const double lambda = 16.0;
    ComplexField r = project_below_I(f, lambda, b);
    EXPECT_LT(rel_diff(r, project_leq(f, -1, b)), 1e-15);
    for (int k = critical_index(lambda).k_lambda - 2; k <= top_block(g) + 1; ++k) {
      auto q = project(f, k, b);
      for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += q.data[i];
    }
    EXPECT_LT(rel_diff(r, f), 1e-12);

    // Almost orthogonality.
    double sum = 0.0;
    for (int k = -20; k <= 20; ++k) sum += std::pow(l2_norm(project(f, k, b)), 2);
    EXPECT_LE(sum, 2.0 * std::pow(l2_norm(f), 2));
  }
}

TEST(LP, CriticalBlockIsOutsideLowProjector) {
  auto g = make_grid(3, kPi, 16);
  LPBasis b;
  auto f = random_field(g, 4);
  const double lambda = 16.0;
  auto pk = project(f, critical_index(lambda).k_lambda, b);
  EXPECT_LT(l2_norm(project_below_I(pk, lambda, b)), 1e-14 * l2_norm(pk));
}
