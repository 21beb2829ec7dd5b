#include <gtest/gtest.h>

#include "kahler_oracle.hpp"
#include "logdrw/comparison_mw.hpp"
#include "logdrw/log_semistable.hpp"

using namespace logdrw;

namespace {

const BaseSpec kTilde(2, 2, Flavor::QuotientTrivialBase);
const BaseSpec kS0(2, 2, Flavor::QuotientLogPoint);

MWTerm term(std::vector<i64> a, Mask g, i64 c = 1) { return MWTerm{std::move(a), g, c}; }

// rank over F_p by elimination
int rank_mod_p(std::vector<std::vector<i64>> M, i64 p) {
  int rank = 0;
  const int rows = static_cast<int>(M.size());
  const int cols = rows ? static_cast<int>(M[0].size()) : 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int piv = -1;
    for (int r = rank; r < rows; ++r)
      if (M[r][c] % p) piv = r;
    if (piv < 0) continue;
    std::swap(M[piv], M[rank]);
    i64 inv = inv_mod(((M[rank][c] % p) + p) % p, p);
    for (int r = 0; r < rows; ++r) {
      if (r == rank || M[r][c] % p == 0) continue;
      i64 f = M[r][c] * inv % p;
      for (int j = 0; j < cols; ++j) M[r][j] = ((M[r][j] - f * M[rank][j]) % p + p) % p;
    }
    ++rank;
  }
  return rank;
}

// dim H^t of the Kahler complex over S0 summed over weights |w| <= D, by brute force
std::vector<int> kahler_betti(int n, int r, i64 p, i64 D) {
  kahler::Model km{n, r, true, p};
  std::vector<int> h(n + 1, 0);
  for_each_integral_weight(BaseSpec(n, r, Flavor::QuotientLogPoint), D, p, [&](const Weight& w) {
    const std::vector<i64>& k = w.numerators();
    std::vector<std::vector<kahler::Mono>> B;
    for (int q = 0; q <= n + 1; ++q) B.push_back(q <= n ? km.basis(k, q) : std::vector<kahler::Mono>{});
    std::vector<int> rk(n + 1, 0);
    for (int q = 0; q < n; ++q) {
      std::vector<std::vector<i64>> M(B[q + 1].size(), std::vector<i64>(B[q].size(), 0));
      for (std::size_t j = 0; j < B[q].size(); ++j)
        for (auto& [mono, c] : km.d(B[q][j])) {
          auto it = std::find_if(B[q + 1].begin(), B[q + 1].end(), [&](const kahler::Mono& b) { return !(b < mono) && !(mono < b); });
          M[it - B[q + 1].begin()][j] = c;
        }
      rk[q] = rank_mod_p(M, p);
    }
    for (int q = 0; q <= n; ++q) h[q] += static_cast<int>(B[q].size()) - rk[q] - (q ? rk[q - 1] : 0);
  });
  return h;
}

std::vector<int> mw_betti(int n, int r, i64 p, i64 D) {
  const PrimeLevel lv(p, 1);
  const ZpmRing R(lv);
  MWComplexLevel C = build_mw(BaseSpec(n, r, Flavor::QuotientLogPoint), lv, D);
  std::vector<int> h(n + 1, 0);
  for (auto& B : C.blocks)
    for (auto& H : cohomology(mw_block_complex(B, R))) h[H.degree] += static_cast<int>(H.invariant_factors.size());
  return h;
}

i64 binom(int a, int b) {
  if (b < 0 || b > a) return 0;
  i64 r = 1;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

}  // namespace

TEST(MW, PolynomialLineDifferential) {
  // one non-divisor variable: basis T^a, d(T^a) = a T^{a-1} dT
  const BaseSpec line(1, 0, Flavor::PolyTrivialBase);
  const PrimeLevel lv(5, 2);
  for (i64 a = 0; a <= 6; ++a) {
    MWBlock B = make_mw_block(line, lv, Weight::integral({a}, 5));
    EXPECT_EQ(B.dim(0), 1);
    EXPECT_EQ(B.dim(1), a > 0 ? 1 : 0);
    if (a > 0) EXPECT_EQ(B.d[0](0, 0), a);
  }
  auto d = mw_d(BaseSpec(2, 1, Flavor::QuotientTrivialBase), Weight::integral({0, 4}, 5), 0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.begin()->first, Mask{2});
  EXPECT_EQ(d.begin()->second, 4);
  EXPECT_EQ(mw_exponent(Weight::integral({0, 4}, 5), Mask{2}, 1), (std::vector<i64>{0, 3}));
}

TEST(MW, RejectsBadInput) {
  EXPECT_THROW(build_mw(kS0, PrimeLevel(2, 1), -1), std::invalid_argument);
  EXPECT_THROW(build_mw(BaseSpec(2, 2, Flavor::PolyTrivialBase), PrimeLevel(2, 1), 2), std::invalid_argument);
}

TEST(MW, DSquaredZeroAndThetaSes) {
  for (i64 p : {2, 3}) {
    PrimeLevel lv(p, 2);
    ZpmRing R(lv);
    for (auto [n, r] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {3, 3}}) {
      for (const BaseSpec& b : {BaseSpec(n, r, Flavor::QuotientTrivialBase), BaseSpec(n, r, Flavor::QuotientLogPoint)})
        for (auto& B : build_mw(b, lv, 3).blocks) EXPECT_NO_THROW(mw_block_complex(B, R).validate());
      for_each_integral_weight(BaseSpec(n, r, Flavor::QuotientTrivialBase), 3, p, [&](const Weight& w) {
        std::string why;
        EXPECT_TRUE(ses_is_exact(mw_theta_ses(n, r, lv, w), &why)) << w.render() << ": " << why;
      });
    }
  }
}

TEST(MW, LevelOneMatchesSlice) {
  for (i64 p : {2, 3}) {
    PrimeLevel lv(p, 1);
    ZpmRing R(lv);
    for_each_integral_weight(kS0, 4, p, [&](const Weight& w) {
      MWBlock M = make_mw_block(kS0, lv, w);
      WeightBlock W = make_weight_block(kS0, lv, w);
      auto hm = cohomology(mw_block_complex(M, R)), hw = cohomology(block_complex(W, R));
      ASSERT_EQ(hm.size(), hw.size());
      for (std::size_t q = 0; q < hm.size(); ++q) EXPECT_EQ(hm[q].sorted_factors(), hw[q].sorted_factors()) << w.render();
    });
  }
}

TEST(MW, BettiNumbersAgainstBruteForce) {
  for (i64 p : {2, 3})
    for (auto [n, mu] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {3, 3}}) {
      EXPECT_EQ(mw_betti(n, mu, p, 3), kahler_betti(n, mu, p, 3)) << n << mu;
      // weight zero contributes the exterior algebra on mu - 1 classes
      const PrimeLevel lv(p, 1);
      MWBlock B0 = make_mw_block(BaseSpec(n, mu, Flavor::QuotientLogPoint), lv, Weight::zero(n, p));
      auto H = cohomology(mw_block_complex(B0, ZpmRing(lv)));
      for (int t = 0; t <= n; ++t) EXPECT_EQ(static_cast<i64>(H[t].invariant_factors.size()), binom(mu - 1, t));
    }
}

TEST(MW, NodeAtTwoFrozen) {
  // node, S0, p = 2, m = 1, weights up to 4: the p-th power classes give 5 and 5
  EXPECT_EQ(kahler_betti(2, 2, 2, 4), (std::vector<int>{5, 5, 0}));
  EXPECT_EQ(mw_betti(2, 2, 2, 4), (std::vector<int>{5, 5, 0}));
}

TEST(Kappa, Examples) {
  PrimeLevel lv(3, 2);
  EXPECT_EQ(kappa({term({1, 0}, 0)}, lv, kTilde, 0), teich_monomial(lv, kTilde, {1, 0}));
  EXPECT_EQ(kappa({term({0, 0}, 1), term({0, 0}, 2)}, lv, kTilde, 1), theta(lv, kTilde));
  EXPECT_TRUE(kappa({term({1, 1}, 0)}, lv, kTilde, 0).is_zero());
  EXPECT_THROW(kappa({term({1, 0}, 1)}, lv, kTilde, 0), std::invalid_argument);
  BaseSpec b(3, 1, Flavor::QuotientTrivialBase);
  EXPECT_EQ(kappa({term({0, 2, 0}, 4)}, lv, b, 1), multiply(teich_monomial(lv, b, {0, 2, 0}), dT_element(lv, b, 3)));
}

TEST(Kappa, CommutesWithDOnNodeLevelTwo) {
  PrimeLevel lv(3, 2);
  for (const BaseSpec& base : {kTilde, kS0})
    for (auto& B : build_mw(base, lv, 4).blocks)
      for (int q = 0; q < 2; ++q)
        for (Mask G : B.gens[q]) {
          MWTerm x{mw_exponent(B.weight, G, base.r), G, 1};
          std::vector<MWTerm> dx;
          for (auto& [H, c] : mw_d(base, B.weight, G)) dx.push_back(MWTerm{mw_exponent(B.weight, H, base.r), H, c});
          EXPECT_EQ(kappa(dx, lv, base, q + 1), differential(kappa({x}, lv, base, q))) << B.weight.render();
        }
}

TEST(Kappa, Multiplicative) {
  PrimeLevel lv(2, 3);
  const BaseSpec base(3, 2, Flavor::QuotientTrivialBase);
  std::vector<std::pair<MWTerm, int>> xs;
  for (auto& B : build_mw(base, lv, 2).blocks)
    for (int q = 0; q <= 3; ++q)
      for (Mask G : B.gens[q]) xs.push_back({MWTerm{mw_exponent(B.weight, G, base.r), G, 1}, q});
  for (auto& [x, qx] : xs)
    for (auto& [y, qy] : xs) {
      if (x.gens & y.gens) continue;
      std::vector<i64> a(3);
      for (int i = 0; i < 3; ++i) a[i] = x.a[i] + y.a[i];
      MWTerm xy{a, x.gens | y.gens, wedge_sign(x.gens, y.gens)};
      EXPECT_EQ(kappa({xy}, lv, base, qx + qy), multiply(kappa({x}, lv, base, qx), kappa({y}, lv, base, qy)));
    }
}

TEST(Kappa, ProjectionFactorsThroughQuotient) {
  // project_to_S0 o kappa~ = kappa_S0 o (MW quotient map)
  PrimeLevel lv(3, 2);
  for (auto& B : build_mw(kTilde, lv, 3).blocks)
    for (int q = 0; q <= 2; ++q)
      for (Mask G : B.gens[q]) {
        MWTerm x{mw_exponent(B.weight, G, 2), G, 1};
        std::vector<MWTerm> red;
        for (auto& [H, c] : mw_reduce_theta(kS0, B.weight, {{G, 1}})) red.push_back(MWTerm{mw_exponent(B.weight, H, 2), H, c});
        EXPECT_EQ(project_to_S0(kappa({x}, lv, kTilde, q)), kappa(red, lv, kS0, q));
      }
}

TEST(IntegralIso, Certificates) {
  for (int m = 1; m <= 2; ++m) {
    auto c1 = integral_iso_check(kTilde, PrimeLevel(3, m), 4, 4);
    EXPECT_TRUE(c1.ok) << c1.detail;
    auto c2 = integral_iso_check(kS0, PrimeLevel(3, m), 4, 4);
    EXPECT_TRUE(c2.ok) << c2.detail;
    EXPECT_GT(c2.blocks_checked, 0);
  }
  auto c3 = integral_iso_check(BaseSpec(2, 1, Flavor::QuotientLogPoint), PrimeLevel(3, 2), 4, 4);
  EXPECT_TRUE(c3.ok) << c3.detail;
  auto c4 = integral_iso_check(BaseSpec(3, 3, Flavor::QuotientLogPoint), PrimeLevel(2, 3), 3, 3);
  EXPECT_TRUE(c4.ok) << c4.detail;
  EXPECT_THROW(integral_iso_check(kS0, PrimeLevel(3, 2), 3, 4), std::invalid_argument);
}

TEST(IntegralIso, InverseIsInverse) {
  PrimeLevel lv(2, 2);
  ZpmRing R(lv);
  auto cert = integral_iso_check(kS0, lv, 3, 3);
  ASSERT_TRUE(cert.ok);
  std::size_t b = 0;
  for_each_integral_weight(kS0, 3, 2, [&](const Weight& w) {
    MWBlock M = make_mw_block(kS0, lv, w);
    WeightBlock W = make_weight_block(kS0, lv, w);
    for (int q = 0; q <= 2; ++q) {
      ModMatrix P = mat_mul(cert.inverses[b][q], kappa_block_matrix(M, W, q), R);
      for (int i = 0; i < P.rows; ++i)
        for (int j = 0; j < P.cols; ++j) EXPECT_EQ(P(i, j), i == j ? 1 : 0);
    }
    ++b;
  });
  EXPECT_EQ(b, cert.inverses.size());
}

TEST(ModPm, InvariantFactorsMatchSlice) {
  for (int m = 1; m <= 3; ++m) {
    PrimeLevel lv(2, m);
    ZpmRing R(lv);
    std::vector<std::vector<int>> mw(3), dr(3);
    for_each_integral_weight(kS0, 3, 2, [&](const Weight& w) {
      for (auto& H : cohomology(mw_block_complex(make_mw_block(kS0, lv, w), R)))
        mw[H.degree].insert(mw[H.degree].end(), H.invariant_factors.begin(), H.invariant_factors.end());
    });
    for_each_block(kS0, lv, 3, [&](const WeightBlock& W) {
      for (auto& H : cohomology(block_complex(W, R)))
        dr[H.degree].insert(dr[H.degree].end(), H.invariant_factors.begin(), H.invariant_factors.end());
    });
    for (int q = 0; q <= 2; ++q) {
      std::sort(mw[q].begin(), mw[q].end());
      std::sort(dr[q].begin(), dr[q].end());
      EXPECT_EQ(mw[q], dr[q]) << "m=" << m << " q=" << q;
    }
  }
}

TEST(Gauge, Grid) {
  auto g = gauge_grid(3, 2);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g.front(), mpq_class(1));
  EXPECT_EQ(g.back(), mpq_class(1, 12));
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end(), std::greater<>()));
  EXPECT_EQ(gauge_grid(2, 1).size(), 3u);  // 1, 1/2, 1/4
}

TEST(Gauge, TeichmullerPowers) {
  // valuation-0 terms with |k| = a: the best grid point leaves C = eps * D
  const PrimeLevel lv(3, 3);
  const BaseSpec base(2, 2, Flavor::PolyTrivialBase);
  std::vector<DRWElement> fam;
  for (i64 a = 0; a <= 4; ++a) fam.push_back(kappa({term({a, 0}, 0)}, lv, base, 0));
  GaugeReport g = gauge_fit(fam);
  EXPECT_EQ(g.epsilon, mpq_class(1, 192));
  EXPECT_EQ(g.C, mpq_class(1, 48));
  EXPECT_FALSE(g.within_cap);
  EXPECT_TRUE(gauge_certifies(fam, g.epsilon, g.C, GaugeNorm::Sum));
  GaugeOptions loose;
  loose.c_cap = 4;
  GaugeReport g2 = gauge_fit(fam, loose);
  EXPECT_EQ(g2.epsilon, mpq_class(1));
  EXPECT_EQ(g2.C, mpq_class(4));
  EXPECT_TRUE(g2.within_cap);
}

TEST(Gauge, VerschiebungPowersOfOne) {
  const BaseSpec base(2, 2, Flavor::PolyTrivialBase);
  std::vector<DRWElement> fam;
  DRWElement x = unit_element(PrimeLevel(5, 1), base);
  for (int s = 0; s < 3; ++s) {
    fam.push_back(x);
    x = verschiebung(x);
  }
  GaugeReport g = gauge_fit(fam);
  EXPECT_EQ(g.epsilon, mpq_class(1));
  EXPECT_EQ(g.C, mpq_class(0));
  EXPECT_TRUE(g.within_cap);
}

TEST(Gauge, FrobeniusIteratesGolden) {
  // x = [T1 T2] + V([T1]) at m = 3, p = 3; F^2 x = [T1^9 T2^9] dominates with |k| = 18
  const BaseSpec base(2, 2, Flavor::PolyTrivialBase);
  DRWElement x = add(teich_monomial(PrimeLevel(3, 3), base, {1, 1}), verschiebung(teich_monomial(PrimeLevel(3, 2), base, {1, 0})));
  std::vector<DRWElement> fam;
  for (int t = 0; t < 3; ++t) {
    fam.push_back(x);
    if (x.level().m() >= 2) x = frobenius(x);
  }
  GaugeReport g = gauge_fit(fam);
  EXPECT_EQ(g.epsilon, mpq_class(1, 192));
  EXPECT_EQ(g.C, mpq_class(3, 32));
  EXPECT_EQ(g.terms, 5);
  EXPECT_TRUE(gauge_certifies(fam, g.epsilon, g.C, GaugeNorm::Sum));
  GaugeOptions mx;
  mx.norm = GaugeNorm::Max;
  GaugeReport gm = gauge_fit(fam, mx);
  EXPECT_EQ(gm.C, mpq_class(3, 64));
}

TEST(Gauge, MonotoneAndUnitInvariant) {
  const BaseSpec base(2, 2, Flavor::PolyTrivialBase);
  const PrimeLevel lv(3, 2);
  std::vector<DRWElement> fam{verschiebung(teich_monomial(PrimeLevel(3, 1), base, {1, 0})), constant(lv, base, 3)};
  GaugeOptions opt;
  opt.c_cap = mpq_class(1, 2);
  GaugeReport g0 = gauge_fit(fam, opt);
  auto bigger = fam;
  bigger.push_back(teich_monomial(lv, base, {2, 2}));
  GaugeReport g1 = gauge_fit(bigger, opt);
  EXPECT_LE(g1.epsilon, g0.epsilon);
  if (g1.epsilon == g0.epsilon) EXPECT_GE(g1.C, g0.C);
  std::vector<DRWElement> scaled;
  for (auto& x : bigger) scaled.push_back(scale(x, 2));
  GaugeReport g2 = gauge_fit(scaled, opt);
  EXPECT_EQ(g2.epsilon, g1.epsilon);
  EXPECT_EQ(g2.C, g1.C);
}

TEST(Gauge, EmptyFamilyThrows) {
  EXPECT_THROW(gauge_fit({}), std::invalid_argument);
  const BaseSpec base(1, 1, Flavor::PolyTrivialBase);
  EXPECT_THROW(gauge_fit({DRWElement(PrimeLevel(2, 1), base, 0)}), std::invalid_argument);
  EXPECT_FALSE(gauge_certifies({}, 0, 0, GaugeNorm::Sum));
}
