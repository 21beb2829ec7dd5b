#include <gtest/gtest.h>

#include <random>
#include <set>

#include "logdrw/drw_core.hpp"
#include "logdrw/exact_homology.hpp"
#include "logdrw/log_semistable.hpp"

using namespace logdrw;

namespace {

ModMatrix random_matrix(int r, int c, const ZpmRing& R, std::mt19937_64& rng, int pval_bias = 0) {
  ModMatrix M(r, c);
  for (auto& x : M.a) {
    x = static_cast<i64>(rng() % static_cast<std::uint64_t>(R.modulus()));
    if (pval_bias && rng() % 2) x = R.mul(x, R.pow_p(static_cast<int>(rng() % static_cast<std::uint64_t>(pval_bias + 1))));
  }
  return M;
}

// vectors of (+) Z/p^{a_i}, enumerated
std::vector<std::vector<i64>> all_vectors(const PresentedModule& M, i64 p) {
  std::vector<std::vector<i64>> out{{}};
  for (int e : M.exps) {
    std::vector<std::vector<i64>> nxt;
    for (auto& v : out)
      for (i64 x = 0; x < ipow(p, e); ++x) {
        auto w = v;
        w.push_back(x);
        nxt.push_back(w);
      }
    out = nxt;
  }
  return out;
}

std::vector<i64> apply(const ModMatrix& A, const std::vector<i64>& x, const PresentedModule& dst, const ZpmRing& R) {
  auto y = mat_vec(A, x, R);
  reduce_into(y, dst, R);
  return y;
}

// invariant factors of H^q by counting: |H[p^j]| = p^{sum min(e_i, j)}
std::vector<int> brute_cohomology(const PresentedComplex& C, int q) {
  const ZpmRing& R = C.ring;
  PresentedModule M = complex_module(C, q), Mn = complex_module(C, q + 1), Mp = complex_module(C, q - 1);
  std::set<std::vector<i64>> im;
  for (auto& x : all_vectors(Mp, R.p())) im.insert(apply(complex_d(C, q - 1), x, M, R));
  std::vector<std::vector<i64>> ker;
  for (auto& x : all_vectors(M, R.p())) {
    auto y = apply(complex_d(C, q), x, Mn, R);
    if (std::all_of(y.begin(), y.end(), [](i64 v) { return v == 0; })) ker.push_back(x);
  }
  const double im_size = static_cast<double>(im.size());
  std::vector<int> logsize(R.m() + 1, 0);
  for (int j = 0; j <= R.m(); ++j) {
    std::size_t cnt = 0;
    for (auto& x : ker) {
      std::vector<i64> y = x;
      for (auto& v : y) v = R.mul(v, R.pow_p(j));
      reduce_into(y, M, R);
      if (im.count(y)) ++cnt;
    }
    double h = static_cast<double>(cnt) / im_size;
    int l = 0;
    while (h > 1.5) {
      h /= static_cast<double>(R.p());
      ++l;
    }
    logsize[j] = l;
  }
  // number of summands with e >= j is logsize[j] - logsize[j-1]
  std::vector<int> factors;
  for (int j = 1; j <= R.m(); ++j) {
    int ge_j = logsize[j] - logsize[j - 1];
    int ge_j1 = j < R.m() ? logsize[j + 1] - logsize[j] : 0;
    for (int t = 0; t < ge_j - ge_j1; ++t) factors.push_back(j);
  }
  std::sort(factors.begin(), factors.end(), std::greater<>());
  return factors;
}

PresentedComplex two_term(const ZpmRing& R, int a, int b, const ModMatrix& d) {
  PresentedComplex C;
  C.ring = R;
  C.modules = {PresentedModule{std::vector<int>(d.cols, a)}, PresentedModule{std::vector<int>(d.rows, b)}};
  C.d = {d};
  return C;
}

}  // namespace

TEST(Snf, Identity) {
  ZpmRing R(3, 2);
  SmithForm S = smith_normal_form(ModMatrix::identity(4), R);
  EXPECT_EQ(S.exps, (std::vector<int>{0, 0, 0, 0}));
}

TEST(Snf, SingleP) {
  ZpmRing R(5, 2);
  ModMatrix M(1, 1);
  M(0, 0) = 5;
  EXPECT_EQ(smith_normal_form(M, R).exps, (std::vector<int>{1}));
}

TEST(Snf, CertificateRemultiplies) {
  ZpmRing R(3, 3);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    int r = 1 + static_cast<int>(rng() % 7), c = 1 + static_cast<int>(rng() % 8);
    if (trial == 0) r = 6, c = 7;
    ModMatrix M = random_matrix(r, c, R, rng, 2);
    SmithForm S = smith_normal_form(M, R);
    ModMatrix D = mat_mul(mat_mul(S.U, M, R), S.W, R);
    EXPECT_EQ(D, smith_diagonal(S, r, c, R));
    EXPECT_EQ(mat_mul(S.U, S.Uinv, R), ModMatrix::identity(r));
    EXPECT_EQ(mat_mul(S.W, S.Winv, R), ModMatrix::identity(c));
    for (std::size_t i = 1; i < S.exps.size(); ++i) EXPECT_LE(S.exps[i - 1], S.exps[i]);
  }
}

TEST(Cohomology, ZeroComplex) {
  ZpmRing R(2, 2);
  PresentedComplex C;
  C.ring = R;
  C.modules = {PresentedModule{}, PresentedModule{}};
  C.d = {ModMatrix(0, 0)};
  for (auto& h : cohomology(C)) EXPECT_TRUE(h.invariant_factors.empty());
}

TEST(Cohomology, MultiplicationByP) {
  ZpmRing R(3, 2);
  ModMatrix d(1, 1);
  d(0, 0) = 3;
  auto H = cohomology(two_term(R, 2, 2, d));
  EXPECT_EQ(H[0].invariant_factors, (std::vector<int>{1}));
  EXPECT_EQ(H[1].invariant_factors, (std::vector<int>{1}));
}

TEST(Cohomology, RejectsNonComplex) {
  ZpmRing R(2, 1);
  PresentedComplex C;
  C.ring = R;
  C.modules = {PresentedModule{{1}}, PresentedModule{{1}}, PresentedModule{{1}}};
  ModMatrix one(1, 1);
  one(0, 0) = 1;
  C.d = {one, one};
  EXPECT_THROW(cohomology(C), std::invalid_argument);
}

TEST(Cohomology, MatchesBruteForceOnRandomComplexes) {
  std::mt19937_64 rng(5);
  for (i64 p : {2, 3})
    for (int m = 1; m <= 2; ++m) {
      ZpmRing R(p, m);
      for (int trial = 0; trial < 30; ++trial) {
        int n0 = 1 + static_cast<int>(rng() % 2), n1 = 1 + static_cast<int>(rng() % 3), n2 = 1 + static_cast<int>(rng() % 2);
        ModMatrix d0 = random_matrix(n1, n0, R, rng, m);
        // rows of d1 chosen in the left kernel of d0 by brute force
        PresentedModule M1{std::vector<int>(n1, m)};
        std::vector<std::vector<i64>> rows;
        for (auto& v : all_vectors(M1, p)) {
          ModMatrix row(1, n1);
          for (int i = 0; i < n1; ++i) row(0, i) = v[i];
          if (mat_mul(row, d0, R).is_zero()) rows.push_back(v);
        }
        ModMatrix d1(n2, n1);
        for (int i = 0; i < n2; ++i) {
          auto& v = rows[rng() % rows.size()];
          for (int j = 0; j < n1; ++j) d1(i, j) = v[j];
        }
        PresentedComplex C;
        C.ring = R;
        C.modules = {PresentedModule{std::vector<int>(n0, m)}, M1, PresentedModule{std::vector<int>(n2, m)}};
        C.d = {d0, d1};
        auto H = cohomology(C);
        for (int q = 0; q < 3; ++q) EXPECT_EQ(H[q].sorted_factors(), brute_cohomology(C, q)) << "p=" << p << " m=" << m << " q=" << q;
      }
    }
}

TEST(Cohomology, MixedAnnihilators) {
  // Z/p -> Z/p^2 by p, then Z/p^2 -> Z/p by reduction
  ZpmRing R(3, 2);
  PresentedComplex C;
  C.ring = R;
  C.modules = {PresentedModule{{1}}, PresentedModule{{2}}, PresentedModule{{1}}};
  ModMatrix a(1, 1), b(1, 1);
  a(0, 0) = 3;
  b(0, 0) = 1;
  C.d = {a, b};
  auto H = cohomology(C);
  for (int q = 0; q < 3; ++q) EXPECT_EQ(H[q].sorted_factors(), brute_cohomology(C, q));
  for (auto& h : H) EXPECT_TRUE(h.invariant_factors.empty());
}

TEST(Cohomology, EulerCharacteristic) {
  ZpmRing R(2, 3);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ModMatrix d = random_matrix(3, 4, R, rng, 3);
    PresentedComplex C = two_term(R, 3, 3, d);
    auto H = cohomology(C);
    EXPECT_EQ(H[0].length() - H[1].length(), C.modules[0].length() - C.modules[1].length());
  }
}

TEST(Cohomology, DirectSumIsUnion) {
  ZpmRing R(3, 2);
  ModMatrix a(1, 1), b(1, 1);
  a(0, 0) = 3;
  b(0, 0) = 0;
  auto Ha = cohomology(two_term(R, 2, 2, a));
  auto Hb = cohomology(two_term(R, 2, 2, b));
  ModMatrix ab(2, 2);
  ab(0, 0) = 3;
  auto Hab = cohomology(two_term(R, 2, 2, ab));
  for (int q = 0; q < 2; ++q) {
    auto u = Ha[q].invariant_factors;
    u.insert(u.end(), Hb[q].invariant_factors.begin(), Hb[q].invariant_factors.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    EXPECT_EQ(Hab[q].sorted_factors(), u);
  }
}

TEST(Cohomology, ClassifyRoundTrip) {
  ZpmRing R(2, 3);
  std::mt19937_64 rng(9);
  ModMatrix d = random_matrix(3, 3, R, rng, 3);
  auto H = cohomology(two_term(R, 3, 3, d));
  for (auto& h : H)
    for (std::size_t j = 0; j < h.generators.size(); ++j) {
      auto c = classify(h, h.generators[j], R);
      for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], i == j ? 1 : 0);
    }
}

TEST(Exactness, Identity) {
  ZpmRing R(3, 2);
  PresentedModule Z{}, M{{2, 2}};
  auto rep = exactness_check(ModMatrix(2, 0), ModMatrix::identity(2), Z, M, M, R);
  EXPECT_TRUE(rep.exact);
  EXPECT_TRUE(rep.surjective_g);
}

TEST(Exactness, PThenReduce) {
  ZpmRing R(3, 2);
  ModMatrix f(1, 1), g(1, 1);
  f(0, 0) = 3;
  g(0, 0) = 1;
  PresentedModule A{{1}}, B{{2}}, C{{1}};
  auto rep = exactness_check(f, g, A, B, C, R);
  EXPECT_TRUE(rep.exact);
  EXPECT_TRUE(rep.injective_f);
  EXPECT_TRUE(rep.surjective_g);
}

TEST(Exactness, NonzeroCompositeThrows) {
  ZpmRing R(3, 2);
  ModMatrix f(1, 1), g(1, 1);
  f(0, 0) = 1;
  g(0, 0) = 1;
  PresentedModule A{{2}}, B{{2}}, C{{2}};
  EXPECT_THROW(exactness_check(f, g, A, B, C, R), std::invalid_argument);
}

TEST(Exactness, DefectReported) {
  ZpmRing R(3, 2);
  ModMatrix f(1, 1), g(1, 1);
  f(0, 0) = 0;
  g(0, 0) = 3;
  PresentedModule A{{2}}, B{{2}}, C{{2}};
  auto rep = exactness_check(f, g, A, B, C, R);
  EXPECT_FALSE(rep.exact);
  EXPECT_EQ(rep.defect, 1);
}

TEST(Exactness, FilSesNodeP3M2K4) {
  const PrimeLevel up(3, 2);
  for (Flavor fl : {Flavor::QuotientTrivialBase, Flavor::QuotientLogPoint}) {
    BaseSpec base(2, 2, fl);
    for (auto& k : enumerate_weights(base, up, 4)) {
      auto res = fil_ses_block(base, up, k);
      EXPECT_TRUE(res.exact) << res.detail;
    }
  }
}

TEST(ConnectingHom, ContractibleCIsZero) {
  ZpmRing R(2, 2);
  // A = 0, B = C = (Z/4 -id-> Z/4)
  ShortExactSequence s;
  ModMatrix id = ModMatrix::identity(1);
  s.B = two_term(R, 2, 2, id);
  s.C = two_term(R, 2, 2, id);
  s.A.ring = R;
  s.A.modules = {PresentedModule{}, PresentedModule{}};
  s.A.d = {ModMatrix(0, 0)};
  s.f = {ModMatrix(1, 0), ModMatrix(1, 0)};
  s.g = {id, id};
  ASSERT_TRUE(ses_is_exact(s));
  ModMatrix N = connecting_hom(s, 0);
  EXPECT_EQ(N.rows * N.cols, 0);
}

TEST(ConnectingHom, BocksteinIsNonzero) {
  // 0 -> Z/p -p-> Z/p^2 -> Z/p -> 0 tensored with (Z -p-> Z): the Bockstein
  ZpmRing R(3, 2);
  ShortExactSequence s;
  ModMatrix dA(1, 1), dB(1, 1), dC(1, 1), f(1, 1), g(1, 1);
  dA(0, 0) = 0;
  dB(0, 0) = 3;
  dC(0, 0) = 0;
  f(0, 0) = 3;
  g(0, 0) = 1;
  s.A = two_term(R, 1, 1, dA);
  s.B = two_term(R, 2, 2, dB);
  s.C = two_term(R, 1, 1, dC);
  s.f = {f, f};
  s.g = {g, g};
  ASSERT_TRUE(ses_is_exact(s));
  ModMatrix N = connecting_hom(s, 0);
  ASSERT_EQ(N.rows, 1);
  ASSERT_EQ(N.cols, 1);
  EXPECT_NE(mod_reduce(N(0, 0), 3), 0);
  ModMatrix N2 = connecting_hom(s, 0, LiftStrategy::Randomized, 17);
  EXPECT_TRUE(same_class_matrix(N, N2, {1}, R));
}

TEST(ConnectingHom, ThetaSesNodeLiftIndependent) {
  const PrimeLevel lv(2, 1);
  const ZpmRing R(lv);
  BaseSpec tilde(2, 2, Flavor::QuotientTrivialBase);
  for (auto& k : enumerate_weights(tilde, lv, 3)) {
    ShortExactSequence s = theta_ses(make_theta_blocks(2, 2, lv, k), R);
    ASSERT_TRUE(ses_is_exact(s));
    for (int q = 0; q < 2; ++q) {
      auto Hs = cohomology_at(s.C, q);
      ModMatrix a = connecting_hom(s, q, LiftStrategy::Canonical);
      for (std::uint64_t seed : {1u, 2u, 3u})
        EXPECT_TRUE(same_class_matrix(a, connecting_hom(s, q, LiftStrategy::Randomized, seed), Hs.invariant_factors, R));
    }
  }
}

TEST(ConnectingHom, NaturalUnderRestriction) {
  const PrimeLevel l2(3, 2), l1(3, 1);
  const ZpmRing R2(l2), R1(l1);
  BaseSpec tilde(2, 2, Flavor::QuotientTrivialBase), s0(2, 2, Flavor::QuotientLogPoint);
  for (auto& k : enumerate_weights(tilde, l1, 3)) {
    ThetaBlocks T2 = make_theta_blocks(2, 2, l2, k), T1 = make_theta_blocks(2, 2, l1, k);
    ShortExactSequence s2 = theta_ses(T2, R2), s1 = theta_ses(T1, R1);
    PresentedComplex c2 = block_complex(T2.s0, R2), c1 = block_complex(T1.s0, R1);
    // restriction is the identity in label coordinates
    for (int q = 0; q + 1 < 2; ++q) {
      ModMatrix N2 = connecting_hom(s2, q), N1 = connecting_hom(s1, q);
      auto H2 = cohomology_at(c2, q), H1 = cohomology_at(c1, q);
      // res_*: classes of level-2 generators reduced to level 1
      ModMatrix res(static_cast<int>(H1.invariant_factors.size()), static_cast<int>(H2.invariant_factors.size()));
      for (std::size_t j = 0; j < H2.generators.size(); ++j) {
        auto c = classify(H1, H2.generators[j], R1);
        for (std::size_t i = 0; i < c.size(); ++i) res(static_cast<int>(i), static_cast<int>(j)) = c[i];
      }
      ModMatrix lhs = mat_mul(N1, res, R1), rhs = mat_mul(res, N2, R1);
      EXPECT_TRUE(same_class_matrix(lhs, rhs, H1.invariant_factors, R1)) << k.render();
    }
  }
}
