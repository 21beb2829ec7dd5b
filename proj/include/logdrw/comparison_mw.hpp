#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "logdrw/drw_core.hpp"
#include "logdrw/exact_homology.hpp"
#include "logdrw/log_semistable.hpp"

namespace logdrw {

// ---------------------------------------------------------------------------
// Truncated log Monsky-Washnitzer complex of (Z/p^m)[T_1..T_n]/(T_1...T_r).
// Generators g_i = dlog T_i (i <= r) and g_j = dT_j (j > r); a basis form is
// T^a g_G. Its weight is w = a + sum_{j in G, j > r} e_j, and |w| <= D.

struct MWTerm {
  std::vector<i64> a;  // monomial exponent
  Mask gens = 0;       // generator set G (0-based indices)
  i64 coeff = 1;
};

struct MWBlock {
  Weight weight;                         // integral
  std::vector<std::vector<Mask>> gens;   // per degree, sorted
  std::vector<ModMatrix> d;              // d[q]: degree q -> q+1

  int dim(int q) const { return q < 0 || q >= static_cast<int>(gens.size()) ? 0 : static_cast<int>(gens[q].size()); }
};

struct MWComplexLevel {
  PrimeLevel level;
  BaseSpec base;  // QuotientTrivialBase: the tilde complex; QuotientLogPoint: the theta quotient
  i64 D = 0;
  std::vector<MWBlock> blocks;
};

inline std::vector<i64> mw_exponent(const Weight& w, Mask G, int r) {
  std::vector<i64> a = w.numerators();
  for (int j : mask_indices(G))
    if (j >= r) a[j] -= 1;
  return a;
}

inline int mw_eliminated(const BaseSpec& base, const Weight& w) {
  if (base.flavor != Flavor::QuotientLogPoint) return -1;
  int z = -1;
  for (int i = 0; i < base.r; ++i)
    if (w.numerators()[i] == 0) z = i;
  return z;
}

// generator sets of degree q allowed in block w
inline std::vector<Mask> mw_generator_sets(const BaseSpec& base, const Weight& w, int q) {
  std::vector<Mask> out;
  Mask allowed = base.divisor_mask() | (w.support() & ~base.divisor_mask());
  // theta = 0 eliminates dlog T_z, z the last divisor index with a_z = 0
  if (int z = mw_eliminated(base, w); z >= 0) allowed &= ~(Mask{1} << z);
  for (Mask G : subsets_of_size(allowed, q)) out.push_back(G);
  return out;
}

// impose theta = 0 by rewriting g_z = -sum_{i <= r, i != z} g_i
inline std::map<Mask, i64> mw_reduce_theta(const BaseSpec& base, const Weight& w, const std::map<Mask, i64>& in) {
  const int z = mw_eliminated(base, w);
  if (z < 0) return in;
  std::map<Mask, i64> red;
  for (auto& [M, c] : in) {
    if (!(M >> z & 1u)) {
      red[M] += c;
      continue;
    }
    Mask rest = M & ~(Mask{1} << z);
    int s0 = wedge_sign(Mask{1} << z, rest);
    for (int i = 0; i < base.r; ++i) {
      if (i == z) continue;
      int s1 = wedge_sign(Mask{1} << i, rest);
      if (s1 == 0) continue;
      red[rest | (Mask{1} << i)] += -c * s0 * s1;
    }
  }
  std::map<Mask, i64> out;
  for (auto& [M, c] : red)
    if (c != 0) out[M] = c;
  return out;
}

// d(T^a g_G) = sum_{i <= r} a_i T^a g_i ^ g_G + sum_{j > r} a_j T^{a - e_j} g_j ^ g_G
inline std::map<Mask, i64> mw_d(const BaseSpec& base, const Weight& w, Mask G) {
  std::vector<i64> a = mw_exponent(w, G, base.r);
  std::map<Mask, i64> out;
  for (int i = 0; i < base.n; ++i) {
    if (G >> i & 1u) continue;
    if (a[i] == 0) continue;
    out[G | (Mask{1} << i)] += a[i] * wedge_sign(Mask{1} << i, G);
  }
  return mw_reduce_theta(base, w, out);
}

inline MWBlock make_mw_block(const BaseSpec& base, const PrimeLevel& lv, const Weight& w) {
  MWBlock B;
  B.weight = w;
  const i64 mod = lv.modulus();
  for (int q = 0; q <= base.n; ++q) B.gens.push_back(mw_generator_sets(base, w, q));
  for (int q = 0; q < base.n; ++q) {
    ModMatrix M(B.dim(q + 1), B.dim(q));
    for (int c = 0; c < B.dim(q); ++c)
      for (auto& [G2, v] : mw_d(base, w, B.gens[q][c])) {
        auto it = std::lower_bound(B.gens[q + 1].begin(), B.gens[q + 1].end(), G2);
        if (it == B.gens[q + 1].end() || *it != G2) throw std::logic_error("mw_d: target outside the basis");
        M(static_cast<int>(it - B.gens[q + 1].begin()), c) = mod_reduce(v, mod);
      }
    B.d.push_back(M);
  }
  return B;
}

inline void for_each_integral_weight(const BaseSpec& base, i64 D, i64 p, const std::function<void(const Weight&)>& fn) {
  std::vector<i64> a(base.n, 0);
  std::function<void(int, i64)> rec = [&](int i, i64 left) {
    if (i == base.n) {
      Weight w = Weight::integral(a, p);
      if (base.admits(w)) fn(w);
      return;
    }
    for (i64 x = 0; x <= left; ++x) {
      a[i] = x;
      rec(i + 1, left - x);
    }
    a[i] = 0;
  };
  rec(0, D);
}

inline MWComplexLevel build_mw(const BaseSpec& base, const PrimeLevel& lv, i64 D) {
  if (D < 0) throw std::invalid_argument("build_mw: D must be >= 0");
  if (!base.quotient()) throw std::invalid_argument("build_mw: expects a quotient flavor (tilde or S0)");
  MWComplexLevel C;
  C.level = lv;
  C.base = base;
  C.D = D;
  for_each_integral_weight(base, D, lv.p(), [&](const Weight& w) { C.blocks.push_back(make_mw_block(base, lv, w)); });
  return C;
}

inline PresentedComplex mw_block_complex(const MWBlock& B, const ZpmRing& R) {
  PresentedComplex C;
  C.ring = R;
  for (std::size_t q = 0; q < B.gens.size(); ++q) C.modules.push_back(PresentedModule{std::vector<int>(B.gens[q].size(), R.m())});
  for (auto& d : B.d) C.d.push_back(d);
  return C;
}

inline ModMatrix mw_map_matrix(const MWBlock& src, int qs, const MWBlock& dst, int qd, const std::function<std::map<Mask, i64>(Mask)>& op,
                               const ZpmRing& R) {
  ModMatrix M(dst.dim(qd), src.dim(qs));
  for (int c = 0; c < src.dim(qs); ++c)
    for (auto& [G2, v] : op(src.gens[qs][c])) {
      auto it = std::lower_bound(dst.gens[qd].begin(), dst.gens[qd].end(), G2);
      if (it == dst.gens[qd].end() || *it != G2) throw std::logic_error("mw map: target outside the basis");
      M(static_cast<int>(it - dst.gens[qd].begin()), c) = R.reduce(v);
    }
  return M;
}

// 0 -> omega[-1] --(^theta)--> omega~ --> omega -> 0 in block w
inline ShortExactSequence mw_theta_ses(int n, int r, const PrimeLevel& lv, const Weight& w) {
  const BaseSpec tilde(n, r, Flavor::QuotientTrivialBase), s0(n, r, Flavor::QuotientLogPoint);
  const ZpmRing R(lv);
  MWBlock T = make_mw_block(tilde, lv, w), S = make_mw_block(s0, lv, w);
  ShortExactSequence ses;
  ses.B = mw_block_complex(T, R);
  ses.C = mw_block_complex(S, R);
  ses.A.ring = R;
  ses.A.modules.push_back(PresentedModule{});
  for (int q = 0; q < n; ++q) ses.A.modules.push_back(PresentedModule{std::vector<int>(S.dim(q), R.m())});
  ses.A.d.push_back(ModMatrix(S.dim(0), 0));
  for (int q = 0; q + 1 < n; ++q) ses.A.d.push_back(S.d[q]);
  for (int q = 0; q <= n; ++q) {
    if (q == 0)
      ses.f.push_back(ModMatrix(T.dim(0), 0));
    else
      ses.f.push_back(mw_map_matrix(S, q - 1, T, q, [&](Mask G) {
        std::map<Mask, i64> out;
        for (int i = 0; i < r; ++i)
          if (!(G >> i & 1u)) out[G | (Mask{1} << i)] += wedge_sign(G, Mask{1} << i);
        return out;
      }, R));
    ses.g.push_back(mw_map_matrix(T, q, S, q, [&](Mask G) { return mw_reduce_theta(s0, w, {{G, 1}}); }, R));
  }
  return ses;
}

// kappa: T_i -> [T_i], dT_j -> d[T_j], dlog T_i -> dlog[T_i]
inline Form kappa_form(Mask G) { return Form{{G, 1}}; }

inline DRWElement kappa(const std::vector<MWTerm>& x, const PrimeLevel& lv, const BaseSpec& base, int degree) {
  std::map<Weight, Form> acc;
  for (auto& t : x) {
    if (static_cast<int>(t.a.size()) != base.n) throw std::invalid_argument("kappa: exponent length mismatch");
    if (popcount(t.gens) != degree) throw std::invalid_argument("kappa: degree mismatch");
    std::vector<i64> w = t.a;
    for (int j : mask_indices(t.gens))
      if (j >= base.r) w[j] += 1;
    form_add(acc[Weight::integral(w, lv.p())], form_scale(kappa_form(t.gens), t.coeff));
  }
  return assemble(lv, base, degree, acc);
}

// kappa on one block: columns = MW basis, rows = DRW block basis
inline ModMatrix kappa_block_matrix(const MWBlock& M, const WeightBlock& W, int q) {
  ModMatrix K(W.dim(q), M.dim(q));
  for (int c = 0; c < M.dim(q); ++c) {
    std::vector<i64> v = normalize(*W.bases[q], kappa_form(M.gens[q][c]), W.annihilator);
    for (int r = 0; r < W.dim(q); ++r) K(r, c) = v[r];
  }
  return K;
}

struct IntegralIsoCertificate {
  bool ok = true;
  int blocks_checked = 0;
  std::string detail;
  std::vector<std::vector<ModMatrix>> inverses;  // per block, per degree
};

inline IntegralIsoCertificate integral_iso_check(const BaseSpec& base, const PrimeLevel& lv, i64 D, i64 K) {
  if (D != K) throw std::invalid_argument("integral_iso_check: bound mismatch (D=" + std::to_string(D) + ", K=" + std::to_string(K) + ")");
  IntegralIsoCertificate cert;
  const ZpmRing R(lv);
  for_each_integral_weight(base, D, lv.p(), [&](const Weight& w) {
    MWBlock M = make_mw_block(base, lv, w);
    WeightBlock W = make_weight_block(base, lv, w);
    std::vector<ModMatrix> kap, inv;
    for (int q = 0; q <= base.n; ++q) {
      if (M.dim(q) != W.dim(q)) {
        cert.ok = false;
        if (cert.detail.empty()) cert.detail = "rank mismatch at weight " + w.render() + " degree " + std::to_string(q);
        return;
      }
      ModMatrix Kq = kappa_block_matrix(M, W, q);
      SmithForm S = smith_normal_form(Kq, R);
      bool unimodular = std::all_of(S.exps.begin(), S.exps.end(), [](int e) { return e == 0; });
      if (!unimodular) {
        cert.ok = false;
        if (cert.detail.empty()) cert.detail = "kappa not invertible at weight " + w.render() + " degree " + std::to_string(q);
        return;
      }
      // inverse = W * U since U K W = I
      inv.push_back(mat_mul(S.W, S.U, R));
      kap.push_back(Kq);
    }
    for (int q = 0; q < base.n; ++q) {
      ModMatrix lhs = mat_mul(kap[q + 1], M.d[q], R);
      ModMatrix rhs = mat_mul(W.d[q], kap[q], R);
      if (!(lhs == rhs)) {
        cert.ok = false;
        if (cert.detail.empty()) cert.detail = "kappa o d != d o kappa at weight " + w.render() + " degree " + std::to_string(q);
        return;
      }
    }
    cert.inverses.push_back(inv);
    ++cert.blocks_checked;
  });
  return cert;
}

// ---------------------------------------------------------------------------
// overconvergence gauge: v_p(xi) >= eps |k| - C over all terms of a family

enum class GaugeNorm { Sum, Max };

struct GaugeOptions {
  GaugeNorm norm = GaugeNorm::Sum;
  int grid_floor = 6;        // grid {1/2^j, 1/(p 2^j)} for j = 0..grid_floor
  mpq_class c_cap = 0;       // largest admissible C
};

struct GaugeReport {
  mpq_class epsilon;
  mpq_class C;
  bool within_cap = false;   // C(epsilon) <= c_cap
  int terms = 0;
};

// valuation of the Witt-vector coefficient V^{u(k)}(eta): v_p(eta) + u(k)
inline int term_gauge_valuation(const BasicTerm& t) { return t.coeff.valuation() + t.weight.u(); }

inline mpq_class term_norm(const BasicTerm& t, GaugeNorm norm) {
  auto [num, den] = norm == GaugeNorm::Sum ? t.weight.total() : t.weight.max_entry();
  return mpq_class(mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den)));
}

inline std::vector<mpq_class> gauge_grid(i64 p, int floor) {
  std::vector<mpq_class> g;
  for (int j = 0; j <= floor; ++j) {
    g.push_back(mpq_class(1, 1u << j));
    g.push_back(mpq_class(1, static_cast<unsigned long>(p) << j));
  }
  for (auto& x : g) x.canonicalize();
  std::sort(g.begin(), g.end(), std::greater<>());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline GaugeReport gauge_fit(const std::vector<DRWElement>& family, const GaugeOptions& opt = {}) {
  std::vector<std::pair<mpq_class, int>> pts;  // (|k|, valuation)
  i64 p = 0;
  for (auto& x : family) {
    p = x.level().p();
    for (auto& t : x.terms()) pts.push_back({term_norm(t, opt.norm), term_gauge_valuation(t)});
  }
  if (family.empty() || pts.empty()) throw std::invalid_argument("gauge_fit: empty family");
  auto grid = gauge_grid(p, opt.grid_floor);
  auto c_of = [&](const mpq_class& eps) {
    mpq_class c = 0;
    for (auto& [nk, v] : pts) {
      mpq_class need = eps * nk - v;
      if (need > c) c = need;
    }
    return c;
  };
  GaugeReport rep;
  rep.terms = static_cast<int>(pts.size());
  for (auto& eps : grid) {
    mpq_class c = c_of(eps);
    if (c <= opt.c_cap) {
      rep.epsilon = eps;
      rep.C = c;
      rep.within_cap = true;
      return rep;
    }
  }
  rep.epsilon = grid.back();
  rep.C = c_of(rep.epsilon);
  rep.within_cap = false;
  return rep;
}

inline bool gauge_certifies(const std::vector<DRWElement>& family, const mpq_class& eps, const mpq_class& C, GaugeNorm norm) {
  if (eps <= 0) return false;
  for (auto& x : family)
    for (auto& t : x.terms())
      if (mpq_class(term_gauge_valuation(t)) < eps * term_norm(t, norm) - C) return false;
  return true;
}

inline std::string rational_string(const mpq_class& x) {
  mpq_class y = x;
  y.canonicalize();
  return y.get_str();
}

}  // namespace logdrw
