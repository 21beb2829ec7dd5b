#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "logdrw/drw_core.hpp"
#include "logdrw/exact_homology.hpp"
#include "logdrw/log_semistable.hpp"

namespace logdrw {

// ---------------------------------------------------------------------------
// weight filtration: P_j is spanned by the basis terms with at most j log factors

struct WeightFiltration {
  // dims[q][j] = rank of P_j in degree q (j = 0..r)
  std::vector<std::vector<int>> dims;
  std::vector<int> gr_dim(int q) const {
    std::vector<int> g;
    for (std::size_t j = 0; j < dims[q].size(); ++j) g.push_back(dims[q][j] - (j ? dims[q][j - 1] : 0));
    return g;
  }
};

inline WeightFiltration weight_filtration(const ComplexSlice& S) {
  if (S.base.flavor != Flavor::QuotientTrivialBase) throw std::invalid_argument("weight_filtration: expects the tilde slice");
  WeightFiltration F;
  for (int q = 0; q <= S.top(); ++q) {
    std::vector<int> row(S.base.r + 1, 0);
    for (auto& b : S.blocks)
      for (auto& P : b.bases[q]->labels)
        for (int j = P.log_count(); j <= S.base.r; ++j) ++row[j];
    F.dims.push_back(row);
  }
  return F;
}

inline int element_weight_level(const DRWElement& x) {
  int lam = 0;
  for (auto& t : x.terms()) lam = std::max(lam, t.partition.log_count());
  return lam;
}

// Span certification in one block: the products W~^j x (non-log forms of degree q-j)
// with weights adding up to k span exactly the basis terms with at most j log factors.
inline bool certify_filtration_block(const BaseSpec& tilde, const PrimeLevel& lv, const Weight& k, int q, int j,
                                     std::string* why = nullptr) {
  auto B = block_basis(tilde, k, q);
  const int a = lv.m() - k.u();
  if (j >= q || a <= 0 || B->size() == 0) return true;
  const ZpmRing Ra(lv.p(), a);
  std::vector<int> keep;
  std::vector<char> kept(B->size(), 0);
  for (int t = 0; t < B->size(); ++t)
    if (B->labels[t].log_count() <= j) {
      keep.push_back(t);
      kept[t] = 1;
    }
  const int nk = static_cast<int>(keep.size());
  const int full = nk * a;
  // generators restricted to the kept labels, compressed to at most nk columns by SNF
  std::vector<std::vector<i64>> gens;
  int len = 0;
  bool contained = true;
  auto compress = [&]() {
    if (gens.empty() || nk == 0) return;
    ModMatrix G(nk, static_cast<int>(gens.size()));
    for (int c = 0; c < G.cols; ++c)
      for (int r = 0; r < nk; ++r) G(r, c) = gens[c][r];
    SmithForm S = smith_normal_form(G, Ra);
    gens.clear();
    len = 0;
    for (int i = 0; i < S.rank; ++i) {
      std::vector<i64> g(nk);
      const i64 s = Ra.pow_p(S.exps[i]);
      for (int r = 0; r < nk; ++r) g[r] = Ra.mul(S.Uinv(r, i), s);
      gens.push_back(std::move(g));
      len += a - S.exps[i];
    }
  };
  auto add = [&](const std::vector<i64>& v) {
    for (int t = 0; t < B->size(); ++t)
      if (!kept[t] && Ra.reduce(v[t]) != 0) contained = false;
    if (len == full) return;
    std::vector<i64> g(nk);
    bool nz = false;
    for (int r = 0; r < nk; ++r) nz |= (g[r] = Ra.reduce(v[keep[r]])) != 0;
    if (!nz) return;
    gens.push_back(std::move(g));
    if (static_cast<int>(gens.size()) > 2 * nk + 8) compress();
  };
  // splittings k = a + b on the level-m grid
  const int D = lv.m() - 1;
  std::vector<i64> kn(k.size());
  for (int i = 0; i < k.size(); ++i) kn[i] = k.numerators()[i] * ipow(lv.p(), D - k.u());
  std::vector<i64> an(k.size(), 0);
  std::function<void(int)> rec = [&](int i) {
    if (!contained) return;
    if (i == k.size()) {
      std::vector<i64> bn(k.size());
      for (int t = 0; t < k.size(); ++t) bn[t] = kn[t] - an[t];
      Weight wa(an, D, lv.p()), wb(bn, D, lv.p());
      if (!tilde.admits(wa) || !tilde.admits(wb)) return;
      auto Ba = block_basis(tilde, wa, j);
      auto Bb = block_basis(tilde, wb, q - j);
      for (auto& x : Ba->vectors)
        for (int t = 0; t < Bb->size(); ++t) {
          if (Bb->labels[t].log_count() != 0) continue;
          add(normalize(*B, form_wedge(x, Bb->vectors[t]), a));
        }
      return;
    }
    for (i64 x = 0; x <= kn[i]; ++x) {
      an[i] = x;
      rec(i + 1);
    }
    an[i] = 0;
  };
  rec(0);
  compress();
  bool ok = contained && len == full;
  if (!ok && why) *why = "P_" + std::to_string(j) + " mismatch at weight " + k.render() + " degree " + std::to_string(q);
  return ok;
}

// ---------------------------------------------------------------------------
// Poincare residues

// stratum Y_I = {T_i = 0, i in I}: a polynomial ring in the remaining n-|I| variables
inline BaseSpec stratum_base(int n, Mask I) { return BaseSpec(n - popcount(I), 0, Flavor::PolyTrivialBase); }

inline std::vector<int> compress_map(int n, Mask I) {
  std::vector<int> m(n, -1);
  int c = 0;
  for (int i = 0; i < n; ++i)
    if (!(I >> i & 1u)) m[i] = c++;
  return m;
}

inline Partition stratum_label(const Partition& P, const std::vector<int>& cm) {
  Partition Q;
  for (auto& part : P.teich) {
    std::vector<int> np;
    for (int i : part) np.push_back(cm[i]);
    Q.teich.push_back(np);
  }
  return Q;
}

// residue of x in P_j: strips the log factors (alpha ^ e_I = (-1)^{j deg alpha} e_I ^ alpha -> alpha)
inline std::map<Mask, DRWElement> residue(int j, const DRWElement& x) {
  if (x.base().flavor != Flavor::QuotientTrivialBase) throw std::invalid_argument("residue: expects a tilde element");
  const int n = x.base().n;
  std::map<Mask, std::map<Weight, std::vector<std::pair<Partition, i64>>>> acc;
  for (auto& t : x.terms()) {
    const int lam = t.partition.log_count();
    if (lam > j) throw std::invalid_argument("residue: element is not in P_" + std::to_string(j));
    if (lam < j) continue;
    Mask I = t.partition.log_mask();
    auto cm = compress_map(n, I);
    const int deg_alpha = t.degree - j;
    i64 sign = ((j * deg_alpha) & 1) ? -1 : 1;
    acc[I][t.weight.without(I)].push_back({stratum_label(t.partition, cm), sign * t.coeff.value()});
  }
  std::map<Mask, DRWElement> out;
  for (auto& [I, byw] : acc) {
    BaseSpec sb = stratum_base(n, I);
    DRWElement e(x.level(), sb, x.degree() - j);
    for (auto& [w, items] : byw) {
      auto B = block_basis(sb, w, x.degree() - j);
      std::vector<i64> c(B->size(), 0);
      for (auto& [P, v] : items) {
        auto it = std::lower_bound(B->labels.begin(), B->labels.end(), P);
        if (it == B->labels.end() || !(*it == P)) throw std::logic_error("residue: stratum label missing");
        c[it - B->labels.begin()] += v;
      }
      e.set_block(w, c);
    }
    out.emplace(I, e);
  }
  return out;
}

// Gr_j of one tilde block against the stratum blocks: bijection of labels and
// Res o d = (-1)^j d o Res
struct ResidueCheck {
  bool ok = true;
  std::string detail;
};

inline ResidueCheck residue_check_block(const WeightBlock& W, int j, const PrimeLevel& lv) {
  ResidueCheck res;
  const BaseSpec tilde = W.bases[0]->base;
  const int n = tilde.n;
  const ZpmRing R(lv);
  const Weight& k = W.weight;
  const Mask Z = tilde.log_indices(k);
  const int top = static_cast<int>(W.bases.size());
  auto fail = [&](const std::string& s) {
    res.ok = false;
    if (res.detail.empty()) res.detail = "weight " + k.render() + ": " + s;
  };
  // strata contributing to this block
  std::vector<Mask> strata;
  for (Mask I = 0; I <= Z; ++I)
    if ((I & ~Z) == 0 && popcount(I) == j) strata.push_back(I);
  for (int q = 0; q < top; ++q) {
    // P_j stability under d
    if (q + 1 < top)
      for (int c = 0; c < W.dim(q); ++c) {
        if (W.bases[q]->labels[c].log_count() > j) continue;
        for (int rr = 0; rr < W.dim(q + 1); ++rr)
          if (W.d[q](rr, c) != 0 && W.bases[q + 1]->labels[rr].log_count() > j) fail("d does not preserve P_j");
      }
    // labels of Gr_j in degree q
    std::vector<int> gr;
    for (int c = 0; c < W.dim(q); ++c)
      if (W.bases[q]->labels[c].log_count() == j) gr.push_back(c);
    int expected = 0;
    for (Mask I : strata) {
      auto cm = compress_map(n, I);
      if (q - j < 0) continue;
      auto SB = block_basis(stratum_base(n, I), k.without(I), q - j);
      expected += SB->size();
      for (int c : gr) {
        const Partition& P = W.bases[q]->labels[c];
        if (P.log_mask() != I) continue;
        Partition Q = stratum_label(P, cm);
        if (!std::binary_search(SB->labels.begin(), SB->labels.end(), Q)) fail("label without stratum partner");
      }
    }
    if (static_cast<int>(gr.size()) != expected) fail("Gr_" + std::to_string(j) + " rank differs from strata in degree " + std::to_string(q));
  }
  if (!res.ok) return res;
  // d-conjugation: for each Gr_j label, compare d in the quotient with the stratum d
  for (Mask I : strata) {
    auto cm = compress_map(n, I);
    const BaseSpec sb = stratum_base(n, I);
    const Weight ks = k.without(I);
    for (int q = j; q + 1 < top; ++q) {
      auto S0 = block_basis(sb, ks, q - j), S1 = block_basis(sb, ks, q - j + 1);
      for (int c = 0; c < W.dim(q); ++c) {
        const Partition& P = W.bases[q]->labels[c];
        if (P.log_count() != j || P.log_mask() != I) continue;
        const i64 sgn0 = ((j * (q - j)) & 1) ? -1 : 1;
        const i64 sgn1 = ((j * (q + 1 - j)) & 1) ? -1 : 1;
        Partition Q = stratum_label(P, cm);
        int sc = static_cast<int>(std::lower_bound(S0->labels.begin(), S0->labels.end(), Q) - S0->labels.begin());
        // stratum d of Res(label)
        std::vector<i64> ds = normalize(*S1, form_d(ks, S0->vectors[sc]), W.annihilator);
        // Res(d label) restricted to Gr_j with log set I
        std::vector<i64> dr(S1->size(), 0);
        for (int rr = 0; rr < W.dim(q + 1); ++rr) {
          const Partition& P1 = W.bases[q + 1]->labels[rr];
          if (P1.log_count() != j || P1.log_mask() != I) continue;
          Partition Q1 = stratum_label(P1, cm);
          int t = static_cast<int>(std::lower_bound(S1->labels.begin(), S1->labels.end(), Q1) - S1->labels.begin());
          dr[t] += sgn1 * W.d[q](rr, c);
        }
        const i64 mod = ipow(lv.p(), W.annihilator);
        const i64 jsign = (j & 1) ? -1 : 1;
        for (int t = 0; t < S1->size(); ++t)
          if (mod_reduce(dr[t] - jsign * sgn0 * ds[t], mod) != 0) fail("Res o d != (-1)^j d o Res");
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Steenbrink double complexes

enum class NuSign { Corrected, Printed };

struct SteenbrinkBlock {
  Weight weight;
  int annihilator = 0;
  // cells[t] = list of (i, j, tilde label index in degree t+1); B^t = (+)_{i+j=t} B^{i,j}
  std::vector<std::vector<std::tuple<int, int, int>>> cells;
  PresentedComplex total;
  std::vector<ModMatrix> nu;     // nu[t]: B^t -> B^t
  std::vector<ModMatrix> theta;  // Theta[t]: S0^t -> B^t
};

inline SteenbrinkBlock build_B_block(const ThetaBlocks& T, const ZpmRing& R, NuSign sign = NuSign::Corrected) {
  const WeightBlock& W = T.tilde;
  SteenbrinkBlock S;
  S.weight = W.weight;
  S.annihilator = W.annihilator;
  const int top = static_cast<int>(W.bases.size()) - 1;  // top tilde degree
  const BaseSpec tilde = W.bases[0]->base;
  const Form th = form_theta(tilde);
  // total degrees t = 0..top-1 (tilde degree t+1 <= top)
  std::vector<std::map<std::pair<int, int>, int>> pos(top);
  for (int t = 0; t < top; ++t) {
    S.cells.emplace_back();
    for (int j = 0; j <= t; ++j)
      for (int c = 0; c < W.dim(t + 1); ++c)
        if (W.bases[t + 1]->labels[c].log_count() > j) {
          pos[t][{j, c}] = static_cast<int>(S.cells[t].size());
          S.cells[t].push_back({t - j, j, c});
        }
  }
  S.total.ring = R;
  for (int t = 0; t < top; ++t)
    S.total.modules.push_back(PresentedModule{std::vector<int>(S.cells[t].size(), W.annihilator)});
  const i64 mod = ipow(R.p(), W.annihilator);
  for (int t = 0; t + 1 < top; ++t) {
    ModMatrix D(static_cast<int>(S.cells[t + 1].size()), static_cast<int>(S.cells[t].size()));
    for (int col = 0; col < static_cast<int>(S.cells[t].size()); ++col) {
      auto [i, j, c] = S.cells[t][col];
      const Form& v = W.bases[t + 1]->vectors[c];
      std::vector<i64> dv = normalize(*W.bases[t + 2], form_d(W.weight, v), W.annihilator);
      std::vector<i64> tv = normalize(*W.bases[t + 2], form_wedge(v, th), W.annihilator);
      const i64 hs = (j & 1) ? -1 : 1;
      for (int c2 = 0; c2 < W.dim(t + 2); ++c2) {
        auto it = pos[t + 1].find({j, c2});
        if (it != pos[t + 1].end()) D(it->second, col) = mod_reduce(D(it->second, col) + hs * dv[c2], mod);
        auto it2 = pos[t + 1].find({j + 1, c2});
        if (it2 != pos[t + 1].end()) D(it2->second, col) = mod_reduce(D(it2->second, col) + tv[c2], mod);
      }
    }
    S.total.d.push_back(D);
  }
  for (int t = 0; t < top; ++t) {
    ModMatrix N(static_cast<int>(S.cells[t].size()), static_cast<int>(S.cells[t].size()));
    for (int col = 0; col < static_cast<int>(S.cells[t].size()); ++col) {
      auto [i, j, c] = S.cells[t][col];
      if (i < 1) continue;
      auto it = pos[t].find({j + 1, c});
      if (it == pos[t].end()) continue;  // the label dies in W~/P_{j+1}
      int e = sign == NuSign::Corrected ? j + 1 : i + j + 1;
      N(it->second, col) = (e & 1) ? mod - 1 : 1;
    }
    S.nu.push_back(N);
  }
  for (int t = 0; t < top; ++t) {
    const int ns = T.s0.dim(t);
    ModMatrix Th(static_cast<int>(S.cells[t].size()), ns);
    for (int col = 0; col < ns; ++col) {
      std::vector<i64> tv = normalize(*W.bases[t + 1], form_wedge(T.s0.bases[t]->vectors[col], th), W.annihilator);
      for (int c2 = 0; c2 < W.dim(t + 1); ++c2) {
        auto it = pos[t].find({0, c2});
        if (it != pos[t].end()) Th(it->second, col) = tv[c2];
      }
    }
    S.theta.push_back(Th);
  }
  return S;
}

// C^t = B^{t-1} (+) B^t with D_C(w1, w2) = (D w1 + nu w2, D w2)
inline PresentedComplex build_C_total(const SteenbrinkBlock& B) {
  const ZpmRing& R = B.total.ring;
  PresentedComplex C;
  C.ring = R;
  const int top = B.total.top();
  auto bmod = [&](int t) { return complex_module(B.total, t); };
  for (int t = 0; t <= top; ++t) {
    PresentedModule M;
    auto a = bmod(t - 1), b = bmod(t);
    M.exps = a.exps;
    M.exps.insert(M.exps.end(), b.exps.begin(), b.exps.end());
    C.modules.push_back(M);
  }
  for (int t = 0; t < top; ++t) {
    const int a0 = bmod(t - 1).size(), b0 = bmod(t).size(), a1 = bmod(t).size(), b1 = bmod(t + 1).size();
    ModMatrix D(a1 + b1, a0 + b0);
    ModMatrix Dp = complex_d(B.total, t - 1), Dt = complex_d(B.total, t);
    for (int r = 0; r < a1; ++r)
      for (int c = 0; c < a0; ++c) D(r, c) = Dp(r, c);
    for (int r = 0; r < a1; ++r)
      for (int c = 0; c < b0; ++c) D(r, a0 + c) = B.nu[t](r, c);
    for (int r = 0; r < b1; ++r)
      for (int c = 0; c < b0; ++c) D(a1 + r, a0 + c) = Dt(r, c);
    C.d.push_back(D);
  }
  return C;
}

// 0 -> B[-1] -> C -> B -> 0 (inclusion of the first summand, projection to the second)
inline ShortExactSequence steenbrink_ses(const SteenbrinkBlock& B) {
  ShortExactSequence s;
  const ZpmRing& R = B.total.ring;
  const int top = B.total.top();
  s.A.ring = R;
  s.A.modules.push_back(PresentedModule{});
  for (int t = 0; t < top; ++t) s.A.modules.push_back(B.total.modules[t]);
  s.A.d.push_back(ModMatrix(complex_module(B.total, 0).size(), 0));
  for (auto& d : B.total.d) s.A.d.push_back(d);
  s.B = build_C_total(B);
  s.C = B.total;
  s.C.modules.push_back(PresentedModule{});
  s.C.d.push_back(ModMatrix(0, complex_module(B.total, top - 1).size()));
  for (int t = 0; t <= top; ++t) {
    const int a = complex_module(B.total, t - 1).size(), b = complex_module(B.total, t).size();
    ModMatrix f(a + b, a), g(b, a + b);
    for (int i = 0; i < a; ++i) f(i, i) = 1;
    for (int i = 0; i < b; ++i) g(i, a + i) = 1;
    s.f.push_back(f);
    s.g.push_back(g);
  }
  return s;
}

// D nu + nu D on total B (zero iff C is a complex)
inline bool nu_anticommutes(const SteenbrinkBlock& B) {
  const ZpmRing& R = B.total.ring;
  for (int t = 0; t + 1 < B.total.top(); ++t) {
    ModMatrix s = mat_add(mat_mul(B.total.d[t], B.nu[t], R), mat_mul(B.nu[t + 1], B.total.d[t], R), R);
    if (!is_zero_map(s, B.total.modules[t + 1], R)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// monodromy per weight block

struct MonodromyBlock {
  Weight weight;
  std::vector<ModMatrix> N_conn;    // per degree q: H^q(S0) -> H^q(S0)
  std::vector<ModMatrix> nu_star;   // per degree: H^q(B) -> H^q(B)
  std::vector<ModMatrix> theta_star;
  std::vector<std::vector<int>> h_s0, h_B;  // invariant factors
  bool agree = true;
  bool nilpotent = true;
  bool zero = true;
};

inline bool nilpotent_with_index(const ModMatrix& N, const std::vector<int>& factors, int bound, const ZpmRing& R, int* index = nullptr) {
  if (N.rows == 0) {
    if (index) *index = 1;
    return true;
  }
  ModMatrix P = N;
  for (int e = 1; e <= std::max(bound, N.rows + 1); ++e) {
    if (same_class_matrix(P, ModMatrix(N.rows, N.cols), factors, R)) {
      if (index) *index = e;
      return e <= bound;
    }
    P = mat_mul(P, N, R);
  }
  return false;
}

inline MonodromyBlock monodromy_block(int n, int r, const PrimeLevel& lv, const Weight& k, std::uint64_t seed = 0) {
  MonodromyBlock M;
  M.weight = k;
  const ZpmRing R(lv);
  ThetaBlocks T = make_theta_blocks(n, r, lv, k);
  ShortExactSequence ses = theta_ses(T, R);
  SteenbrinkBlock B = build_B_block(T, R);
  PresentedComplex s0 = block_complex(T.s0, R);
  const int top = B.total.top();
  for (int q = 0; q < s0.top(); ++q) {
    ModMatrix N = connecting_hom(ses, q, LiftStrategy::Canonical);
    ModMatrix N2 = connecting_hom(ses, q, LiftStrategy::Randomized, seed + static_cast<std::uint64_t>(q));
    CohomologyGroup Hs = cohomology_at(s0, q);
    M.h_s0.push_back(Hs.invariant_factors);
    if (!same_class_matrix(N, N2, Hs.invariant_factors, R)) M.agree = false;
    M.N_conn.push_back(N);
    if (!same_class_matrix(N, ModMatrix(N.rows, N.cols), Hs.invariant_factors, R)) M.zero = false;
    if (!nilpotent_with_index(N, Hs.invariant_factors, std::max(r, 1), R)) M.nilpotent = false;
    if (q < top) {
      CohomologyGroup HB = cohomology_at(B.total, q);
      M.h_B.push_back(HB.invariant_factors);
      ModMatrix nu = induced_map(B.total, B.total, B.nu[q], q);
      ModMatrix th = induced_map(s0, B.total, B.theta[q], q);
      M.nu_star.push_back(nu);
      M.theta_star.push_back(th);
      ModMatrix lhs = mat_mul(th, N, R), rhs = mat_mul(nu, th, R);
      if (!same_class_matrix(lhs, rhs, HB.invariant_factors, R)) M.agree = false;
    }
  }
  return M;
}


// ---------------------------------------------------------------------------
// Phi across adjacent levels: B(level m+1, k) -> B(level m, pk)

struct PhiBlock {
  std::vector<ModMatrix> B;   // per total degree t: p^{i+1} F on B^{i,j}
  std::vector<ModMatrix> s0;  // per degree t: p^{t+1} F on the S0 slice
  bool well_defined = true;   // F(P_j) lands in P_j
};

inline PhiBlock phi_block(const ThetaBlocks& up, const SteenbrinkBlock& Bup, const ThetaBlocks& dn, const SteenbrinkBlock& Bdn, const ZpmRing& Rdn) {
  PhiBlock P;
  const i64 p = Rdn.p();
  const int top = Bup.total.top();
  auto id = [](const Form& y) { return y; };
  for (int t = 0; t < top; ++t) {
    ModMatrix F = block_operator(*up.tilde.bases[t + 1], *dn.tilde.bases[t + 1], dn.tilde.annihilator, id);
    std::map<std::pair<int, int>, int> pos;
    for (std::size_t r = 0; r < Bdn.cells[t].size(); ++r) {
      auto [i, j, c] = Bdn.cells[t][r];
      pos[{j, c}] = static_cast<int>(r);
    }
    ModMatrix M(static_cast<int>(Bdn.cells[t].size()), static_cast<int>(Bup.cells[t].size()));
    for (std::size_t col = 0; col < Bup.cells[t].size(); ++col) {
      auto [i, j, c] = Bup.cells[t][col];
      const i64 s = ipow(p, i + 1);
      for (int c2 = 0; c2 < F.rows; ++c2) {
        if (F(c2, c) == 0) continue;
        auto it = pos.find({j, c2});
        if (it != pos.end()) M(it->second, static_cast<int>(col)) = Rdn.mul(s, F(c2, c));
      }
    }
    // labels of P_j must map into P_j
    for (int c = 0; c < F.cols; ++c) {
      const int lc = up.tilde.bases[t + 1]->labels[c].log_count();
      for (int j = lc; j <= t; ++j) {
        const i64 s = ipow(p, t - j + 1);
        for (int c2 = 0; c2 < F.rows; ++c2)
          if (pos.count({j, c2}) && Rdn.mul(s, F(c2, c)) % ipow(p, Bdn.annihilator) != 0) P.well_defined = false;
      }
    }
    P.B.push_back(M);
    ModMatrix Fs = block_operator(*up.s0.bases[t], *dn.s0.bases[t], dn.s0.annihilator, id);
    P.s0.push_back(mat_scale(Fs, ipow(p, t + 1), Rdn));
  }
  return P;
}

inline bool maps_equal(const ModMatrix& A, const ModMatrix& B, int annihilator, const ZpmRing& R) {
  if (A.rows != B.rows || A.cols != B.cols) return false;
  const i64 q = ipow(R.p(), annihilator);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j)
      if (mod_reduce(A(i, j) - B(i, j), q) != 0) return false;
  return true;
}

struct LevelPairCheck {
  bool phi_well_defined = true;
  bool phi_chain = true;      // Phi commutes with the total differential of B
  bool theta_phi = true;      // Theta Phi = Phi Theta
  bool n_restrict = true;     // N o restrict = restrict o N on H(S0)
  bool n_phi_commute = true;  // N Phi = Phi N on H(S0), recorded only
  bool n_phi_p_twisted = true;  // N Phi = p Phi N on H(S0), recorded only
  std::string detail;
};

// k is a weight at level up = m+1
inline LevelPairCheck level_pair_block(int n, int r, const PrimeLevel& up, const Weight& k, std::uint64_t seed = 0) {
  LevelPairCheck res;
  const PrimeLevel dn = up.with_level(up.m() - 1);
  const ZpmRing Rup(up), Rdn(dn);
  const Weight kp = k.times_p();
  ThetaBlocks Tu = make_theta_blocks(n, r, up, k), Td = make_theta_blocks(n, r, dn, kp);
  SteenbrinkBlock Bu = build_B_block(Tu, Rup), Bd = build_B_block(Td, Rdn);
  PhiBlock P = phi_block(Tu, Bu, Td, Bd, Rdn);
  res.phi_well_defined = P.well_defined;
  const int top = Bu.total.top();
  for (int t = 0; t + 1 < top; ++t)
    if (!maps_equal(mat_mul(Bd.total.d[t], P.B[t], Rdn), mat_mul(P.B[t + 1], Bu.total.d[t], Rdn), Bd.annihilator, Rdn)) {
      res.phi_chain = false;
      res.detail = "Phi D != D Phi in total degree " + std::to_string(t);
    }
  for (int t = 0; t < top; ++t)
    if (!maps_equal(mat_mul(Bd.theta[t], P.s0[t], Rdn), mat_mul(P.B[t], Bu.theta[t], Rdn), Bd.annihilator, Rdn)) {
      res.theta_phi = false;
      res.detail = "Theta Phi != Phi Theta in degree " + std::to_string(t);
    }
  MonodromyBlock Mu = monodromy_block(n, r, up, k, seed), Md = monodromy_block(n, r, dn, kp, seed);
  PresentedComplex su = block_complex(Tu.s0, Rup), sd = block_complex(Td.s0, Rdn);
  const int nq = static_cast<int>(std::min(Mu.N_conn.size(), Md.N_conn.size()));
  for (int q = 0; q < nq; ++q) {
    ModMatrix ph = induced_map(su, sd, P.s0[q], q);
    ModMatrix lhs = mat_mul(Md.N_conn[q], ph, Rdn), rhs = mat_mul(ph, Mu.N_conn[q], Rdn);
    if (!same_class_matrix(lhs, rhs, Md.h_s0[q], Rdn)) res.n_phi_commute = false;
    if (!same_class_matrix(lhs, mat_scale(rhs, Rdn.p(), Rdn), Md.h_s0[q], Rdn)) res.n_phi_p_twisted = false;
  }
  // restriction to level m at the same weight
  if (k.u() < dn.m()) {
    ThetaBlocks Tr = make_theta_blocks(n, r, dn, k);
    MonodromyBlock Mr = monodromy_block(n, r, dn, k, seed);
    PresentedComplex sr = block_complex(Tr.s0, Rdn);
    auto id = [](const Form& y) { return y; };
    const int nr = static_cast<int>(std::min(Mu.N_conn.size(), Mr.N_conn.size()));
    for (int q = 0; q < nr; ++q) {
      ModMatrix rho = block_operator(*Tu.s0.bases[q], *Tr.s0.bases[q], Tr.s0.annihilator, id);
      ModMatrix rs = induced_map(su, sr, rho, q);
      if (!same_class_matrix(mat_mul(Mr.N_conn[q], rs, Rdn), mat_mul(rs, Mu.N_conn[q], Rdn), Mr.h_s0[q], Rdn)) {
        res.n_restrict = false;
        res.detail = "N o restrict != restrict o N in degree " + std::to_string(q);
      }
    }
  }
  return res;
}

}  // namespace logdrw
