#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "logdrw/drw_core.hpp"
#include "logdrw/exact_homology.hpp"

namespace logdrw {

inline Form form_theta(const BaseSpec& base) {
  Form t;
  for (int i = 0; i < base.r; ++i) t.push_back({Mask{1} << i, 1});
  return t;
}

// theta_m = dlog[T_1] + ... + dlog[T_r]
inline DRWElement theta(const PrimeLevel& lv, const BaseSpec& base) {
  return assemble(lv, base, 1, {{Weight::zero(base.n, lv.p()), form_theta(base)}});
}

inline DRWElement lambda_project(const DRWElement& x) {
  if (x.base().flavor != Flavor::PolyTrivialBase) throw std::invalid_argument("lambda_project: expects a PolyTrivialBase element");
  return change_flavor(x, Flavor::QuotientTrivialBase);
}

inline DRWElement project_to_S0(const DRWElement& x) {
  if (x.base().flavor != Flavor::QuotientTrivialBase) throw std::invalid_argument("project_to_S0: expects a QuotientTrivialBase element");
  return change_flavor(x, Flavor::QuotientLogPoint);
}

// x ^ theta in the tilde complex; S0 elements are lifted along their basis first
inline DRWElement theta_wedge(const DRWElement& x) {
  if (x.base().flavor == Flavor::PolyTrivialBase) throw std::invalid_argument("theta_wedge: expects a quotient-flavor element");
  const BaseSpec tilde = x.base().with_flavor(Flavor::QuotientTrivialBase);
  Form th = form_theta(tilde);
  return map_forms(x, x.level(), tilde, x.degree() + 1,
                   [&](const Weight& k, const Form& y) { return std::make_pair(k, form_wedge(y, th)); });
}

// ---------------------------------------------------------------------------
// theta short exact sequence 0 -> Lambda_S0[-1] -> Lambda~ -> Lambda_S0 -> 0, per weight block

struct ThetaBlocks {
  WeightBlock tilde, s0;
};

inline ThetaBlocks make_theta_blocks(int n, int r, const PrimeLevel& lv, const Weight& k) {
  return {make_weight_block(BaseSpec(n, r, Flavor::QuotientTrivialBase), lv, k),
          make_weight_block(BaseSpec(n, r, Flavor::QuotientLogPoint), lv, k)};
}

// wedge with theta: S0 degree q-1 -> tilde degree q
inline ModMatrix theta_matrix(const WeightBlock& s0, const WeightBlock& tilde, int q) {
  if (q < 1 || q >= static_cast<int>(tilde.bases.size())) return ModMatrix(tilde.dim(q), s0.dim(q - 1));
  Form th = form_theta(tilde.bases[0]->base);
  return block_operator(*s0.bases[q - 1], *tilde.bases[q], tilde.annihilator, [&](const Form& y) { return form_wedge(y, th); });
}

// projection tilde degree q -> S0 degree q
inline ModMatrix projection_matrix(const WeightBlock& tilde, const WeightBlock& s0, int q) {
  return block_operator(*tilde.bases[q], *s0.bases[q], s0.annihilator, [](const Form& y) { return y; });
}

inline PresentedComplex shifted_complex(const WeightBlock& W, const ZpmRing& R) {
  PresentedComplex A;
  A.ring = R;
  const int top = static_cast<int>(W.bases.size());
  A.modules.push_back(PresentedModule{});
  for (int q = 0; q < top; ++q) A.modules.push_back(PresentedModule{std::vector<int>(W.dim(q), W.annihilator)});
  A.d.push_back(ModMatrix(W.dim(0), 0));
  for (int q = 0; q + 1 < top; ++q) A.d.push_back(W.d[q]);
  return A;
}

// drop the last module so that the shifted complex has the same length as the others
inline void truncate_complex(PresentedComplex& C, int len) {
  while (C.top() > len) {
    C.modules.pop_back();
    if (!C.d.empty()) C.d.pop_back();
  }
}

inline ShortExactSequence theta_ses(const ThetaBlocks& T, const ZpmRing& R) {
  ShortExactSequence s;
  s.B = block_complex(T.tilde, R);
  s.C = block_complex(T.s0, R);
  s.A = shifted_complex(T.s0, R);
  truncate_complex(s.A, s.B.top());
  for (int q = 0; q < s.B.top(); ++q) {
    s.f.push_back(q == 0 ? ModMatrix(T.tilde.dim(0), 0) : theta_matrix(T.s0, T.tilde, q));
    s.g.push_back(projection_matrix(T.tilde, T.s0, q));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Fil^s W_m Lambda^q = V^s W_{m-s} Lambda^q + dV^s W_{m-s} Lambda^{q-1}, per weight block

struct FilBlock {
  Weight weight;
  int s = 0;
  std::vector<ModMatrix> generators;  // per degree: columns are generators in the level-m block basis
};

inline FilBlock fil_block(int s, const BaseSpec& base, const PrimeLevel& lv, const Weight& k) {
  if (s < 0 || s > lv.m()) throw std::invalid_argument("fil: s out of range [0, m]");
  FilBlock F;
  F.weight = k;
  F.s = s;
  const int top = top_degree(base);
  const int a = lv.m() - k.u();
  Weight src = k;
  for (int t = 0; t < s; ++t) src = src.times_p();
  const int src_level = lv.m() - s;
  const bool has_src = src_level >= 1 && src.u() < src_level && base.admits(src);
  const i128 ps = ipow(lv.p(), s);
  for (int q = 0; q <= top; ++q) {
    auto dst = block_basis(base, k, q);
    std::vector<std::vector<i64>> cols;
    if (has_src) {
      auto b0 = block_basis(base, src, q);
      for (auto& v : b0->vectors) cols.push_back(normalize(*dst, form_scale(v, ps), a));
      if (q >= 1) {
        auto b1 = block_basis(base, src, q - 1);
        for (auto& v : b1->vectors) cols.push_back(normalize(*dst, form_d(k, form_scale(v, ps)), a));
      }
    }
    ModMatrix G(dst->size(), static_cast<int>(cols.size()));
    for (int j = 0; j < G.cols; ++j)
      for (int i = 0; i < G.rows; ++i) G(i, j) = cols[j][i];
    F.generators.push_back(G);
  }
  return F;
}

// is every column of X contained in the span of G inside (+) R/p^a
inline bool span_contains(const ModMatrix& G, const ModMatrix& X, const PresentedModule& M, const ZpmRing& R) {
  if (X.cols == 0) return true;
  return submodule_length(hconcat(G, X), M, R) == submodule_length(G, M, R);
}

inline bool span_equal(const ModMatrix& G, const ModMatrix& X, const PresentedModule& M, const ZpmRing& R) {
  int both = submodule_length(hconcat(G, X), M, R);
  return both == submodule_length(G, M, R) && both == submodule_length(X, M, R);
}

struct FilSesResult {
  bool exact = true;
  std::string detail;
};

// 0 -> Fil^m W_{m+1} -> W_{m+1} -> W_m -> 0 in block k (level lv_up = m+1)
inline FilSesResult fil_ses_block(const BaseSpec& base, const PrimeLevel& lv_up, const Weight& k) {
  FilSesResult res;
  const int m = lv_up.m() - 1;
  const ZpmRing R(lv_up);
  FilBlock F = fil_block(m, base, lv_up, k);
  const int top = top_degree(base);
  const int a_up = lv_up.m() - k.u();
  const int a_dn = m - k.u();
  for (int q = 0; q <= top; ++q) {
    auto B = block_basis(base, k, q);
    PresentedModule Mup{std::vector<int>(B->size(), a_up)};
    PresentedModule Mdn{a_dn > 0 ? std::vector<int>(B->size(), a_dn) : std::vector<int>{}};
    ModMatrix g(Mdn.size(), B->size());
    for (int i = 0; i < Mdn.size(); ++i) g(i, i) = 1;
    PresentedModule Gm{std::vector<int>(F.generators[q].cols, R.m())};
    ExactnessReport rep;
    try {
      rep = exactness_check(F.generators[q], g, Gm, Mup, Mdn, R);
    } catch (const std::exception& e) {
      res.exact = false;
      res.detail = "weight " + k.render() + " degree " + std::to_string(q) + ": " + e.what();
      return res;
    }
    if (!rep.exact || !rep.surjective_g) {
      res.exact = false;
      res.detail = "weight " + k.render() + " degree " + std::to_string(q) + " defect " + std::to_string(rep.defect);
      return res;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// integral / fractional split

struct IntFracSplit {
  std::vector<std::vector<int>> integral;    // per degree, global basis indices
  std::vector<std::vector<int>> fractional;  // per degree
};

inline IntFracSplit int_frac_split(const ComplexSlice& S) {
  IntFracSplit out;
  for (int q = 0; q <= S.top(); ++q) {
    out.integral.emplace_back();
    out.fractional.emplace_back();
    auto off = S.offsets(q);
    for (std::size_t b = 0; b < S.blocks.size(); ++b)
      for (int j = 0; j < S.blocks[b].dim(q); ++j)
        (S.blocks[b].weight.integral() ? out.integral : out.fractional).back().push_back(off[b] + j);
  }
  return out;
}

// chain-map check of a block-diagonal map between blocks of the same weight
inline bool commutes_with_d(const WeightBlock& src, const WeightBlock& dst, const std::vector<ModMatrix>& phi, const ZpmRing& R) {
  const int top = static_cast<int>(src.bases.size());
  for (int q = 0; q + 1 < top; ++q) {
    ModMatrix lhs = mat_mul(phi[q + 1], src.d[q], R);
    ModMatrix rhs = mat_mul(dst.d[q], phi[q], R);
    PresentedModule M{std::vector<int>(dst.dim(q + 1), dst.annihilator)};
    if (!is_zero_map(mat_add(lhs, mat_scale(rhs, -1, R), R), M, R)) return false;
  }
  return true;
}

inline bool is_surjective(const ModMatrix& phi, int dst_annihilator, const ZpmRing& R) {
  PresentedModule M{std::vector<int>(phi.rows, dst_annihilator)};
  return submodule_length(phi, M, R) == M.length();
}

}  // namespace logdrw
