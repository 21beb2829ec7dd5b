#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "logdrw/witt_base.hpp"

namespace logdrw {

// ---------------------------------------------------------------------------
// Z/p^m

class ZpmRing {
 public:
  ZpmRing() = default;
  ZpmRing(i64 p, int m) : p_(p), m_(m), q_(ipow(p, m)) {
    if (!is_prime(p) || m < 1) throw std::invalid_argument("ZpmRing: need prime p and m >= 1");
  }
  explicit ZpmRing(const PrimeLevel& lv) : ZpmRing(lv.p(), lv.m()) {}

  i64 p() const { return p_; }
  int m() const { return m_; }
  i64 modulus() const { return q_; }

  i64 reduce(i64 x) const { return mod_reduce(x, q_); }
  i64 add(i64 a, i64 b) const { return reduce(a + b); }
  i64 sub(i64 a, i64 b) const { return reduce(a - b); }
  i64 mul(i64 a, i64 b) const { return mulmod(a, b, q_); }
  int val(i64 x) const { return vp(reduce(x), p_, m_); }
  i64 pow_p(int e) const { return e >= m_ ? 0 : ipow(p_, e); }
  i64 unit_inverse(i64 u) const { return inv_mod(u, q_); }
  // x = p^v * u with v = val(x) < m; returns u mod p^m (a unit)
  i64 unit_part(i64 x) const {
    x = reduce(x);
    while (x % p_ == 0) x /= p_;
    return x;
  }

 private:
  i64 p_ = 2;
  int m_ = 1;
  i64 q_ = 2;
};

// ---------------------------------------------------------------------------
// dense matrices over Z/p^m

struct ModMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<i64> a;

  ModMatrix() = default;
  ModMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0) {}

  static ModMatrix identity(int n) {
    ModMatrix I(n, n);
    for (int i = 0; i < n; ++i) I(i, i) = 1;
    return I;
  }

  i64& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  i64 operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  bool is_zero() const {
    return std::all_of(a.begin(), a.end(), [](i64 x) { return x == 0; });
  }
  bool operator==(const ModMatrix& o) const { return rows == o.rows && cols == o.cols && a == o.a; }

  std::vector<i64> column(int c) const {
    std::vector<i64> v(rows);
    for (int r = 0; r < rows; ++r) v[r] = (*this)(r, c);
    return v;
  }
};

inline ModMatrix mat_mul(const ModMatrix& A, const ModMatrix& B, const ZpmRing& R) {
  if (A.cols != B.rows) throw std::invalid_argument("mat_mul: shape mismatch");
  ModMatrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      i64 x = A(i, k);
      if (x == 0) continue;
      for (int j = 0; j < B.cols; ++j) C(i, j) = R.add(C(i, j), R.mul(x, B(k, j)));
    }
  return C;
}

inline ModMatrix mat_add(const ModMatrix& A, const ModMatrix& B, const ZpmRing& R) {
  if (A.rows != B.rows || A.cols != B.cols) throw std::invalid_argument("mat_add: shape mismatch");
  ModMatrix C(A.rows, A.cols);
  for (std::size_t i = 0; i < A.a.size(); ++i) C.a[i] = R.add(A.a[i], B.a[i]);
  return C;
}

inline ModMatrix mat_scale(const ModMatrix& A, i64 s, const ZpmRing& R) {
  ModMatrix C = A;
  for (auto& x : C.a) x = R.mul(x, s);
  return C;
}

inline std::vector<i64> mat_vec(const ModMatrix& A, const std::vector<i64>& v, const ZpmRing& R) {
  std::vector<i64> out(A.rows, 0);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j)
      if (A(i, j) != 0 && v[j] != 0) out[i] = R.add(out[i], R.mul(A(i, j), v[j]));
  return out;
}

inline ModMatrix hconcat(const ModMatrix& A, const ModMatrix& B) {
  if (A.rows != B.rows) throw std::invalid_argument("hconcat: row mismatch");
  ModMatrix C(A.rows, A.cols + B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) C(i, j) = A(i, j);
    for (int j = 0; j < B.cols; ++j) C(i, A.cols + j) = B(i, j);
  }
  return C;
}

// ---------------------------------------------------------------------------
// Smith normal form: U * A * W = diag(p^{e_0}, ..., p^{e_{k-1}}), k = min(rows, cols),
// with e_i = m encoding a zero diagonal entry. Exponents are non-decreasing.

struct SmithForm {
  ModMatrix U, Uinv, W, Winv;
  std::vector<int> exps;
  int rank = 0;  // number of nonzero diagonal entries
};

inline SmithForm smith_normal_form(const ModMatrix& A0, const ZpmRing& R) {
  const int nr = A0.rows, nc = A0.cols;
  SmithForm S;
  ModMatrix A = A0;
  for (auto& x : A.a) x = R.reduce(x);
  S.U = ModMatrix::identity(nr);
  S.Uinv = ModMatrix::identity(nr);
  S.W = ModMatrix::identity(nc);
  S.Winv = ModMatrix::identity(nc);
  const int k = std::min(nr, nc);
  S.exps.assign(k, R.m());

  auto swap_rows = [&](int i, int j) {
    if (i == j) return;
    for (int c = 0; c < nc; ++c) std::swap(A(i, c), A(j, c));
    for (int c = 0; c < nr; ++c) std::swap(S.U(i, c), S.U(j, c));
    for (int r = 0; r < nr; ++r) std::swap(S.Uinv(r, i), S.Uinv(r, j));
  };
  auto swap_cols = [&](int i, int j) {
    if (i == j) return;
    for (int r = 0; r < nr; ++r) std::swap(A(r, i), A(r, j));
    for (int r = 0; r < nc; ++r) std::swap(S.W(r, i), S.W(r, j));
    for (int c = 0; c < nc; ++c) std::swap(S.Winv(i, c), S.Winv(j, c));
  };
  auto scale_row = [&](int i, i64 u) {  // u a unit
    i64 ui = R.unit_inverse(u);
    for (int c = 0; c < nc; ++c) A(i, c) = R.mul(A(i, c), u);
    for (int c = 0; c < nr; ++c) S.U(i, c) = R.mul(S.U(i, c), u);
    for (int r = 0; r < nr; ++r) S.Uinv(r, i) = R.mul(S.Uinv(r, i), ui);
  };
  // row_i += f * row_t
  auto add_row = [&](int i, int t, i64 f) {
    if (f == 0) return;
    for (int c = 0; c < nc; ++c) A(i, c) = R.add(A(i, c), R.mul(f, A(t, c)));
    for (int c = 0; c < nr; ++c) S.U(i, c) = R.add(S.U(i, c), R.mul(f, S.U(t, c)));
    for (int r = 0; r < nr; ++r) S.Uinv(r, t) = R.sub(S.Uinv(r, t), R.mul(f, S.Uinv(r, i)));
  };
  // col_j += f * col_t
  auto add_col = [&](int j, int t, i64 f) {
    if (f == 0) return;
    for (int r = 0; r < nr; ++r) A(r, j) = R.add(A(r, j), R.mul(f, A(r, t)));
    for (int r = 0; r < nc; ++r) S.W(r, j) = R.add(S.W(r, j), R.mul(f, S.W(r, t)));
    for (int c = 0; c < nc; ++c) S.Winv(t, c) = R.sub(S.Winv(t, c), R.mul(f, S.Winv(j, c)));
  };

  for (int t = 0; t < k; ++t) {
    int best = R.m(), bi = -1, bj = -1;
    for (int i = t; i < nr; ++i)
      for (int j = t; j < nc; ++j) {
        int v = R.val(A(i, j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0) break;
    swap_rows(t, bi);
    swap_cols(t, bj);
    scale_row(t, R.unit_inverse(R.unit_part(A(t, t))));
    const i64 pv = R.pow_p(best);
    for (int i = t + 1; i < nr; ++i) {
      i64 x = A(i, t);
      if (x != 0) add_row(i, t, R.reduce(-(x / pv)));
    }
    for (int j = t + 1; j < nc; ++j) {
      i64 x = A(t, j);
      if (x != 0) add_col(j, t, R.reduce(-(x / pv)));
    }
    S.exps[t] = best;
    ++S.rank;
  }
  return S;
}

inline ModMatrix smith_diagonal(const SmithForm& S, int rows, int cols, const ZpmRing& R) {
  ModMatrix D(rows, cols);
  for (std::size_t i = 0; i < S.exps.size(); ++i) D(static_cast<int>(i), static_cast<int>(i)) = R.pow_p(S.exps[i]);
  return D;
}

// ---------------------------------------------------------------------------
// presented modules and complexes

struct PresentedModule {
  std::vector<int> exps;  // generator i has annihilator p^{exps[i]}, 1 <= exps[i] <= m

  int size() const { return static_cast<int>(exps.size()); }
  int length() const {
    int s = 0;
    for (int e : exps) s += e;
    return s;
  }
};

inline void reduce_into(std::vector<i64>& v, const PresentedModule& M, const ZpmRing& R) {
  for (int i = 0; i < M.size(); ++i) v[i] = mod_reduce(R.reduce(v[i]), ipow(R.p(), M.exps[i]));
}

// rows scaled so that the target relations become p^m: row j times p^{m - b_j}
inline ModMatrix scale_rows_to_full(const ModMatrix& A, const PresentedModule& target, const ZpmRing& R) {
  ModMatrix B = A;
  for (int i = 0; i < A.rows; ++i) {
    i64 s = R.pow_p(R.m() - target.exps[i]);
    for (int j = 0; j < A.cols; ++j) B(i, j) = R.mul(B(i, j), s);
  }
  return B;
}

// check that A defines a homomorphism src -> dst
inline bool is_module_map(const ModMatrix& A, const PresentedModule& src, const PresentedModule& dst, const ZpmRing& R) {
  if (A.rows != dst.size() || A.cols != src.size()) return false;
  for (int j = 0; j < A.cols; ++j)
    for (int i = 0; i < A.rows; ++i) {
      // p^{a_j} * A(i,j) must vanish mod p^{b_i}
      i64 x = R.mul(A(i, j), R.pow_p(src.exps[j]));
      if (x % ipow(R.p(), dst.exps[i]) != 0) return false;
    }
  return true;
}

// the composite is zero as a map src -> dst
inline bool is_zero_map(const ModMatrix& A, const PresentedModule& dst, const ZpmRing& R) {
  for (int i = 0; i < A.rows; ++i) {
    i64 q = ipow(R.p(), dst.exps[i]);
    for (int j = 0; j < A.cols; ++j)
      if (R.reduce(A(i, j)) % q != 0) return false;
  }
  return true;
}

// length of the submodule of `M` generated by the columns of G
inline int submodule_length(const ModMatrix& G, const PresentedModule& M, const ZpmRing& R) {
  if (G.cols == 0 || G.rows == 0) return 0;
  SmithForm S = smith_normal_form(scale_rows_to_full(G, M, R), R);
  int len = 0;
  for (int e : S.exps) len += R.m() - e;
  return len;
}

struct PresentedComplex {
  ZpmRing ring;
  int start_degree = 0;
  std::vector<PresentedModule> modules;  // degrees start_degree, start_degree+1, ...
  std::vector<ModMatrix> d;              // d[q]: modules[q] -> modules[q+1], size modules.size()-1

  int top() const { return static_cast<int>(modules.size()); }

  void validate() const {
    if (modules.empty()) return;
    if (d.size() + 1 != modules.size()) throw std::invalid_argument("PresentedComplex: need one differential per adjacent pair");
    for (std::size_t q = 0; q < d.size(); ++q)
      if (!is_module_map(d[q], modules[q], modules[q + 1], ring))
        throw std::invalid_argument("PresentedComplex: differential " + std::to_string(q) + " does not respect annihilators");
    for (std::size_t q = 0; q + 1 < d.size(); ++q)
      if (!is_zero_map(mat_mul(d[q + 1], d[q], ring), modules[q + 2], ring))
        throw std::invalid_argument("PresentedComplex: non-complex input (d" + std::to_string(q + 1) + " o d" +
                                    std::to_string(q) + " != 0)");
  }
};

// outgoing differential of degree q (zero map when absent)
inline ModMatrix complex_d(const PresentedComplex& C, int q) {
  const int nq = q < 0 || q >= C.top() ? 0 : C.modules[q].size();
  const int nq1 = q + 1 < 0 || q + 1 >= C.top() ? 0 : C.modules[q + 1].size();
  if (q >= 0 && q < static_cast<int>(C.d.size())) return C.d[q];
  return ModMatrix(nq1, nq);
}

inline PresentedModule complex_module(const PresentedComplex& C, int q) {
  if (q < 0 || q >= C.top()) return {};
  return C.modules[q];
}

// H^q with explicit cocycle generators and a classification map
struct CohomologyGroup {
  int degree = 0;
  std::vector<int> invariant_factors;  // exponent of each cyclic summand, as found (non-decreasing order of SNF)
  std::vector<std::vector<i64>> generators;  // cocycle representatives in the ambient lift R^g
  // data for classification
  ModMatrix Winv;          // kernel coordinates
  std::vector<int> t;      // cocycle y-coordinate i lies in p^{t_i} R
  ModMatrix U2;            // class coordinates from c-coordinates
  std::vector<int> slots;  // which rows of U2 carry the summands

  int length() const {
    int s = 0;
    for (int e : invariant_factors) s += e;
    return s;
  }
  std::vector<int> sorted_factors() const {
    std::vector<int> v = invariant_factors;
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
  }
  int count_full(int m) const { return static_cast<int>(std::count(invariant_factors.begin(), invariant_factors.end(), m)); }
};

// class coordinates of a cocycle x (ambient lift) in H^q
inline std::vector<i64> classify(const CohomologyGroup& H, const std::vector<i64>& x, const ZpmRing& R) {
  std::vector<i64> y = mat_vec(H.Winv, x, R);
  std::vector<i64> c(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    i64 pt = ipow(R.p(), H.t[i]);
    if (H.t[i] >= R.m()) {
      c[i] = 0;
      continue;
    }
    if (y[i] % pt != 0) throw std::invalid_argument("classify: element is not a cocycle");
    c[i] = y[i] / pt;
  }
  std::vector<i64> z = mat_vec(H.U2, c, R);
  std::vector<i64> out;
  for (std::size_t s = 0; s < H.slots.size(); ++s)
    out.push_back(mod_reduce(z[H.slots[s]], ipow(R.p(), H.invariant_factors[s])));
  return out;
}

inline CohomologyGroup cohomology_at(const PresentedComplex& C, int q) {
  const ZpmRing& R = C.ring;
  const int m = R.m();
  PresentedModule M = complex_module(C, q);
  PresentedModule Mn = complex_module(C, q + 1);
  const int g = M.size();
  CohomologyGroup H;
  H.degree = q + C.start_degree;
  if (g == 0) {
    H.Winv = ModMatrix(0, 0);
    H.U2 = ModMatrix(0, 0);
    return H;
  }
  // cocycles: kernel of R^g -> (+) R/p^{b_j}
  ModMatrix Dh = scale_rows_to_full(complex_d(C, q), Mn, R);
  SmithForm S = smith_normal_form(Dh, R);
  std::vector<int> t(g, 0);
  for (int i = 0; i < g; ++i) t[i] = i < static_cast<int>(S.exps.size()) ? m - S.exps[i] : 0;
  // coboundaries plus module relations, in kernel coordinates
  ModMatrix Dp = complex_d(C, q - 1);
  ModMatrix rel(g, g);
  for (int i = 0; i < g; ++i) rel(i, i) = R.pow_p(M.exps[i]);
  ModMatrix B = Dp.cols > 0 ? hconcat(Dp, rel) : rel;
  ModMatrix Bw = mat_mul(S.Winv, B, R);
  ModMatrix Cm(g, Bw.cols + g);
  for (int i = 0; i < g; ++i) {
    i64 pt = ipow(R.p(), t[i]);
    for (int j = 0; j < Bw.cols; ++j) {
      i64 x = Bw(i, j);
      if (t[i] >= m) {
        Cm(i, j) = 0;
        continue;
      }
      if (x % pt != 0) throw std::logic_error("cohomology: coboundary outside cocycles");
      Cm(i, j) = x / pt;
    }
    Cm(i, Bw.cols + i) = R.pow_p(m - t[i]);
  }
  SmithForm S2 = smith_normal_form(Cm, R);
  H.Winv = S.Winv;
  H.t = t;
  H.U2 = S2.U;
  for (int i = 0; i < g; ++i) {
    int e = S2.exps[i];  // Cm has g rows and >= g columns
    if (e == 0) continue;
    H.invariant_factors.push_back(e);
    H.slots.push_back(i);
    // generator: c = U2^{-1} e_i, cocycle = W * diag(p^t) * c
    std::vector<i64> c = S2.Uinv.column(i);
    for (int r = 0; r < g; ++r) c[r] = R.mul(c[r], R.pow_p(t[r]));
    H.generators.push_back(mat_vec(S.W, c, R));
  }
  return H;
}

inline std::vector<CohomologyGroup> cohomology(const PresentedComplex& C) {
  C.validate();
  std::vector<CohomologyGroup> out;
  for (int q = 0; q < C.top(); ++q) out.push_back(cohomology_at(C, q));
  return out;
}

// ---------------------------------------------------------------------------
// exactness of A -f-> B -g-> C at B

struct ExactnessReport {
  bool exact = false;
  bool injective_f = false;
  bool surjective_g = false;
  int kernel_length = 0;  // length of ker g
  int image_length = 0;   // length of im f
  int defect = 0;         // kernel_length - image_length
};

inline ExactnessReport exactness_check(const ModMatrix& f, const ModMatrix& g, const PresentedModule& A,
                                       const PresentedModule& B, const PresentedModule& Cm, const ZpmRing& R) {
  if (f.rows != B.size() || f.cols != A.size() || g.rows != Cm.size() || g.cols != B.size())
    throw std::invalid_argument("exactness_check: shape mismatch");
  if (!is_zero_map(mat_mul(g, f, R), Cm, R)) throw std::invalid_argument("exactness_check: composite g o f is nonzero");
  ExactnessReport rep;
  rep.image_length = submodule_length(f, B, R);
  int img_g = submodule_length(g, Cm, R);
  rep.kernel_length = B.length() - img_g;
  rep.defect = rep.kernel_length - rep.image_length;
  rep.exact = rep.defect == 0;
  rep.injective_f = rep.image_length == A.length();
  rep.surjective_g = img_g == Cm.length();
  return rep;
}

// ---------------------------------------------------------------------------
// solving A x = y in a presented target module

// Returns x with A x == y in (+) R/p^{b_i}, or nullopt when y is not in the image.
// `free_choice` supplies values for the undetermined kernel coordinates (default zero).
inline std::optional<std::vector<i64>> solve_in_module(const ModMatrix& A, const std::vector<i64>& y,
                                                       const PresentedModule& target, const ZpmRing& R,
                                                       std::mt19937_64* rng = nullptr) {
  ModMatrix Ah = scale_rows_to_full(A, target, R);
  std::vector<i64> yh(y.size());
  for (int i = 0; i < target.size(); ++i) yh[i] = R.mul(y[i], R.pow_p(R.m() - target.exps[i]));
  SmithForm S = smith_normal_form(Ah, R);
  std::vector<i64> uy = mat_vec(S.U, yh, R);
  std::vector<i64> z(A.cols, 0);
  for (int i = 0; i < A.rows; ++i) {
    int e = i < static_cast<int>(S.exps.size()) ? S.exps[i] : R.m();
    if (e >= R.m()) {
      if (uy[i] != 0) return std::nullopt;
      if (i < A.cols && rng) z[i] = static_cast<i64>((*rng)() % static_cast<std::uint64_t>(R.modulus()));
      continue;
    }
    i64 pe = ipow(R.p(), e);
    if (uy[i] % pe != 0) return std::nullopt;
    z[i] = uy[i] / pe;
    if (rng) z[i] = R.add(z[i], R.mul(ipow(R.p(), R.m() - e), static_cast<i64>((*rng)() % static_cast<std::uint64_t>(R.modulus()))));
  }
  for (int i = A.rows; i < A.cols; ++i)
    if (rng) z[i] = static_cast<i64>((*rng)() % static_cast<std::uint64_t>(R.modulus()));
  return mat_vec(S.W, z, R);
}

// ---------------------------------------------------------------------------
// short exact sequences of complexes and connecting homomorphisms

struct ShortExactSequence {
  PresentedComplex A, B, C;
  std::vector<ModMatrix> f;  // f[q]: A^q -> B^q
  std::vector<ModMatrix> g;  // g[q]: B^q -> C^q
};

inline ModMatrix chain_component(const std::vector<ModMatrix>& maps, int q, int rows, int cols) {
  if (q >= 0 && q < static_cast<int>(maps.size())) return maps[q];
  return ModMatrix(rows, cols);
}

// degreewise exactness of 0 -> A -> B -> C -> 0 and chain-map property
inline bool ses_is_exact(const ShortExactSequence& ses, std::string* why = nullptr) {
  const ZpmRing& R = ses.B.ring;
  const int top = std::max({ses.A.top(), ses.B.top(), ses.C.top()});
  for (int q = 0; q < top; ++q) {
    PresentedModule A = complex_module(ses.A, q), B = complex_module(ses.B, q), Cm = complex_module(ses.C, q);
    ModMatrix f = chain_component(ses.f, q, B.size(), A.size());
    ModMatrix g = chain_component(ses.g, q, Cm.size(), B.size());
    ExactnessReport rep = exactness_check(f, g, A, B, Cm, R);
    if (!rep.exact || !rep.injective_f || !rep.surjective_g) {
      if (why) *why = "degree " + std::to_string(q) + " not exact (defect " + std::to_string(rep.defect) + ")";
      return false;
    }
    PresentedModule B1 = complex_module(ses.B, q + 1), C1 = complex_module(ses.C, q + 1), A1 = complex_module(ses.A, q + 1);
    ModMatrix f1 = chain_component(ses.f, q + 1, B1.size(), A1.size());
    ModMatrix g1 = chain_component(ses.g, q + 1, C1.size(), B1.size());
    ModMatrix lf = mat_add(mat_mul(f1, complex_d(ses.A, q), R), mat_scale(mat_mul(complex_d(ses.B, q), f, R), -1, R), R);
    ModMatrix lg = mat_add(mat_mul(g1, complex_d(ses.B, q), R), mat_scale(mat_mul(complex_d(ses.C, q), g, R), -1, R), R);
    if (!is_zero_map(lf, B1, R) || !is_zero_map(lg, C1, R)) {
      if (why) *why = "degree " + std::to_string(q) + ": maps do not commute with d";
      return false;
    }
  }
  return true;
}

enum class LiftStrategy { Canonical, Randomized };

// matrix H^q(C) -> H^{q+1}(A) in the generator coordinates of cohomology()
inline ModMatrix connecting_hom(const ShortExactSequence& ses, int q, LiftStrategy strategy = LiftStrategy::Canonical,
                                std::uint64_t seed = 0) {
  const ZpmRing& R = ses.B.ring;
  std::string why;
  if (!ses_is_exact(ses, &why)) throw std::invalid_argument("connecting_hom: SES not exact: " + why);
  CohomologyGroup HC = cohomology_at(ses.C, q);
  CohomologyGroup HA = cohomology_at(ses.A, q + 1);
  ModMatrix out(static_cast<int>(HA.invariant_factors.size()), static_cast<int>(HC.invariant_factors.size()));
  if (HC.invariant_factors.empty() || HA.invariant_factors.empty()) return out;
  std::mt19937_64 rng(seed);
  std::mt19937_64* rp = strategy == LiftStrategy::Randomized ? &rng : nullptr;
  PresentedModule Bq = complex_module(ses.B, q), Cq = complex_module(ses.C, q);
  PresentedModule Bq1 = complex_module(ses.B, q + 1), Aq1 = complex_module(ses.A, q + 1);
  ModMatrix g = chain_component(ses.g, q, Cq.size(), Bq.size());
  ModMatrix f1 = chain_component(ses.f, q + 1, Bq1.size(), Aq1.size());
  ModMatrix dB = complex_d(ses.B, q);
  for (std::size_t j = 0; j < HC.generators.size(); ++j) {
    auto x = solve_in_module(g, HC.generators[j], Cq, R, rp);
    if (!x) throw std::logic_error("connecting_hom: g not surjective");
    std::vector<i64> y = mat_vec(dB, *x, R);
    auto a = solve_in_module(f1, y, Bq1, R, rp);
    if (!a) throw std::logic_error("connecting_hom: d(lift) not in the image of f");
    std::vector<i64> cls = classify(HA, *a, R);
    for (std::size_t i = 0; i < cls.size(); ++i) out(static_cast<int>(i), static_cast<int>(j)) = cls[i];
  }
  return out;
}

// induced map on cohomology of a chain map phi: X -> Y at degree q
inline ModMatrix induced_map(const PresentedComplex& X, const PresentedComplex& Y, const ModMatrix& phi, int q) {
  const ZpmRing& R = Y.ring;
  CohomologyGroup HX = cohomology_at(X, q), HY = cohomology_at(Y, q);
  ModMatrix out(static_cast<int>(HY.invariant_factors.size()), static_cast<int>(HX.invariant_factors.size()));
  for (std::size_t j = 0; j < HX.generators.size(); ++j) {
    std::vector<i64> y = mat_vec(phi, HX.generators[j], R);
    std::vector<i64> cls = classify(HY, y, R);
    for (std::size_t i = 0; i < cls.size(); ++i) out(static_cast<int>(i), static_cast<int>(j)) = cls[i];
  }
  return out;
}

// reduce entries of a matrix into the target module (row i mod p^{b_i})
inline ModMatrix reduce_rows(const ModMatrix& A, const PresentedModule& target, const ZpmRing& R) {
  ModMatrix B = A;
  for (int i = 0; i < B.rows; ++i) {
    i64 q = ipow(R.p(), target.exps[i]);
    for (int j = 0; j < B.cols; ++j) B(i, j) = mod_reduce(R.reduce(B(i, j)), q);
  }
  return B;
}

// maps between cohomology groups compared in class coordinates
inline bool same_class_matrix(const ModMatrix& A, const ModMatrix& B, const std::vector<int>& target_factors, const ZpmRing& R) {
  if (A.rows != B.rows || A.cols != B.cols) return false;
  for (int i = 0; i < A.rows; ++i) {
    i64 q = ipow(R.p(), target_factors[i]);
    for (int j = 0; j < A.cols; ++j)
      if (mod_reduce(A(i, j) - B(i, j), q) != 0) return false;
  }
  return true;
}

}  // namespace logdrw
