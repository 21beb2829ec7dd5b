#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "logdrw/exact_homology.hpp"
#include "logdrw/witt_base.hpp"

namespace logdrw {

// ---------------------------------------------------------------------------
// Forms in the dlog lattice: integer combinations of e_J = dlog T_{j1} ^ ... ^ dlog T_{jq}.
// An element of weight k is T^k times such a form; it is integral when the form
// and kappa ^ form have integer coefficients, kappa = sum_i k(i) e_i.

struct FormTerm {
  Mask mask;
  i128 c;
};
using Form = std::vector<FormTerm>;  // sorted by mask, no zero coefficients

inline i128 checked_add(i128 a, i128 b) {
  i128 r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("form coefficient overflow");
  return r;
}
inline i128 checked_mul(i128 a, i128 b) {
  i128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("form coefficient overflow");
  return r;
}

// sign of e_a ^ e_b relative to e_{a|b}; 0 when a and b overlap
inline int wedge_sign(Mask a, Mask b) {
  if (a & b) return 0;
  int inv = 0;
  for (Mask x = a; x; x &= x - 1) {
    int i = std::countr_zero(x);
    inv += popcount(b & ((Mask{1} << i) - 1));
  }
  return (inv & 1) ? -1 : 1;
}

inline void form_add_term(Form& f, Mask m, i128 c) {
  if (c == 0) return;
  auto it = std::lower_bound(f.begin(), f.end(), m, [](const FormTerm& t, Mask x) { return t.mask < x; });
  if (it != f.end() && it->mask == m) {
    it->c = checked_add(it->c, c);
    if (it->c == 0) f.erase(it);
  } else {
    f.insert(it, FormTerm{m, c});
  }
}

inline void form_add(Form& acc, const Form& y, i128 s = 1) {
  for (auto& t : y) form_add_term(acc, t.mask, checked_mul(t.c, s));
}

inline Form form_scale(const Form& y, i128 s) {
  Form out;
  if (s == 0) return out;
  out.reserve(y.size());
  for (auto& t : y) out.push_back({t.mask, checked_mul(t.c, s)});
  return out;
}

inline Form form_wedge(const Form& x, const Form& y) {
  Form out;
  for (auto& a : x)
    for (auto& b : y) {
      int s = wedge_sign(a.mask, b.mask);
      if (s != 0) form_add_term(out, a.mask | b.mask, checked_mul(checked_mul(a.c, b.c), s));
    }
  return out;
}

inline Form form_unit() { return Form{{0, 1}}; }
inline Form form_e(int i) { return Form{{Mask{1} << i, 1}}; }

inline int form_degree(const Form& f, int fallback) { return f.empty() ? fallback : popcount(f.front().mask); }

// kappa' = p^{u} kappa as an integer 1-form
inline Form kappa_numerator(const Weight& k) {
  Form f;
  for (int i = 0; i < k.size(); ++i)
    if (k.numerators()[i] != 0) f.push_back({Mask{1} << i, k.numerators()[i]});
  return f;
}

// d(T^k y) = T^k kappa ^ y
inline Form form_d(const Weight& k, const Form& y) {
  Form w = form_wedge(kappa_numerator(k), y);
  const i128 pu = ipow(k.p(), k.u());
  for (auto& t : w) {
    if (t.c % pu != 0) throw std::logic_error("form_d: element is not integral");
    t.c /= pu;
  }
  return w;
}

// theta = 0: replace e_z by -(sum of the other divisor dlogs)
inline Form form_project_theta(const Form& y, int z, Mask divisor) {
  if (z < 0) return y;
  const Mask bz = Mask{1} << z;
  Form out;
  for (auto& t : y) {
    if (!(t.mask & bz)) {
      form_add_term(out, t.mask, t.c);
      continue;
    }
    Mask rest = t.mask & ~bz;
    int s0 = wedge_sign(bz, rest);  // e_J = s0 * e_z ^ e_rest
    for (Mask o = divisor & ~bz; o; o &= o - 1) {
      Mask bi = o & (~o + 1);
      int s1 = wedge_sign(bi, rest);
      if (s1 == 0) continue;
      form_add_term(out, bi | rest, checked_mul(t.c, -s0 * s1));
    }
  }
  return out;
}

inline std::string render_form(const Form& f) {
  std::ostringstream os;
  bool first = true;
  for (auto& t : f) {
    if (!first) os << " + ";
    first = false;
    os << static_cast<long long>(t.c) << "*e{";
    bool f2 = true;
    for (int i : mask_indices(t.mask)) {
      os << (f2 ? "" : ",") << i + 1;
      f2 = false;
    }
    os << '}';
  }
  return first ? "0" : os.str();
}

// ---------------------------------------------------------------------------
// Block bases: for a weight k and degree q, the canonical labels, their lattice
// vectors, and an exact inverse used to read coordinates of lattice elements.

struct BlockBasis {
  BaseSpec base;
  Weight weight;
  int degree = 0;
  Mask ambient = 0;
  std::vector<Partition> labels;
  std::vector<Form> vectors;
  std::vector<Mask> coords;  // q-subsets of `ambient`, ascending
  // coordinates c of y satisfy c = Ninv * y / (p^e * w), w prime to p
  std::vector<i128> ninv;    // dim x dim, row-major
  int den_p_exp = 0;
  i64 den_unit = 1;

  int size() const { return static_cast<int>(labels.size()); }
};

inline Form label_vector(const Weight& k, const Partition& P) {
  Form v = form_unit();
  if (!P.teich[0].empty() && k.u() > 0) v = form_scale(v, ipow(k.p(), k.u()));
  for (int j = 1; j <= P.rho(); ++j) {
    const auto& I = P.teich[j];
    int mv = std::numeric_limits<int>::max();
    for (int i : I) mv = std::min(mv, k.numerator_valuation(i));
    Form f;
    for (int i : I) f.push_back({Mask{1} << i, k.numerators()[i] / ipow(k.p(), mv)});
    std::sort(f.begin(), f.end(), [](const FormTerm& a, const FormTerm& b) { return a.mask < b.mask; });
    v = form_wedge(v, f);
  }
  for (auto& l : P.logs) {
    Form f;
    for (int i : l) f.push_back({Mask{1} << i, 1});
    std::sort(f.begin(), f.end(), [](const FormTerm& a, const FormTerm& b) { return a.mask < b.mask; });
    v = form_wedge(v, f);
  }
  return v;
}

inline std::vector<Mask> subsets_of_size(Mask ambient, int q) {
  std::vector<Mask> out;
  std::vector<int> idx = mask_indices(ambient);
  const int s = static_cast<int>(idx.size());
  if (q < 0 || q > s) return out;
  for (Mask sel = 0; sel < (Mask{1} << s); ++sel) {
    if (popcount(sel) != q) continue;
    Mask m = 0;
    for (int t = 0; t < s; ++t)
      if (sel >> t & 1u) m |= Mask{1} << idx[t];
    out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::shared_ptr<BlockBasis> make_block_basis(const BaseSpec& base, const Weight& k, int q) {
  auto B = std::make_shared<BlockBasis>();
  B->base = base;
  B->weight = k;
  B->degree = q;
  if (!base.admits(k)) return B;
  B->ambient = base.ambient_indices(k);
  B->labels = enumerate_partitions(k, base, q);
  B->coords = subsets_of_size(B->ambient, q);
  const int N = static_cast<int>(B->coords.size());
  if (static_cast<int>(B->labels.size()) != N)
    throw std::logic_error("block basis: label count does not match ambient rank");
  for (auto& P : B->labels) B->vectors.push_back(label_vector(k, P));
  if (N == 0) return B;
  // Gauss-Jordan over Q on [M | I], M(i, j) = coefficient of coords[i] in vectors[j]
  std::vector<mpq_class> M(static_cast<std::size_t>(N) * 2 * N);
  auto at = [&](int r, int c) -> mpq_class& { return M[static_cast<std::size_t>(r) * 2 * N + c]; };
  for (int j = 0; j < N; ++j)
    for (auto& t : B->vectors[j]) {
      auto it = std::lower_bound(B->coords.begin(), B->coords.end(), t.mask);
      if (it == B->coords.end() || *it != t.mask) throw std::logic_error("block basis: vector outside ambient");
      at(static_cast<int>(it - B->coords.begin()), j) = mpq_class(static_cast<long>(t.c));
    }
  for (int i = 0; i < N; ++i) at(i, N + i) = 1;
  for (int c = 0; c < N; ++c) {
    int piv = -1;
    for (int r = c; r < N; ++r)
      if (at(r, c) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) throw std::logic_error("block basis: labels are linearly dependent");
    if (piv != c)
      for (int j = 0; j < 2 * N; ++j) std::swap(at(piv, j), at(c, j));
    mpq_class inv = 1 / at(c, c);
    for (int j = 0; j < 2 * N; ++j) at(c, j) *= inv;
    for (int r = 0; r < N; ++r) {
      if (r == c || at(r, c) == 0) continue;
      mpq_class f = at(r, c);
      for (int j = 0; j < 2 * N; ++j) at(r, j) -= f * at(c, j);
    }
  }
  // common denominator
  mpz_class den = 1;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), at(i, N + j).get_den_mpz_t());
  mpz_class w = den;
  int e = 0;
  const mpz_class pz(static_cast<long>(k.p()));
  while (mpz_divisible_p(w.get_mpz_t(), pz.get_mpz_t())) {
    w /= pz;
    ++e;
  }
  if (!w.fits_slong_p()) throw std::overflow_error("block basis: denominator too large");
  B->den_p_exp = e;
  B->den_unit = w.get_si();
  B->ninv.resize(static_cast<std::size_t>(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      mpq_class x = at(i, N + j) * den;
      mpz_class z = x.get_num();
      if (!z.fits_slong_p()) throw std::overflow_error("block basis: inverse entry too large");
      B->ninv[static_cast<std::size_t>(i) * N + j] = z.get_si();
    }
  return B;
}

struct BlockKey {
  i64 p;
  int n, r;
  Flavor flavor;
  std::vector<i64> num;
  int den;
  int q;
  auto operator<=>(const BlockKey&) const = default;
};

class BlockCache {
 public:
  static BlockCache& instance() {
    static BlockCache c;
    return c;
  }
  std::shared_ptr<const BlockBasis> get(const BaseSpec& base, const Weight& k, int q) {
    BlockKey key{k.p(), base.n, base.r, base.flavor, k.numerators(), k.den_exp(), q};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    auto B = make_block_basis(base, k, q);
    std::lock_guard<std::mutex> lock(mu_);
    if (map_.size() >= kLimit) map_.clear();
    map_.emplace(std::move(key), B);
    return B;
  }
  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    map_.clear();
  }

 private:
  static constexpr std::size_t kLimit = 50000;
  std::mutex mu_;
  std::map<BlockKey, std::shared_ptr<const BlockBasis>> map_;
};

inline std::shared_ptr<const BlockBasis> block_basis(const BaseSpec& base, const Weight& k, int q) {
  return BlockCache::instance().get(base, k, q);
}

// lattice vector of a coordinate vector
inline Form lift(const BlockBasis& B, const std::vector<i64>& c) {
  Form y;
  for (int j = 0; j < B.size(); ++j)
    if (c[j] != 0) form_add(y, B.vectors[j], c[j]);
  return y;
}

// coordinates of a lattice element y (weight B.weight, tilde ambient) modulo p^a
inline std::vector<i64> normalize(const BlockBasis& B, const Form& y0, int a) {
  const int N = B.size();
  std::vector<i64> out(N, 0);
  if (N == 0 || a <= 0) {
    return out;
  }
  const Form* yp = &y0;
  Form proj;
  if (B.base.flavor == Flavor::QuotientLogPoint) {
    proj = form_project_theta(y0, B.base.eliminated_index(B.weight), B.base.divisor_mask());
    yp = &proj;
  }
  std::vector<i128> yv(N, 0);
  for (auto& t : *yp) {
    auto it = std::lower_bound(B.coords.begin(), B.coords.end(), t.mask);
    if (it == B.coords.end() || *it != t.mask) throw std::logic_error("normalize: form outside the block ambient");
    yv[it - B.coords.begin()] = t.c;
  }
  const i64 mod = ipow(B.weight.p(), a);
  const i128 pe = ipow(B.weight.p(), B.den_p_exp);
  const i64 winv = inv_mod(mod_reduce(B.den_unit, mod), mod);
  for (int i = 0; i < N; ++i) {
    i128 s = 0;
    for (int j = 0; j < N; ++j) {
      i128 x = B.ninv[static_cast<std::size_t>(i) * N + j];
      if (x != 0 && yv[j] != 0) s = checked_add(s, checked_mul(x, yv[j]));
    }
    if (s % pe != 0) throw std::logic_error("normalize: element is not in the lattice");
    out[i] = mulmod(mod_reduce128(s / pe, mod), winv, mod);
  }
  return out;
}

// ---------------------------------------------------------------------------
// elements

class DRWElement {
 public:
  using Blocks = std::map<Weight, std::vector<i64>>;

  DRWElement() = default;
  DRWElement(PrimeLevel lv, BaseSpec base, int degree) : level_(lv), base_(base), degree_(degree) {}

  const PrimeLevel& level() const { return level_; }
  const BaseSpec& base() const { return base_; }
  int degree() const { return degree_; }
  const Blocks& blocks() const { return blocks_; }
  bool is_zero() const { return blocks_.empty(); }

  // coordinates are reduced mod p^{m-u(k)}; zero blocks are dropped
  void set_block(const Weight& k, std::vector<i64> c) {
    const int a = level_.m() - k.u();
    bool nz = false;
    if (a > 0) {
      const i64 mod = ipow(level_.p(), a);
      for (auto& x : c) {
        x = mod_reduce(x, mod);
        nz = nz || x != 0;
      }
    }
    if (nz)
      blocks_[k] = std::move(c);
    else
      blocks_.erase(k);
  }

  std::vector<BasicTerm> terms() const {
    std::vector<BasicTerm> out;
    for (auto& [k, c] : blocks_) {
      auto B = block_basis(base_, k, degree_);
      const int a = level_.m() - k.u();
      for (int j = 0; j < B->size(); ++j) {
        if (c[j] == 0) continue;
        BasicTerm t;
        t.coeff = CoeffW(c[j], level_.with_level(a));
        t.weight = k;
        t.partition = B->labels[j];
        t.level = level_.m();
        t.degree = degree_;
        t.case_tag = case_tag_of(k, B->labels[j]);
        t.annihilator_exp = a;
        out.push_back(std::move(t));
      }
    }
    return out;
  }

  std::string render() const {
    auto ts = terms();
    if (ts.empty()) return "0";
    std::string s;
    for (std::size_t i = 0; i < ts.size(); ++i) s += (i ? " + " : "") + ts[i].render();
    return s;
  }

  bool operator==(const DRWElement& o) const {
    return level_ == o.level_ && base_ == o.base_ && degree_ == o.degree_ && blocks_ == o.blocks_;
  }

 private:
  PrimeLevel level_;
  BaseSpec base_;
  int degree_ = 0;
  Blocks blocks_;
};

inline void check_compatible(const DRWElement& x, const DRWElement& y) {
  if (!(x.level() == y.level()) || !(x.base() == y.base())) throw std::invalid_argument("incompatible elements (level or base)");
}

// Express a collection of weight-homogeneous lattice forms as an element.
inline DRWElement assemble(const PrimeLevel& lv, const BaseSpec& base, int degree, const std::map<Weight, Form>& forms) {
  DRWElement out(lv, base, degree);
  for (auto& [k, y] : forms) {
    if (y.empty() || k.u() >= lv.m() || !base.admits(k)) continue;
    auto B = block_basis(base, k, degree);
    out.set_block(k, normalize(*B, y, lv.m() - k.u()));
  }
  return out;
}

inline std::map<Weight, Form> lift_all(const DRWElement& x) {
  std::map<Weight, Form> out;
  for (auto& [k, c] : x.blocks()) out[k] = lift(*block_basis(x.base(), k, x.degree()), c);
  return out;
}

template <class Op>
DRWElement map_forms(const DRWElement& x, const PrimeLevel& lv, const BaseSpec& base, int degree, Op op) {
  std::map<Weight, Form> acc;
  for (auto& [k, c] : x.blocks()) {
    Form y = lift(*block_basis(x.base(), k, x.degree()), c);
    auto [k2, y2] = op(k, y);
    form_add(acc[k2], y2);
  }
  return assemble(lv, base, degree, acc);
}

inline DRWElement element_from_terms(const PrimeLevel& lv, const BaseSpec& base, int degree, const std::vector<RawTerm>& raw) {
  std::map<Weight, Form> acc;
  for (auto& r : raw) {
    check_weight_admissible(r.weight, lv, base);
    if (r.partition.degree() != degree) throw std::invalid_argument("raw term degree does not match");
    Form v = r.partition.teich.empty() ? Form{} : form_scale(label_vector(r.weight, r.partition), r.coeff);
    form_add(acc[r.weight], v);
  }
  return assemble(lv, base, degree, acc);
}

inline DRWElement element_from_term(const BasicTerm& t, const BaseSpec& base) {
  PrimeLevel lv(t.weight.p(), t.level);
  return element_from_terms(lv, base, t.degree, {RawTerm{t.coeff.value(), t.weight, t.partition}});
}

// basic constructors
inline DRWElement unit_element(const PrimeLevel& lv, const BaseSpec& base) {
  return assemble(lv, base, 0, {{Weight::zero(base.n, lv.p()), form_unit()}});
}
inline DRWElement constant(const PrimeLevel& lv, const BaseSpec& base, i64 c) {
  return assemble(lv, base, 0, {{Weight::zero(base.n, lv.p()), form_scale(form_unit(), c)}});
}
inline DRWElement teich_monomial(const PrimeLevel& lv, const BaseSpec& base, const std::vector<i64>& a) {
  if (static_cast<int>(a.size()) != base.n) throw std::invalid_argument("monomial exponent has wrong length");
  for (i64 x : a)
    if (x < 0) throw std::invalid_argument("monomial exponents must be nonnegative");
  return assemble(lv, base, 0, {{Weight::integral(a, lv.p()), form_unit()}});
}
inline DRWElement dlog_element(const PrimeLevel& lv, const BaseSpec& base, int i) {
  if (i < 1 || i > base.r) throw std::invalid_argument("dlog index out of range [1,r]");
  return assemble(lv, base, 1, {{Weight::zero(base.n, lv.p()), form_e(i - 1)}});
}
// d[T_i]
inline DRWElement dT_element(const PrimeLevel& lv, const BaseSpec& base, int i) {
  if (i < 1 || i > base.n) throw std::invalid_argument("variable index out of range");
  std::vector<i64> a(base.n, 0);
  a[i - 1] = 1;
  return assemble(lv, base, 1, {{Weight::integral(a, lv.p()), form_e(i - 1)}});
}

inline std::vector<BasicTerm> enumerate_basis(const BaseSpec& base, int q, const PrimeLevel& lv, i64 K);

// ---------------------------------------------------------------------------
// arithmetic and operators

inline DRWElement add(const DRWElement& x, const DRWElement& y) {
  check_compatible(x, y);
  if (x.degree() != y.degree()) throw std::invalid_argument("add: degree mismatch");
  DRWElement out = x;
  for (auto& [k, c] : y.blocks()) {
    std::vector<i64> s = c;
    auto it = x.blocks().find(k);
    if (it != x.blocks().end())
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += it->second[j];
    out.set_block(k, s);
  }
  return out;
}

inline DRWElement scale(const DRWElement& x, i64 s) {
  DRWElement out(x.level(), x.base(), x.degree());
  for (auto& [k, c] : x.blocks()) {
    std::vector<i64> v = c;
    const i64 mod = ipow(x.level().p(), x.level().m() - k.u());
    for (auto& e : v) e = mulmod(e, mod_reduce(s, mod), mod);
    out.set_block(k, v);
  }
  return out;
}

inline DRWElement neg(const DRWElement& x) { return scale(x, -1); }
inline DRWElement sub(const DRWElement& x, const DRWElement& y) { return add(x, neg(y)); }

inline DRWElement differential(const DRWElement& x) {
  return map_forms(x, x.level(), x.base(), x.degree() + 1,
                   [](const Weight& k, const Form& y) { return std::make_pair(k, form_d(k, y)); });
}

// F : level m+1 -> level m
inline DRWElement frobenius(const DRWElement& x) {
  if (x.level().m() < 2) throw std::invalid_argument("frobenius: source level must be >= 2");
  return map_forms(x, x.level().with_level(x.level().m() - 1), x.base(), x.degree(),
                   [](const Weight& k, const Form& y) { return std::make_pair(k.times_p(), y); });
}

// V : level m -> level m+1
inline DRWElement verschiebung(const DRWElement& x) {
  const i64 p = x.level().p();
  return map_forms(x, x.level().with_level(x.level().m() + 1), x.base(), x.degree(),
                   [p](const Weight& k, const Form& y) { return std::make_pair(k.divided_by_p(), form_scale(y, p)); });
}

// restriction : level m+1 -> level m
inline DRWElement restrict_level(const DRWElement& x) {
  if (x.level().m() < 2) throw std::invalid_argument("restrict: source level must be >= 2");
  return map_forms(x, x.level().with_level(x.level().m() - 1), x.base(), x.degree(),
                   [](const Weight& k, const Form& y) { return std::make_pair(k, y); });
}

inline DRWElement multiply(const DRWElement& x, const DRWElement& y) {
  check_compatible(x, y);
  std::map<Weight, Form> acc;
  auto lx = lift_all(x), ly = lift_all(y);
  for (auto& [a, fa] : lx)
    for (auto& [b, fb] : ly) form_add(acc[a + b], form_wedge(fa, fb));
  return assemble(x.level(), x.base(), x.degree() + y.degree(), acc);
}

inline DRWElement mul_teichmuller(const DRWElement& x, const std::vector<i64>& a) {
  return multiply(x, teich_monomial(x.level(), x.base(), a));
}

inline DRWElement wedge_dlog(const DRWElement& x, int i) {
  if (i < 1 || i > x.base().r) throw std::invalid_argument("wedge_dlog: index out of range [1,r]");
  return map_forms(x, x.level(), x.base(), x.degree() + 1,
                   [i](const Weight& k, const Form& y) { return std::make_pair(k, form_wedge(y, form_e(i - 1))); });
}

// re-express an element over another flavor of the same (n, r)
inline DRWElement change_flavor(const DRWElement& x, Flavor f) {
  return map_forms(x, x.level(), x.base().with_flavor(f), x.degree(),
                   [](const Weight& k, const Form& y) { return std::make_pair(k, y); });
}

// ---------------------------------------------------------------------------
// weights and basis enumeration

// all weights with u(k) <= m-1 and |k| <= K admitted by the base, in lexicographic order
inline void for_each_weight(const BaseSpec& base, const PrimeLevel& lv, i64 K, const std::function<void(const Weight&)>& fn) {
  const i64 D = ipow(lv.p(), lv.m() - 1);
  const i64 total = K * D;
  std::vector<i64> a(base.n, 0);
  std::function<void(int, i64)> rec = [&](int i, i64 left) {
    if (i == base.n) {
      Weight k(a, lv.m() - 1, lv.p());
      if (base.admits(k)) fn(k);
      return;
    }
    for (i64 x = 0; x <= left; ++x) {
      a[i] = x;
      rec(i + 1, left - x);
    }
    a[i] = 0;
  };
  rec(0, total);
}

inline std::vector<Weight> enumerate_weights(const BaseSpec& base, const PrimeLevel& lv, i64 K) {
  std::vector<Weight> out;
  for_each_weight(base, lv, K, [&](const Weight& k) { out.push_back(k); });
  return out;
}

inline std::vector<BasicTerm> enumerate_basis(const BaseSpec& base, int q, const PrimeLevel& lv, i64 K) {
  std::vector<BasicTerm> out;
  if (K < 0) return out;
  for_each_weight(base, lv, K, [&](const Weight& k) {
    const int a = lv.m() - k.u();
    for (auto& P : enumerate_partitions(k, base, q)) {
      BasicTerm t;
      t.coeff = CoeffW(1, lv.with_level(a));
      t.weight = k;
      t.partition = P;
      t.level = lv.m();
      t.degree = q;
      t.case_tag = case_tag_of(k, P);
      t.annihilator_exp = a;
      out.push_back(std::move(t));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// weight blocks of a slice

inline int top_degree(const BaseSpec& base) { return base.n; }

struct WeightBlock {
  Weight weight;
  int annihilator = 0;  // m - u(k)
  std::vector<std::shared_ptr<const BlockBasis>> bases;  // degrees 0..top
  std::vector<ModMatrix> d;                              // d[q]: degree q -> q+1, entries mod p^annihilator

  int dim(int q) const { return q < 0 || q >= static_cast<int>(bases.size()) ? 0 : bases[q]->size(); }
  int total_dim() const {
    int s = 0;
    for (auto& b : bases) s += b->size();
    return s;
  }
};

// matrix of an operator between blocks: columns = source basis, rows = target basis
template <class Op>
ModMatrix block_operator(const BlockBasis& src, const BlockBasis& dst, int dst_annihilator, Op op) {
  ModMatrix M(dst.size(), src.size());
  std::vector<i64> e(src.size(), 0);
  for (int j = 0; j < src.size(); ++j) {
    Form y = op(src.vectors[j]);
    std::vector<i64> c = normalize(dst, y, dst_annihilator);
    for (int i = 0; i < dst.size(); ++i) M(i, j) = c[i];
  }
  return M;
}

inline WeightBlock make_weight_block(const BaseSpec& base, const PrimeLevel& lv, const Weight& k) {
  WeightBlock W;
  W.weight = k;
  W.annihilator = lv.m() - k.u();
  const int top = top_degree(base);
  for (int q = 0; q <= top; ++q) W.bases.push_back(block_basis(base, k, q));
  for (int q = 0; q < top; ++q)
    W.d.push_back(block_operator(*W.bases[q], *W.bases[q + 1], W.annihilator, [&](const Form& y) { return form_d(k, y); }));
  return W;
}

inline PresentedComplex block_complex(const WeightBlock& W, const ZpmRing& R) {
  PresentedComplex C;
  C.ring = R;
  const int top = static_cast<int>(W.bases.size());
  for (int q = 0; q < top; ++q) C.modules.push_back(PresentedModule{std::vector<int>(W.dim(q), W.annihilator)});
  for (int q = 0; q + 1 < top; ++q) C.d.push_back(W.d[q]);
  return C;
}

struct SliceOptions {
  int block_cap = 0;  // skip blocks whose total rank exceeds this (0 = no cap)
};

// stream the weight blocks of a slice
inline void for_each_block(const BaseSpec& base, const PrimeLevel& lv, i64 K, const std::function<void(const WeightBlock&)>& fn,
                           const SliceOptions& opt = {}, std::vector<std::string>* skipped = nullptr) {
  for_each_weight(base, lv, K, [&](const Weight& k) {
    WeightBlock W = make_weight_block(base, lv, k);
    if (opt.block_cap > 0 && W.total_dim() > opt.block_cap) {
      if (skipped) skipped->push_back(k.render());
      return;
    }
    fn(W);
  });
}

// ---------------------------------------------------------------------------
// materialized slices

struct SparseEntry {
  int row, col;
  i64 value;
};
using SparseMatrix = std::vector<SparseEntry>;

struct ComplexSlice {
  PrimeLevel level;
  BaseSpec base;
  i64 K = 0;
  std::vector<WeightBlock> blocks;
  std::vector<std::string> skipped;

  int top() const { return top_degree(base); }
  int dim(int q) const {
    int s = 0;
    for (auto& b : blocks) s += b.dim(q);
    return s;
  }
  // global index of (block, local j) in degree q
  std::vector<int> offsets(int q) const {
    std::vector<int> off;
    int s = 0;
    for (auto& b : blocks) {
      off.push_back(s);
      s += b.dim(q);
    }
    return off;
  }
  int find_block(const Weight& k) const {
    auto it = std::lower_bound(blocks.begin(), blocks.end(), k, [](const WeightBlock& b, const Weight& w) { return b.weight < w; });
    if (it == blocks.end() || !(it->weight == k)) return -1;
    return static_cast<int>(it - blocks.begin());
  }
  std::vector<BasicTerm> basis(int q) const {
    std::vector<BasicTerm> out;
    for (auto& b : blocks)
      for (auto& P : b.bases[q]->labels) {
        BasicTerm t;
        t.coeff = CoeffW(1, level.with_level(b.annihilator));
        t.weight = b.weight;
        t.partition = P;
        t.level = level.m();
        t.degree = q;
        t.case_tag = case_tag_of(b.weight, P);
        t.annihilator_exp = b.annihilator;
        out.push_back(std::move(t));
      }
    return out;
  }
  SparseMatrix d_matrix(int q) const {
    SparseMatrix out;
    auto o0 = offsets(q), o1 = offsets(q + 1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const ModMatrix& M = blocks[b].d[q];
      for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j)
          if (M(i, j) != 0) out.push_back({o1[b] + i, o0[b] + j, M(i, j)});
    }
    return out;
  }
};

inline ComplexSlice build_slice(const BaseSpec& base, const PrimeLevel& lv, i64 K, const SliceOptions& opt = {}) {
  if (K < 0) throw std::invalid_argument("build_slice: K must be >= 0");
  ComplexSlice S;
  S.level = lv;
  S.base = base;
  S.K = K;
  for_each_block(base, lv, K, [&](const WeightBlock& W) { S.blocks.push_back(W); }, opt, &S.skipped);
  return S;
}

// Operator matrix between two slices in degree q: op maps (weight, form) of the source
// block to (weight, form) in the target; entries whose target weight is absent are dropped.
template <class Op>
SparseMatrix slice_operator(const ComplexSlice& src, const ComplexSlice& dst, int q_src, int q_dst, Op op) {
  SparseMatrix out;
  auto os = src.offsets(q_src), od = dst.offsets(q_dst);
  for (std::size_t b = 0; b < src.blocks.size(); ++b) {
    const auto& SB = *src.blocks[b].bases[q_src];
    for (int j = 0; j < SB.size(); ++j) {
      auto [k2, y] = op(SB.weight, SB.vectors[j]);
      int tb = dst.find_block(k2);
      if (tb < 0 || y.empty()) continue;
      const auto& TB = *dst.blocks[tb].bases[q_dst];
      std::vector<i64> c = normalize(TB, y, dst.blocks[tb].annihilator);
      for (int i = 0; i < TB.size(); ++i)
        if (c[i] != 0) out.push_back({od[tb] + i, os[b] + j, c[i]});
    }
  }
  std::sort(out.begin(), out.end(), [](const SparseEntry& a, const SparseEntry& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  return out;
}

inline SparseMatrix frobenius_matrix(const ComplexSlice& up, const ComplexSlice& down, int q) {
  return slice_operator(up, down, q, q, [](const Weight& k, const Form& y) { return std::make_pair(k.times_p(), y); });
}
inline SparseMatrix verschiebung_matrix(const ComplexSlice& down, const ComplexSlice& up, int q) {
  const i64 p = down.level.p();
  return slice_operator(down, up, q, q, [p](const Weight& k, const Form& y) { return std::make_pair(k.divided_by_p(), form_scale(y, p)); });
}
inline SparseMatrix restriction_matrix(const ComplexSlice& up, const ComplexSlice& down, int q) {
  return slice_operator(up, down, q, q, [](const Weight& k, const Form& y) { return std::make_pair(k, y); });
}

}  // namespace logdrw
