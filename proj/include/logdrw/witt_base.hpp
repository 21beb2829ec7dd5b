#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logdrw {

using i64 = std::int64_t;
using i128 = __int128;
using Mask = std::uint32_t;

// ---------------------------------------------------------------------------
// integer helpers

inline i64 ipow(i64 base, int e) {
  i64 r = 1;
  for (int i = 0; i < e; ++i) {
    if (__builtin_mul_overflow(r, base, &r)) throw std::overflow_error("ipow overflow");
  }
  return r;
}

inline bool is_prime(i64 p) {
  if (p < 2) return false;
  for (i64 d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

// v_p(x) for x != 0; returns `zero_value` for x == 0.
inline int vp(i64 x, i64 p, int zero_value = std::numeric_limits<int>::max()) {
  if (x == 0) return zero_value;
  if (x < 0) x = -x;
  int v = 0;
  while (x % p == 0) {
    x /= p;
    ++v;
  }
  return v;
}

inline i64 mod_reduce(i64 x, i64 mod) {
  x %= mod;
  return x < 0 ? x + mod : x;
}

inline i64 mod_reduce128(i128 x, i64 mod) {
  i128 r = x % mod;
  if (r < 0) r += mod;
  return static_cast<i64>(r);
}

inline i64 mulmod(i64 a, i64 b, i64 mod) { return mod_reduce128(static_cast<i128>(a) * b, mod); }

inline i64 powmod(i64 a, i64 e, i64 mod) {
  i64 r = 1 % mod;
  a = mod_reduce(a, mod);
  while (e > 0) {
    if (e & 1) r = mulmod(r, a, mod);
    a = mulmod(a, a, mod);
    e >>= 1;
  }
  return r;
}

// inverse of a unit modulo mod
inline i64 inv_mod(i64 a, i64 mod) {
  i64 g = mod, x = 0, x1 = 1, a1 = mod_reduce(a, mod);
  if (mod == 1) return 0;
  while (a1 != 0) {
    i64 q = g / a1;
    std::tie(g, a1) = std::make_pair(a1, g - q * a1);
    std::tie(x, x1) = std::make_pair(x1, x - q * x1);
  }
  if (g != 1) throw std::domain_error("inv_mod: not a unit");
  return mod_reduce(x, mod);
}

inline int popcount(Mask m) { return std::popcount(m); }

inline std::vector<int> mask_indices(Mask m) {
  std::vector<int> out;
  for (int i = 0; m != 0; ++i, m >>= 1)
    if (m & 1u) out.push_back(i);
  return out;
}

inline Mask indices_mask(const std::vector<int>& idx) {
  Mask m = 0;
  for (int i : idx) m |= Mask{1} << i;
  return m;
}

// ---------------------------------------------------------------------------
// PrimeLevel, CoeffW

class PrimeLevel {
 public:
  PrimeLevel() = default;
  PrimeLevel(i64 p, int m) : p_(p), m_(m) {
    if (!is_prime(p)) throw std::invalid_argument("PrimeLevel: p must be prime (got " + std::to_string(p) + ")");
    if (m < 1) throw std::invalid_argument("PrimeLevel: m must be >= 1 (got " + std::to_string(m) + ")");
    modulus_ = ipow(p, m);
  }

  i64 p() const { return p_; }
  int m() const { return m_; }
  i64 modulus() const { return modulus_; }
  PrimeLevel with_level(int m) const { return PrimeLevel(p_, m); }

  bool operator==(const PrimeLevel& o) const { return p_ == o.p_ && m_ == o.m_; }

 private:
  i64 p_ = 2;
  int m_ = 1;
  i64 modulus_ = 2;
};

class CoeffW {
 public:
  CoeffW() = default;
  CoeffW(i64 v, PrimeLevel lv) : level_(lv), value_(mod_reduce(v, lv.modulus())) {}

  i64 value() const { return value_; }
  const PrimeLevel& level() const { return level_; }
  int valuation() const { return vp(value_, level_.p(), level_.m()); }
  bool is_zero() const { return value_ == 0; }

  friend CoeffW operator+(const CoeffW& a, const CoeffW& b) {
    check(a, b);
    return CoeffW(a.value_ + b.value_, a.level_);
  }
  friend CoeffW operator-(const CoeffW& a, const CoeffW& b) {
    check(a, b);
    return CoeffW(a.value_ - b.value_, a.level_);
  }
  friend CoeffW operator*(const CoeffW& a, const CoeffW& b) {
    check(a, b);
    return CoeffW(mulmod(a.value_, b.value_, a.level_.modulus()), a.level_);
  }
  CoeffW operator-() const { return CoeffW(-value_, level_); }
  bool operator==(const CoeffW& o) const { return level_ == o.level_ && value_ == o.value_; }

 private:
  static void check(const CoeffW& a, const CoeffW& b) {
    if (!(a.level_ == b.level_)) throw std::invalid_argument("CoeffW: level mismatch");
  }
  PrimeLevel level_;
  i64 value_ = 0;
};

inline CoeffW teichmuller(i64 a, PrimeLevel lv) {
  if (a < 0 || a >= lv.p()) throw std::invalid_argument("teichmuller: residue out of range");
  return CoeffW(powmod(a, ipow(lv.p(), lv.m() - 1), lv.modulus()), lv);
}

// ---------------------------------------------------------------------------
// Weight functions k : [1,n] -> Z>=0[1/p], stored as numerators over p^den_exp.

class Weight {
 public:
  Weight() = default;
  Weight(std::vector<i64> num, int den_exp, i64 p) : p_(p), num_(std::move(num)), den_(den_exp) {
    if (den_ < 0) throw std::invalid_argument("Weight: negative denominator exponent");
    for (i64 x : num_)
      if (x < 0) throw std::invalid_argument("Weight: negative entry");
    canonicalize();
  }

  static Weight integral(std::vector<i64> a, i64 p) { return Weight(std::move(a), 0, p); }
  static Weight zero(int n, i64 p) { return Weight(std::vector<i64>(n, 0), 0, p); }

  int size() const { return static_cast<int>(num_.size()); }
  i64 p() const { return p_; }
  const std::vector<i64>& numerators() const { return num_; }
  int den_exp() const { return den_; }
  int u() const { return den_; }
  bool integral() const { return den_ == 0; }
  bool is_zero() const { return support() == 0; }

  Mask support() const {
    Mask s = 0;
    for (int i = 0; i < size(); ++i)
      if (num_[i] != 0) s |= Mask{1} << i;
    return s;
  }

  // v_p(k(i)), which may be negative; requires k(i) != 0
  int entry_valuation(int i) const { return vp(num_[i], p_) - den_; }
  // v_p of the numerator (over p^den_exp)
  int numerator_valuation(int i) const { return vp(num_[i], p_); }

  // |k| = sum k(i), as numerator over p^den_exp
  i64 total_numerator() const {
    i64 s = 0;
    for (i64 x : num_) s += x;
    return s;
  }
  bool total_at_most(i64 K) const {
    return static_cast<i128>(total_numerator()) <= static_cast<i128>(K) * ipow(p_, den_);
  }
  // |k| or max_i k(i) as a double-free rational pair (num, den)
  std::pair<i64, i64> total() const { return {total_numerator(), ipow(p_, den_)}; }
  std::pair<i64, i64> max_entry() const {
    i64 mx = 0;
    for (i64 x : num_) mx = std::max(mx, x);
    return {mx, ipow(p_, den_)};
  }

  Weight times_p() const {
    if (den_ > 0) return Weight(num_, den_ - 1, p_);
    std::vector<i64> n2 = num_;
    for (auto& x : n2) x *= p_;
    return Weight(n2, 0, p_);
  }
  Weight divided_by_p() const { return Weight(num_, den_ + 1, p_); }

  Weight operator+(const Weight& o) const {
    if (o.size() != size() || o.p_ != p_) throw std::invalid_argument("Weight: size mismatch");
    int d = std::max(den_, o.den_);
    std::vector<i64> n2(num_.size());
    for (int i = 0; i < size(); ++i) n2[i] = num_[i] * ipow(p_, d - den_) + o.num_[i] * ipow(p_, d - o.den_);
    return Weight(n2, d, p_);
  }

  // entries restricted to the complement of `drop`, reindexed
  Weight without(Mask drop) const {
    std::vector<i64> n2;
    for (int i = 0; i < size(); ++i)
      if (!(drop >> i & 1u)) n2.push_back(num_[i]);
    return Weight(n2, den_, p_);
  }

  std::strong_ordering operator<=>(const Weight& o) const {
    if (auto c = size() <=> o.size(); c != 0) return c;
    int d = std::max(den_, o.den_);
    for (int i = 0; i < size(); ++i) {
      i128 a = static_cast<i128>(num_[i]) * ipow(p_, d - den_);
      i128 b = static_cast<i128>(o.num_[i]) * ipow(p_, d - o.den_);
      if (a != b) return a < b ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    return std::strong_ordering::equal;
  }
  bool operator==(const Weight& o) const { return num_ == o.num_ && den_ == o.den_; }

  std::string render() const {
    std::ostringstream os;
    for (int i = 0; i < size(); ++i) {
      if (i) os << ',';
      os << num_[i] << '/' << p_ << '^' << den_;
    }
    return os.str();
  }

 private:
  void canonicalize() {
    while (den_ > 0 && std::all_of(num_.begin(), num_.end(), [&](i64 x) { return x % p_ == 0; })) {
      for (auto& x : num_) x /= p_;
      --den_;
    }
  }

  i64 p_ = 2;
  std::vector<i64> num_;
  int den_ = 0;
};

// ---------------------------------------------------------------------------
// Bases

enum class Flavor { PolyTrivialBase, QuotientTrivialBase, QuotientLogPoint };

inline std::string flavor_name(Flavor f) {
  switch (f) {
    case Flavor::PolyTrivialBase: return "PolyTrivialBase";
    case Flavor::QuotientTrivialBase: return "QuotientTrivialBase";
    case Flavor::QuotientLogPoint: return "QuotientLogPoint";
  }
  return "?";
}

inline Flavor parse_flavor(const std::string& s) {
  if (s == "PolyTrivialBase") return Flavor::PolyTrivialBase;
  if (s == "QuotientTrivialBase") return Flavor::QuotientTrivialBase;
  if (s == "QuotientLogPoint") return Flavor::QuotientLogPoint;
  throw std::invalid_argument("unknown flavor '" + s + "'");
}

// r = 0 is accepted for PolyTrivialBase only; it models a polynomial ring
// without log structure (the strata Y_I of a semistable base).
struct BaseSpec {
  int n = 1;
  int r = 1;
  Flavor flavor = Flavor::PolyTrivialBase;

  BaseSpec() = default;
  BaseSpec(int n_, int r_, Flavor f) : n(n_), r(r_), flavor(f) { validate(); }

  void validate() const {
    // n = 0 is the point, allowed only as a stratum (r = 0)
    if (n < 0 || n > 16 || (n == 0 && r != 0)) throw std::invalid_argument("BaseSpec: n must satisfy 1 <= n <= 16 (got " + std::to_string(n) + ")");
    int rmin = flavor == Flavor::PolyTrivialBase ? 0 : 1;
    if (r < rmin || r > n)
      throw std::invalid_argument("BaseSpec: r must satisfy " + std::to_string(rmin) + " <= r <= n (got r=" +
                                  std::to_string(r) + ", n=" + std::to_string(n) + ")");
  }

  BaseSpec with_flavor(Flavor f) const { return BaseSpec(n, r, f); }
  Mask divisor_mask() const { return r == 0 ? 0 : ((Mask{1} << r) - 1); }
  bool quotient() const { return flavor != Flavor::PolyTrivialBase; }

  // weights surviving in the flavor (T_1...T_r = 0 in the quotient flavors)
  bool admits(const Weight& k) const {
    if (!quotient()) return true;
    return (k.support() & divisor_mask()) != divisor_mask();
  }
  // divisor indices of weight zero: the indices that may carry a dlog factor
  Mask log_indices(const Weight& k) const { return divisor_mask() & ~k.support(); }
  // index whose dlog is eliminated by theta = 0 (S0 flavor)
  int eliminated_index(const Weight& k) const {
    Mask z = log_indices(k);
    if (z == 0) return -1;
    return 31 - std::countl_zero(z);
  }
  // index set S of the ambient exterior algebra of block k
  Mask ambient_indices(const Weight& k) const {
    Mask s = k.support() | log_indices(k);
    if (flavor == Flavor::QuotientLogPoint) {
      int z = eliminated_index(k);
      if (z >= 0) s &= ~(Mask{1} << z);
    }
    return s;
  }
  // dlog indices allowed in basis labels
  Mask allowed_log_indices(const Weight& k) const {
    Mask l = log_indices(k);
    if (flavor == Flavor::QuotientLogPoint) {
      int z = eliminated_index(k);
      if (z >= 0) l &= ~(Mask{1} << z);
    }
    return l;
  }

  bool operator==(const BaseSpec& o) const { return n == o.n && r == o.r && flavor == o.flavor; }
};

// ---------------------------------------------------------------------------
// Partitions and basic terms

// Indices are 0-based internally and rendered 1-based.
struct Partition {
  std::vector<std::vector<int>> teich;  // I_0 (possibly empty), I_1, ..., I_rho
  std::vector<std::vector<int>> logs;   // singleton log parts, ascending

  int rho() const { return static_cast<int>(teich.size()) - 1; }
  int degree() const { return rho() + static_cast<int>(logs.size()); }
  int log_count() const { return static_cast<int>(logs.size()); }
  Mask log_mask() const {
    Mask m = 0;
    for (auto& l : logs)
      for (int i : l) m |= Mask{1} << i;
    return m;
  }
  auto operator<=>(const Partition&) const = default;
};

// supp(k) ordered by (v_p(k(i)) ascending, index ascending)
inline std::vector<int> canonical_order(const Weight& k) {
  std::vector<int> idx = mask_indices(k.support());
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return k.numerator_valuation(a) < k.numerator_valuation(b); });
  return idx;
}

// all canonical labels of degree q for block k in the given flavor, sorted
inline std::vector<Partition> enumerate_partitions(const Weight& k, const BaseSpec& base, int q) {
  std::vector<Partition> out;
  if (q < 0 || !base.admits(k)) return out;
  std::vector<int> order = canonical_order(k);
  const int s = static_cast<int>(order.size());
  std::vector<int> logs = mask_indices(base.allowed_log_indices(k));
  const int nl = static_cast<int>(logs.size());
  for (Mask lsel = 0; lsel < (Mask{1} << nl); ++lsel) {
    int lam = popcount(lsel);
    int rho = q - lam;
    if (rho < 0 || rho > s) continue;
    Partition base_part;
    for (int t = 0; t < nl; ++t)
      if (lsel >> t & 1u) base_part.logs.push_back({logs[t]});
    // starts of I_1..I_rho: rho-subsets of positions {0..s-1}
    for (Mask st = 0; st < (Mask{1} << s); ++st) {
      if (popcount(st) != rho) continue;
      Partition P = base_part;
      std::vector<int> cur;
      P.teich.clear();
      for (int pos = 0; pos < s; ++pos) {
        if (st >> pos & 1u) {
          P.teich.push_back(cur);
          cur.clear();
        }
        cur.push_back(order[pos]);
      }
      P.teich.push_back(cur);
      out.push_back(std::move(P));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline int case_tag_of(const Weight& k, const Partition& P) {
  if (!P.teich[0].empty() || k.is_zero()) return k.integral() ? 1 : 2;
  return 3;
}

struct BasicTerm {
  CoeffW coeff;  // at level annihilator_exp
  Weight weight;
  Partition partition;
  int level = 1;
  int degree = 0;
  int case_tag = 1;
  int annihilator_exp = 1;

  std::string render() const {
    std::ostringstream os;
    os << coeff.value() << " * e(" << weight.render() << ";";
    for (std::size_t j = 0; j < partition.teich.size(); ++j) {
      os << (j ? "|" : " ") << '{';
      for (std::size_t t = 0; t < partition.teich[j].size(); ++t) os << (t ? "," : "") << partition.teich[j][t] + 1;
      os << '}';
    }
    os << " ;";
    for (std::size_t j = 0; j < partition.logs.size(); ++j) {
      os << (j ? "|" : " ") << '{';
      for (std::size_t t = 0; t < partition.logs[j].size(); ++t) os << (t ? "," : "") << partition.logs[j][t] + 1;
      os << '}';
    }
    os << ')';
    return os.str();
  }
};

struct RawTerm {
  i64 coeff = 1;
  Weight weight;
  Partition partition;
};

inline void check_weight_admissible(const Weight& k, const PrimeLevel& lv, const BaseSpec& base) {
  if (k.size() != base.n) throw std::invalid_argument("weight has " + std::to_string(k.size()) + " entries, base has n=" + std::to_string(base.n));
  if (k.p() != lv.p()) throw std::invalid_argument("weight prime does not match level prime");
  if (k.u() >= lv.m())
    throw std::invalid_argument("inadmissible weight: denominator exponent " + std::to_string(k.u()) + " >= m=" + std::to_string(lv.m()));
}

// True iff P is one of the canonical labels for (k, base)
inline bool is_canonical_partition(const Weight& k, const Partition& P, const BaseSpec& base) {
  auto labels = enumerate_partitions(k, base, P.degree());
  return std::binary_search(labels.begin(), labels.end(), P);
}

inline std::optional<BasicTerm> normalize_term(const RawTerm& raw, const PrimeLevel& lv, const BaseSpec& base) {
  const Weight& k = raw.weight;
  check_weight_admissible(k, lv, base);
  if (raw.partition.teich.empty()) throw std::invalid_argument("partition must contain I_0 (possibly empty)");
  Mask seen = 0, teich_union = 0;
  auto add = [&](const std::vector<int>& part, bool teich) {
    for (int i : part) {
      if (i < 0 || i >= base.n) throw std::invalid_argument("partition index out of range");
      if (seen >> i & 1u) throw std::invalid_argument("partition parts are not disjoint");
      seen |= Mask{1} << i;
      if (teich) teich_union |= Mask{1} << i;
    }
  };
  for (auto& part : raw.partition.teich) add(part, true);
  for (auto& part : raw.partition.logs) {
    if (part.empty()) throw std::invalid_argument("empty log part");
    add(part, false);
  }
  if (teich_union != k.support()) throw std::invalid_argument("partition does not cover supp(k) by its Teichmuller parts");
  for (auto& part : raw.partition.logs)
    for (int i : part)
      if (!(base.log_indices(k) >> i & 1u))
        throw std::invalid_argument("log part index " + std::to_string(i + 1) + " is not a weight-zero divisor index");
  if (!base.admits(k)) return std::nullopt;
  if (!is_canonical_partition(k, raw.partition, base))
    throw std::invalid_argument("partition is not a canonical basis label for this weight and flavor");
  const int ann = lv.m() - k.u();
  PrimeLevel alv = lv.with_level(ann);
  CoeffW c(raw.coeff, alv);
  if (c.is_zero()) return std::nullopt;
  BasicTerm t;
  t.coeff = c;
  t.weight = k;
  t.partition = raw.partition;
  t.level = lv.m();
  t.degree = raw.partition.degree();
  t.case_tag = case_tag_of(k, raw.partition);
  t.annihilator_exp = ann;
  return t;
}

}  // namespace logdrw
