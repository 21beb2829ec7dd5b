#pragma once

// Log Kahler differentials of A = F_p[T_1..T_n]/(T_1...T_r), computed directly.
// Generators: dlog T_i (i < r, 0-based) and dT_j (j >= r). Over S0 the relation
// theta = 0 eliminates dlog T_{r-1}; over the trivial base it is kept.

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "logdrw/drw_core.hpp"

namespace kahler {

using logdrw::i64;
using logdrw::Mask;

struct Mono {
  std::vector<i64> a;  // exponent of T
  Mask g = 0;          // generator set
  bool operator<(const Mono& o) const { return a != o.a ? a < o.a : g < o.g; }
};
using Vec = std::map<Mono, i64>;

struct Model {
  int n, r;
  bool s0;
  i64 p;

  Mask generators() const {
    Mask all = n >= 32 ? ~Mask{0} : ((Mask{1} << n) - 1);
    if (s0) all &= ~(Mask{1} << (r - 1));
    return all;
  }
  bool monomial_alive(const std::vector<i64>& a) const {
    for (int i = 0; i < r; ++i)
      if (a[i] == 0) return true;
    return false;
  }
  // weight of T^a g_G: dT_j carries one unit of T_j
  std::vector<i64> weight(const Mono& m) const {
    std::vector<i64> w = m.a;
    for (int j = r; j < n; ++j)
      if (m.g >> j & 1u) ++w[j];
    return w;
  }

  void add(Vec& v, const Mono& m, i64 c) const {
    c %= p;
    if (c < 0) c += p;
    if (c == 0 || !monomial_alive(m.a)) return;
    i64& x = v[m];
    x = (x + c) % p;
    if (x == 0) v.erase(m);
  }

  static int insert_sign(int i, Mask g) {
    int below = 0;
    for (int t = 0; t < i; ++t) below += g >> t & 1u;
    return below % 2 ? -1 : 1;
  }

  // c * T^a * x_i ^ g, x_i = dlog T_i or dT_i; applies theta = 0 when needed
  void add_wedge(Vec& v, const std::vector<i64>& a, int i, Mask g, i64 c) const {
    if (s0 && i == r - 1) {
      for (int t = 0; t < r - 1; ++t) add_wedge(v, a, t, g, -c);
      return;
    }
    if (g >> i & 1u) return;
    add(v, Mono{a, g | (Mask{1} << i)}, c * insert_sign(i, g));
  }

  Vec d(const Mono& m) const {
    Vec out;
    for (int i = 0; i < n; ++i) {
      if (m.a[i] == 0) continue;
      if (i < r) {
        add_wedge(out, m.a, i, m.g, m.a[i]);
      } else {
        std::vector<i64> b = m.a;
        --b[i];
        add_wedge(out, b, i, m.g, m.a[i]);
      }
    }
    return out;
  }

  // basis of the weight-k part in degree q
  std::vector<Mono> basis(const std::vector<i64>& k, int q) const {
    std::vector<Mono> out;
    Mask gens = generators();
    for (Mask g = 0; g < (Mask{1} << n); ++g) {
      if ((g & ~gens) || std::popcount(g) != q) continue;
      Mono m{k, g};
      bool ok = true;
      for (int j = r; j < n; ++j)
        if (g >> j & 1u) {
          if (m.a[j] == 0) ok = false;
          else --m.a[j];
        }
      if (ok && monomial_alive(m.a)) out.push_back(m);
    }
    return out;
  }

  // ambient form at integral weight k (e_i = dlog T_i for every i) in this basis
  Vec from_form(const std::vector<i64>& k, const logdrw::Form& f) const {
    Vec out;
    for (auto& t : f) {
      i64 c = static_cast<i64>(t.c % p);
      std::vector<i64> a = k;
      bool ok = true;
      for (int j = r; j < n; ++j)
        if (t.mask >> j & 1u) {
          if (a[j] == 0) ok = false;
          else --a[j];
        }
      if (!ok) throw std::logic_error("kahler: dT_j on a weight with k_j = 0");
      if (s0 && (t.mask >> (r - 1) & 1u)) {
        // e_{r-1} ^ rest with the sign of pulling it to the front
        Mask rest = t.mask & ~(Mask{1} << (r - 1));
        add_wedge(out, a, r - 1, rest, c * insert_sign(r - 1, rest));
      } else {
        add(out, Mono{a, t.mask}, c);
      }
    }
    return out;
  }
};

struct Identification {
  bool ok = true;
  std::string detail;
  int blocks = 0;
};

inline i64 det_mod_p(std::vector<std::vector<i64>> M, i64 p) {
  const int N = static_cast<int>(M.size());
  i64 det = 1;
  for (int c = 0; c < N; ++c) {
    int piv = -1;
    for (int r = c; r < N; ++r)
      if (M[r][c] % p) {
        piv = r;
        break;
      }
    if (piv < 0) return 0;
    if (piv != c) {
      std::swap(M[piv], M[c]);
      det = p - det;
    }
    det = det * M[c][c] % p;
    i64 inv = logdrw::inv_mod(M[c][c], p);
    for (int r = c + 1; r < N; ++r) {
      i64 f = M[r][c] * inv % p;
      for (int j = c; j < N; ++j) M[r][j] = ((M[r][j] - f * M[c][j]) % p + p) % p;
    }
  }
  return det % p;
}

// Level-1 slice vs the Kahler complex: per weight block, the map sending each basis
// element to its Kahler expression is square, invertible mod p and commutes with d.
inline Identification level_one_identification(int n, int r, bool s0, i64 p, i64 K) {
  using namespace logdrw;
  Identification res;
  const BaseSpec base(n, r, s0 ? Flavor::QuotientLogPoint : Flavor::QuotientTrivialBase);
  const PrimeLevel lv(p, 1);
  const Model km{n, r, s0, p};
  auto fail = [&](const std::string& s) {
    if (res.ok) res.detail = s;
    res.ok = false;
  };
  for_each_block(base, lv, K, [&](const WeightBlock& W) {
    ++res.blocks;
    const std::vector<i64>& k = W.weight.numerators();
    std::vector<std::vector<Mono>> kb;
    for (int q = 0; q <= n; ++q) kb.push_back(km.basis(k, q));
    std::vector<std::vector<std::vector<i64>>> phi(n + 1);
    for (int q = 0; q <= n; ++q) {
      const int N = W.dim(q);
      if (static_cast<int>(kb[q].size()) != N) {
        fail("weight " + W.weight.render() + " degree " + std::to_string(q) + ": rank " + std::to_string(N) + " vs " +
             std::to_string(kb[q].size()));
        return;
      }
      phi[q].assign(N, std::vector<i64>(N, 0));
      for (int j = 0; j < N; ++j) {
        Vec v = km.from_form(k, W.bases[q]->vectors[j]);
        for (auto& [mono, c] : v) {
          auto it = std::find_if(kb[q].begin(), kb[q].end(), [&](const Mono& b) { return !(b < mono) && !(mono < b); });
          if (it == kb[q].end()) {
            fail("weight " + W.weight.render() + ": image outside the Kahler block");
            return;
          }
          phi[q][it - kb[q].begin()][j] = c;
        }
      }
      if (N > 0 && det_mod_p(phi[q], p) == 0) {
        fail("weight " + W.weight.render() + " degree " + std::to_string(q) + ": not invertible mod p");
        return;
      }
    }
    // phi d = d_K phi
    for (int q = 0; q < n; ++q) {
      const int N0 = W.dim(q), N1 = W.dim(q + 1);
      for (int j = 0; j < N0; ++j) {
        std::vector<i64> lhs(N1, 0), rhs(N1, 0);
        for (int i = 0; i < N1; ++i) {
          i64 s = 0;
          for (int t = 0; t < N1; ++t) s = (s + phi[q + 1][i][t] * W.d[q](t, j)) % p;
          lhs[i] = s;
        }
        for (int t = 0; t < N0; ++t) {
          if (phi[q][t][j] == 0) continue;
          for (auto& [mono, c] : km.d(kb[q][t])) {
            auto it = std::find_if(kb[q + 1].begin(), kb[q + 1].end(), [&](const Mono& b) { return !(b < mono) && !(mono < b); });
            if (it == kb[q + 1].end()) {
              fail("weight " + W.weight.render() + ": Kahler d leaves the block");
              return;
            }
            auto& x = rhs[it - kb[q + 1].begin()];
            x = (x + c * phi[q][t][j]) % p;
          }
        }
        for (int i = 0; i < N1; ++i)
          if (((lhs[i] - rhs[i]) % p + p) % p != 0) {
            fail("weight " + W.weight.render() + " degree " + std::to_string(q) + ": d does not commute");
            return;
          }
      }
    }
  });
  return res;
}

}  // namespace kahler
