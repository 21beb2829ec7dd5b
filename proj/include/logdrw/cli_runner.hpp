#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "logdrw/comparison_mw.hpp"
#include "logdrw/drw_core.hpp"
#include "logdrw/exact_homology.hpp"
#include "logdrw/log_semistable.hpp"
#include "logdrw/monodromy_filtration.hpp"
#include "logdrw/witt_base.hpp"

namespace logdrw {

using ojson = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& all_suites() {
  static const std::vector<std::string> s = {"relations", "exactness", "decomposition", "comparison", "monodromy", "gauge"};
  return s;
}

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& msg) : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  i64 p = 2;
  int m_max = 1;
  int n = 1;
  int r = 1;
  i64 K = 1;
  i64 D = 1;
  std::vector<std::string> suites = all_suites();
  std::string output;
  std::uint64_t seed = 0;
  int block_cap = 0;
  i64 pair_K = 1;  // weight bound for the pairwise relations
  GaugeOptions gauge;
  bool timing = false;
};

inline void validate_config(const RunConfig& c) {
  if (c.p < 2 || !is_prime(c.p)) throw ConfigError("$.p", "must be a prime");
  if (c.m_max < 1) throw ConfigError("$.m_max", "must be >= 1");
  if (c.n < 1 || c.n > 16) throw ConfigError("$.n", "must satisfy 1 <= n <= 16");
  if (c.r < 0) throw ConfigError("$.r", "must be >= 0");
  if (c.r > c.n) throw ConfigError("$.r", "violates r <= n (r=" + std::to_string(c.r) + ", n=" + std::to_string(c.n) + ")");
  if (c.K < 1) throw ConfigError("$.K", "must be >= 1");
  if (c.D < 1) throw ConfigError("$.D", "must be >= 1");
  if (c.pair_K < 0) throw ConfigError("$.pair_K", "must be >= 0");
  if (c.block_cap < 0) throw ConfigError("$.block_cap", "must be >= 0");
  if (c.suites.empty()) throw ConfigError("$.suites", "must be nonempty");
  for (std::size_t i = 0; i < c.suites.size(); ++i)
    if (std::find(all_suites().begin(), all_suites().end(), c.suites[i]) == all_suites().end())
      throw ConfigError("$.suites[" + std::to_string(i) + "]", "unknown suite '" + c.suites[i] + "'");
  if (c.gauge.grid_floor < 0 || c.gauge.grid_floor > 30) throw ConfigError("$.gauge.grid_floor", "must be in [0, 30]");
  bool wants_comparison = std::find(c.suites.begin(), c.suites.end(), "comparison") != c.suites.end();
  if (wants_comparison && c.D != c.K) throw ConfigError("$.D", "comparison requires D = K");
  if (c.r == 0) {
    for (const char* s : {"comparison", "monodromy"})
      if (std::find(c.suites.begin(), c.suites.end(), s) != c.suites.end())
        throw ConfigError("$.r", std::string("suite '") + s + "' needs r >= 1");
  }
}

namespace detail {

template <class T>
T get_field(const ojson& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

inline i64 get_int(const ojson& j, const std::string& key, const std::string& path) {
  if (!j.at(key).is_number_integer()) throw ConfigError(path + "." + key, "must be an integer");
  return get_field<i64>(j, key, path);
}

}  // namespace detail

inline RunConfig config_from_json(const ojson& j) {
  if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
  static const std::set<std::string> known = {"p", "m_max", "n", "r", "K", "D", "suites", "output", "seed", "block_cap", "pair_K", "gauge", "timing"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("$." + it.key(), "unknown field");
  for (const char* req : {"p", "m_max", "n", "r", "K"})
    if (!j.contains(req)) throw ConfigError(std::string("$.") + req, "missing required field");
  RunConfig c;
  c.p = detail::get_int(j, "p", "$");
  c.m_max = static_cast<int>(detail::get_int(j, "m_max", "$"));
  c.n = static_cast<int>(detail::get_int(j, "n", "$"));
  c.r = static_cast<int>(detail::get_int(j, "r", "$"));
  c.K = detail::get_int(j, "K", "$");
  c.D = j.contains("D") ? detail::get_int(j, "D", "$") : c.K;
  if (j.contains("suites")) {
    if (!j.at("suites").is_array()) throw ConfigError("$.suites", "must be an array of suite names");
    c.suites.clear();
    for (std::size_t i = 0; i < j.at("suites").size(); ++i) {
      const auto& s = j.at("suites")[i];
      if (!s.is_string()) throw ConfigError("$.suites[" + std::to_string(i) + "]", "must be a string");
      if (s.get<std::string>() == "all") {
        c.suites = all_suites();
        break;
      }
      c.suites.push_back(s.get<std::string>());
    }
  }
  if (j.contains("output")) c.output = detail::get_field<std::string>(j, "output", "$");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) throw ConfigError("$.seed", "must be an unsigned integer");
    if (j.at("seed").is_number_integer() && j.at("seed").get<i64>() < 0) throw ConfigError("$.seed", "must be an unsigned integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("block_cap")) c.block_cap = static_cast<int>(detail::get_int(j, "block_cap", "$"));
  if (j.contains("pair_K")) c.pair_K = detail::get_int(j, "pair_K", "$");
  if (j.contains("timing")) c.timing = detail::get_field<bool>(j, "timing", "$");
  if (j.contains("gauge")) {
    const auto& g = j.at("gauge");
    if (!g.is_object()) throw ConfigError("$.gauge", "must be an object");
    for (auto it = g.begin(); it != g.end(); ++it)
      if (it.key() != "norm" && it.key() != "grid_floor" && it.key() != "c_cap") throw ConfigError("$.gauge." + it.key(), "unknown field");
    if (g.contains("norm")) {
      auto s = detail::get_field<std::string>(g, "norm", "$.gauge");
      if (s == "sum")
        c.gauge.norm = GaugeNorm::Sum;
      else if (s == "max")
        c.gauge.norm = GaugeNorm::Max;
      else
        throw ConfigError("$.gauge.norm", "must be 'sum' or 'max'");
    }
    if (g.contains("grid_floor")) c.gauge.grid_floor = static_cast<int>(detail::get_int(g, "grid_floor", "$.gauge"));
    if (g.contains("c_cap")) {
      const auto& v = g.at("c_cap");
      if (v.is_number_integer()) {
        c.gauge.c_cap = static_cast<long>(v.get<i64>());
      } else if (v.is_string()) {
        try {
          c.gauge.c_cap = mpq_class(v.get<std::string>());
        } catch (const std::invalid_argument&) {
          throw ConfigError("$.gauge.c_cap", "must be an integer or a rational 'a/b'");
        }
        if (c.gauge.c_cap.get_den() == 0) throw ConfigError("$.gauge.c_cap", "zero denominator");
        c.gauge.c_cap.canonicalize();
      } else {
        throw ConfigError("$.gauge.c_cap", "must be an integer or a rational 'a/b'");
      }
      if (c.gauge.c_cap < 0) throw ConfigError("$.gauge.c_cap", "must be non-negative");
    }
  }
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config file '" + path + "'");
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["p"] = c.p;
  j["m_max"] = c.m_max;
  j["n"] = c.n;
  j["r"] = c.r;
  j["K"] = c.K;
  j["D"] = c.D;
  j["suites"] = c.suites;
  j["seed"] = c.seed;
  j["block_cap"] = c.block_cap;
  j["pair_K"] = c.pair_K;
  j["gauge"] = {{"norm", c.gauge.norm == GaugeNorm::Sum ? "sum" : "max"},
                {"grid_floor", c.gauge.grid_floor},
                {"c_cap", rational_string(c.gauge.c_cap)}};
  return j;
}

// ---------------------------------------------------------------------------
// slice serialization

inline ojson sparse_to_json(const SparseMatrix& M) {
  ojson a = ojson::array();
  for (auto& e : M) a.push_back({e.row, e.col, e.value});
  return a;
}

struct SliceNeighbors {
  const ComplexSlice* up = nullptr;  // level m+1, same base and K
};

inline ojson slice_to_json(const ComplexSlice& S, SliceNeighbors nb = {}) {
  ojson j;
  j["p"] = S.level.p();
  j["m"] = S.level.m();
  j["n"] = S.base.n;
  j["r"] = S.base.r;
  j["flavor"] = flavor_name(S.base.flavor);
  j["K"] = S.K;
  ojson bases = ojson::array();
  for (int q = 0; q <= S.top(); ++q) {
    ojson b = ojson::array();
    for (auto& t : S.basis(q)) b.push_back(t.render());
    bases.push_back(b);
  }
  j["bases"] = bases;
  ojson d = ojson::array();
  for (int q = 0; q < S.top(); ++q) d.push_back(sparse_to_json(S.d_matrix(q)));
  ojson mats;
  mats["d"] = d;
  if (nb.up) {
    ojson F = ojson::array(), V = ojson::array(), R = ojson::array();
    for (int q = 0; q <= S.top(); ++q) {
      F.push_back(sparse_to_json(frobenius_matrix(*nb.up, S, q)));
      V.push_back(sparse_to_json(verschiebung_matrix(S, *nb.up, q)));
      R.push_back(sparse_to_json(restriction_matrix(*nb.up, S, q)));
    }
    mats["F"] = F;
    mats["V"] = V;
    mats["restrict"] = R;
  }
  j["matrices"] = mats;
  if (!S.skipped.empty()) j["skipped"] = S.skipped;
  return j;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// suites

struct SuiteResult {
  std::string name;
  bool pass = true;
  ojson details = ojson::object();
  std::vector<std::string> defects;
  double millis = 0;

  void fail(const std::string& what) {
    pass = false;
    if (defects.size() < 20) defects.push_back(what);
  }
};

namespace detail {

inline std::vector<BaseSpec> quotient_bases(const RunConfig& c) {
  if (c.r == 0) return {BaseSpec(c.n, 0, Flavor::PolyTrivialBase)};
  return {BaseSpec(c.n, c.r, Flavor::QuotientTrivialBase), BaseSpec(c.n, c.r, Flavor::QuotientLogPoint)};
}

inline std::vector<DRWElement> basis_elements(const BaseSpec& base, const PrimeLevel& lv, i64 K) {
  std::vector<DRWElement> out;
  for (int q = 0; q <= top_degree(base); ++q)
    for (auto& t : enumerate_basis(base, q, lv, K)) out.push_back(element_from_term(t, base));
  return out;
}

struct Counter {
  i64 checks = 0, violations = 0;
  ojson to_json() const { return {{"checks", checks}, {"violations", violations}}; }
};

inline std::string fv_key(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline ojson factor_table(const std::vector<std::vector<int>>& per_degree) {
  ojson a = ojson::array();
  for (std::size_t q = 0; q < per_degree.size(); ++q) {
    auto v = per_degree[q];
    std::sort(v.begin(), v.end(), std::greater<>());
    a.push_back({{"degree", q}, {"invariant_factors", v}});
  }
  return a;
}

}  // namespace detail

inline SuiteResult suite_relations(const RunConfig& c) {
  SuiteResult res{"relations"};
  std::map<std::string, detail::Counter> cnt;
  auto check = [&](const std::string& rel, bool ok, const std::function<std::string()>& what) {
    auto& k = cnt[rel];
    ++k.checks;
    if (!ok) {
      ++k.violations;
      res.fail(rel + ": " + what());
    }
  };
  for (const BaseSpec& base : detail::quotient_bases(c)) {
    for (int m = 1; m <= c.m_max; ++m) {
      const PrimeLevel lv(c.p, m), up(c.p, m + 1);
      auto B = detail::basis_elements(base, lv, c.K);
      for (auto& x : B) {
        check("d2", differential(differential(x)).is_zero(), [&] { return x.render(); });
        DRWElement vx = verschiebung(x);
        check("FV", frobenius(vx) == scale(x, c.p), [&] { return x.render(); });
        check("FdV", frobenius(differential(vx)) == differential(x), [&] { return x.render(); });
      }
      for (int i = 1; i <= base.r; ++i)
        check("Fdlog", frobenius(dlog_element(up, base, i)) == dlog_element(lv, base, i), [&] { return "dlog T" + std::to_string(i); });
      auto P = detail::basis_elements(base, lv, c.pair_K);
      auto Pup = detail::basis_elements(base, up, c.pair_K);
      for (auto& x : P)
        for (auto& y : P) {
          DRWElement lhs = differential(multiply(x, y));
          DRWElement rhs = add(multiply(differential(x), y), scale(multiply(x, differential(y)), x.degree() % 2 ? -1 : 1));
          check("Leibniz", lhs == rhs, [&] { return x.render() + " , " + y.render(); });
        }
      for (auto& x : Pup) {
        DRWElement fx = frobenius(x);
        for (auto& y : P)
          check("VFxy", verschiebung(multiply(fx, y)) == multiply(x, verschiebung(y)), [&] { return x.render() + " , " + y.render(); });
      }
    }
  }
  for (auto& [k, v] : cnt) res.details[k] = v.to_json();
  return res;
}

inline SuiteResult suite_exactness(const RunConfig& c) {
  SuiteResult res{"exactness"};
  detail::Counter fil, th, mw;
  for (const BaseSpec& base : detail::quotient_bases(c)) {
    for (int m = 1; m <= c.m_max; ++m) {
      const PrimeLevel up(c.p, m + 1);
      for_each_weight(base, up, c.K, [&](const Weight& k) {
        ++fil.checks;
        FilSesResult r = fil_ses_block(base, up, k);
        if (!r.exact) {
          ++fil.violations;
          res.fail(std::string("fil ") + flavor_name(base.flavor) + " m=" + std::to_string(m) + " " + r.detail);
        }
      });
    }
  }
  if (c.r >= 1) {
    const BaseSpec tilde(c.n, c.r, Flavor::QuotientTrivialBase);
    for (int m = 1; m <= c.m_max; ++m) {
      const PrimeLevel lv(c.p, m);
      const ZpmRing R(lv);
      for_each_weight(tilde, lv, c.K, [&](const Weight& k) {
        ++th.checks;
        std::string why;
        if (!ses_is_exact(theta_ses(make_theta_blocks(c.n, c.r, lv, k), R), &why)) {
          ++th.violations;
          res.fail("theta m=" + std::to_string(m) + " weight " + k.render() + ": " + why);
        }
      });
      for_each_integral_weight(tilde, c.D, c.p, [&](const Weight& w) {
        ++mw.checks;
        std::string why;
        if (!ses_is_exact(mw_theta_ses(c.n, c.r, lv, w), &why)) {
          ++mw.violations;
          res.fail("mw theta m=" + std::to_string(m) + " weight " + w.render() + ": " + why);
        }
      });
    }
  }
  res.details["fil_ses"] = fil.to_json();
  res.details["theta_ses"] = th.to_json();
  res.details["mw_theta_ses"] = mw.to_json();
  return res;
}

// invariant factors per degree of a quotient-flavor slice, summed over blocks
struct SliceCohomology {
  std::vector<std::vector<int>> integral, fractional;
  std::vector<std::string> skipped;
};

inline SliceCohomology slice_cohomology(const BaseSpec& base, const PrimeLevel& lv, i64 K, int block_cap) {
  SliceCohomology out;
  const ZpmRing R(lv);
  out.integral.resize(top_degree(base) + 1);
  out.fractional.resize(top_degree(base) + 1);
  SliceOptions opt{block_cap};
  for_each_block(base, lv, K, [&](const WeightBlock& W) {
    auto H = cohomology(block_complex(W, R));
    auto& dst = W.weight.integral() ? out.integral : out.fractional;
    for (auto& h : H) dst[h.degree].insert(dst[h.degree].end(), h.invariant_factors.begin(), h.invariant_factors.end());
  }, opt, &out.skipped);
  for (auto* v : {&out.integral, &out.fractional})
    for (auto& f : *v) std::sort(f.begin(), f.end(), std::greater<>());
  return out;
}

inline SuiteResult suite_decomposition(const RunConfig& c) {
  SuiteResult res{"decomposition"};
  ojson tables = ojson::array();
  std::map<std::string, std::vector<SliceCohomology>> by_flavor;
  for (const BaseSpec& base : detail::quotient_bases(c)) {
    for (int m = 1; m <= c.m_max; ++m) {
      const PrimeLevel lv(c.p, m);
      SliceCohomology H = slice_cohomology(base, lv, c.K, c.block_cap);
      for (std::size_t q = 0; q < H.fractional.size(); ++q)
        if (!H.fractional[q].empty())
          res.fail(std::string("fractional part not acyclic: ") + flavor_name(base.flavor) + " m=" + std::to_string(m) + " H^" + std::to_string(q));
      ojson t;
      t["flavor"] = flavor_name(base.flavor);
      t["m"] = m;
      t["cohomology"] = detail::factor_table(H.integral);
      t["fractional_nonzero_degrees"] = ojson::array();
      for (std::size_t q = 0; q < H.fractional.size(); ++q)
        if (!H.fractional[q].empty()) t["fractional_nonzero_degrees"].push_back(q);
      if (!H.skipped.empty()) t["skipped_blocks"] = H.skipped;
      tables.push_back(t);
      by_flavor[flavor_name(base.flavor)].push_back(H);
    }
  }
  res.details["cohomology"] = tables;
  // level stabilization of the count of full-level summands (e = m) on the S0 slice
  const std::string s0 = flavor_name(c.r >= 1 ? Flavor::QuotientLogPoint : Flavor::PolyTrivialBase);
  ojson stab = ojson::array();
  bool stab_ok = true;
  const auto& hs = by_flavor[s0];
  for (int m = 1; m + 1 <= c.m_max; ++m) {
    const auto& a = hs[m - 1].integral;
    const auto& b = hs[m].integral;
    for (std::size_t q = 0; q < a.size(); ++q) {
      int fa = static_cast<int>(std::count(a[q].begin(), a[q].end(), m));
      int fb = static_cast<int>(std::count(b[q].begin(), b[q].end(), m + 1));
      std::vector<int> sa, sb;
      for (int e : a[q])
        if (e < m) sa.push_back(e);
      for (int e : b[q])
        if (e < m + 1) sb.push_back(e);
      ojson row = {{"m", m}, {"degree", q}, {"full_m", fa}, {"full_m_plus_1", fb}, {"stable", fa == fb}};
      if (sa != sb) row["sub_full_difference"] = {{"m", sa}, {"m_plus_1", sb}};
      if (fa != fb) {
        stab_ok = false;
        res.fail("full-level count changes from m=" + std::to_string(m) + " to " + std::to_string(m + 1) + " in degree " + std::to_string(q) + " (" +
                 std::to_string(fa) + " -> " + std::to_string(fb) + ")");
      }
      stab.push_back(row);
    }
  }
  res.details["level_stabilization"] = {{"flavor", s0}, {"stable", stab_ok}, {"rows", stab}};
  return res;
}

inline SuiteResult suite_comparison(const RunConfig& c) {
  SuiteResult res{"comparison"};
  const BaseSpec tilde(c.n, c.r, Flavor::QuotientTrivialBase), s0(c.n, c.r, Flavor::QuotientLogPoint);
  bool kappa_commutes = true, integral_iso = true, mod_pm_iso = true, kappa_theta = true;
  ojson levels = ojson::array();
  for (int m = 1; m <= c.m_max; ++m) {
    const PrimeLevel lv(c.p, m);
    const ZpmRing R(lv);
    ojson L;
    L["m"] = m;
    for (const BaseSpec& base : {tilde, s0}) {
      IntegralIsoCertificate cert = integral_iso_check(base, lv, c.D, c.K);
      L[std::string("integral_iso_") + flavor_name(base.flavor)] = {{"ok", cert.ok}, {"blocks", cert.blocks_checked}};
      if (!cert.ok) {
        integral_iso = false;
        if (cert.detail.find("kappa o d") != std::string::npos) kappa_commutes = false;
        res.fail(std::string(flavor_name(base.flavor)) + " m=" + std::to_string(m) + ": " + cert.detail);
      }
    }
    // kappa(theta) = theta_m
    std::vector<MWTerm> th;
    for (int i = 0; i < c.r; ++i) th.push_back({std::vector<i64>(c.n, 0), Mask{1} << i, 1});
    if (!(kappa(th, lv, tilde, 1) == theta(lv, tilde))) {
      kappa_theta = false;
      res.fail("kappa(theta) != theta at m=" + std::to_string(m));
    }
    // cohomology of the MW theta-quotient against the S0 slice
    std::vector<std::vector<int>> mw(c.n + 1);
    for_each_integral_weight(s0, c.D, c.p, [&](const Weight& w) {
      for (auto& h : cohomology(mw_block_complex(make_mw_block(s0, lv, w), R)))
        mw[h.degree].insert(mw[h.degree].end(), h.invariant_factors.begin(), h.invariant_factors.end());
    });
    for (auto& f : mw) std::sort(f.begin(), f.end(), std::greater<>());
    SliceCohomology H = slice_cohomology(s0, lv, c.K, c.block_cap);
    ojson per = ojson::array();
    for (int q = 0; q <= c.n; ++q) {
      std::vector<int> drw = H.integral[q];
      drw.insert(drw.end(), H.fractional[q].begin(), H.fractional[q].end());
      std::sort(drw.begin(), drw.end(), std::greater<>());
      bool eq = drw == mw[q];
      per.push_back({{"degree", q}, {"mw", mw[q]}, {"drw", drw}, {"equal", eq}});
      if (!eq) {
        mod_pm_iso = false;
        res.fail("invariant factors differ at m=" + std::to_string(m) + " degree " + std::to_string(q));
      }
    }
    L["mod_pm_iso"] = per;
    if (!H.skipped.empty()) L["skipped_blocks"] = H.skipped;
    levels.push_back(L);
  }
  res.details["kappa_commutes"] = kappa_commutes;
  res.details["integral_iso"] = integral_iso;
  res.details["kappa_theta"] = kappa_theta;
  res.details["mod_pm_iso"] = mod_pm_iso;
  res.details["levels"] = levels;
  return res;
}

inline SuiteResult suite_monodromy(const RunConfig& c) {
  SuiteResult res{"monodromy"};
  const BaseSpec tilde(c.n, c.r, Flavor::QuotientTrivialBase);
  ojson levels = ojson::array();
  for (int m = 1; m <= c.m_max; ++m) {
    const PrimeLevel lv(c.p, m);
    const ZpmRing R(lv);
    bool agree = true, nilpotent = true, zero = true, nu_ok = true, steen_ok = true, filt_ok = true, res_ok = true;
    int index = 1;
    std::vector<SparseMatrix> N(c.n + 1);
    std::vector<int> off(c.n + 1, 0);
    std::vector<std::string> skipped;
    std::vector<std::vector<int>> gr_dims(c.n + 1, std::vector<int>(c.r + 1, 0));
    for_each_weight(tilde, lv, c.K, [&](const Weight& k) {
      WeightBlock W = make_weight_block(tilde, lv, k);
      if (c.block_cap > 0 && W.total_dim() > c.block_cap) {
        skipped.push_back(k.render());
        return;
      }
      for (int q = 0; q <= c.n; ++q)
        for (auto& P : W.bases[q]->labels) ++gr_dims[q][P.log_count()];
      MonodromyBlock M = monodromy_block(c.n, c.r, lv, k, c.seed);
      if (!M.agree) {
        agree = false;
        res.fail("N mismatch at m=" + std::to_string(m) + " weight " + k.render());
      }
      if (!M.nilpotent) {
        nilpotent = false;
        res.fail("N^r != 0 at m=" + std::to_string(m) + " weight " + k.render());
      }
      if (!M.zero) zero = false;
      for (std::size_t q = 0; q < M.N_conn.size(); ++q) {
        const ModMatrix& Nq = M.N_conn[q];
        int idx = 1;
        nilpotent_with_index(Nq, M.h_s0[q], c.r, R, &idx);
        index = std::max(index, idx);
        for (int i = 0; i < Nq.rows; ++i)
          for (int j = 0; j < Nq.cols; ++j) {
            i64 v = mod_reduce(Nq(i, j), ipow(c.p, M.h_s0[q][i]));
            if (v != 0) N[q].push_back({off[q] + i, off[q] + j, v});
          }
        off[q] += Nq.rows;
      }
      ThetaBlocks T = make_theta_blocks(c.n, c.r, lv, k);
      SteenbrinkBlock B = build_B_block(T, R);
      if (!nu_anticommutes(B)) {
        nu_ok = false;
        res.fail("nu does not anticommute with D at weight " + k.render());
      }
      std::string why;
      if (!ses_is_exact(steenbrink_ses(B), &why)) {
        steen_ok = false;
        res.fail("Steenbrink SES not exact at weight " + k.render() + ": " + why);
      }
      for (int q = 0; q <= c.n; ++q)
        for (int j = 0; j <= c.r; ++j)
          if (!certify_filtration_block(tilde, lv, k, q, j, &why)) {
            filt_ok = false;
            res.fail(why);
          }
      for (int j = 1; j <= c.r; ++j) {
        ResidueCheck rc = residue_check_block(W, j, lv);
        if (!rc.ok) {
          res_ok = false;
          res.fail("residue j=" + std::to_string(j) + " " + rc.detail);
        }
      }
    });
    if (c.r == 1 && !zero) res.fail("N != 0 in the smooth case at m=" + std::to_string(m));
    ojson gr = ojson::array();
    for (auto& row : gr_dims) gr.push_back(row);
    ojson Nj = ojson::array();
    for (int q = 0; q <= c.n; ++q) Nj.push_back({{"degree", q}, {"size", off[q]}, {"entries", sparse_to_json(N[q])}});
    ojson L = {{"m", m},
               {"N_matrix", Nj},
               {"nilpotency_index", index},
               {"N_zero", zero},
               {"connecting_equals_nu", agree},
               {"nilpotent", nilpotent},
               {"nu_anticommutes", nu_ok},
               {"steenbrink_ses_exact", steen_ok},
               {"filtration_certified", filt_ok},
               {"residue_iso", res_ok},
               {"filtration_dims", gr}};
    if (m >= 2) {
      // Phi and restriction from level m to level m-1
      bool phi_ok = true, theta_phi = true, n_res = true;
      int blocks = 0, commute = 0, twisted = 0;
      for_each_weight(tilde, lv, c.K, [&](const Weight& k) {
        if (c.block_cap > 0 && make_weight_block(tilde, lv, k).total_dim() > c.block_cap) return;
        LevelPairCheck lp = level_pair_block(c.n, c.r, lv, k, c.seed);
        ++blocks;
        commute += lp.n_phi_commute ? 1 : 0;
        twisted += lp.n_phi_p_twisted ? 1 : 0;
        if (!lp.phi_well_defined || !lp.phi_chain) {
          phi_ok = false;
          res.fail("Phi at m=" + std::to_string(m) + " weight " + k.render() + ": " + lp.detail);
        }
        if (!lp.theta_phi) {
          theta_phi = false;
          res.fail("Theta Phi at m=" + std::to_string(m) + " weight " + k.render() + ": " + lp.detail);
        }
        if (!lp.n_restrict) {
          n_res = false;
          res.fail("N and restriction at m=" + std::to_string(m) + " weight " + k.render() + ": " + lp.detail);
        }
      });
      L["phi_chain_map"] = phi_ok;
      L["theta_phi_commute"] = theta_phi;
      L["N_restrict_commute"] = n_res;
      L["N_phi"] = {{"blocks", blocks}, {"commute", commute}, {"p_twisted", twisted}};
    }
    if (!skipped.empty()) L["skipped_blocks"] = skipped;
    levels.push_back(L);
  }
  res.details["levels"] = levels;
  return res;
}

inline ojson gauge_to_json(const GaugeReport& g, bool certified) {
  return {{"epsilon", rational_string(g.epsilon)}, {"C", rational_string(g.C)}, {"within_cap", g.within_cap}, {"terms", g.terms}, {"certified", certified}};
}

inline SuiteResult suite_gauge(const RunConfig& c) {
  SuiteResult res{"gauge"};
  const BaseSpec base(c.n, c.r, Flavor::PolyTrivialBase);
  const PrimeLevel top(c.p, c.m_max);
  std::vector<std::pair<std::string, std::vector<DRWElement>>> fams;
  {
    std::vector<DRWElement> f;
    for (i64 a = 0; a <= c.D; ++a) {
      std::vector<i64> e(c.n, 0);
      e[0] = a;
      f.push_back(kappa({MWTerm{e, 0, 1}}, top, base, 0));
    }
    fams.push_back({"kappa_T1_powers", f});
  }
  {
    std::vector<DRWElement> f;
    DRWElement x = unit_element(PrimeLevel(c.p, 1), base);
    for (int s = 0; s <= c.m_max - 1; ++s) {
      f.push_back(x);
      x = verschiebung(x);
    }
    fams.push_back({"V_powers_of_1", f});
  }
  {
    std::vector<DRWElement> f;
    DRWElement x = teich_monomial(top, base, std::vector<i64>(c.n, 1));
    if (c.m_max >= 2) {
      std::vector<i64> e(c.n, 0);
      e[0] = 1;
      x = add(x, verschiebung(teich_monomial(PrimeLevel(c.p, c.m_max - 1), base, e)));
    }
    for (int t = 0; t < c.m_max; ++t) {
      f.push_back(x);
      if (x.level().m() >= 2) x = frobenius(x);
    }
    fams.push_back({"F_iterates", f});
  }
  for (auto& [name, fam] : fams) {
    GaugeReport g = gauge_fit(fam, c.gauge);
    bool cert = gauge_certifies(fam, g.epsilon, g.C, c.gauge.norm);
    res.details[name] = gauge_to_json(g, cert);
    if (!cert) res.fail(name + ": fitted bound does not hold on every term");
  }
  return res;
}

// ---------------------------------------------------------------------------

struct RunReport {
  ojson json;
  bool pass = true;
};

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void feed(const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
};

// hash of the block-by-block serialization (labels, then local d triplets), streamed
inline ojson slice_summary(const BaseSpec& base, const PrimeLevel& lv, i64 K, int block_cap) {
  Fnv1a h;
  std::vector<int> dims(top_degree(base) + 1, 0);
  std::vector<std::string> skipped;
  std::size_t blocks = 0;
  h.feed(flavor_name(base.flavor) + " p=" + std::to_string(lv.p()) + " m=" + std::to_string(lv.m()) + " n=" + std::to_string(base.n) +
         " r=" + std::to_string(base.r) + " K=" + std::to_string(K) + "\n");
  for_each_block(base, lv, K, [&](const WeightBlock& W) {
    ++blocks;
    std::ostringstream os;
    os << "block " << W.weight.render() << " a=" << W.annihilator << "\n";
    for (int q = 0; q <= top_degree(base); ++q) {
      dims[q] += W.dim(q);
      os << " q" << q << ":";
      for (auto& P : W.bases[q]->labels) {
        os << " [";
        for (auto& I : P.teich) {
          os << "(";
          for (int i : I) os << i + 1 << ",";
          os << ")";
        }
        os << ";";
        for (auto& I : P.logs)
          for (int i : I) os << i + 1 << ",";
        os << "]";
      }
      os << "\n";
      if (q < top_degree(base)) {
        const ModMatrix& M = W.d[q];
        os << " d" << q << ":";
        for (int i = 0; i < M.rows; ++i)
          for (int j = 0; j < M.cols; ++j)
            if (M(i, j) != 0) os << " " << i << "," << j << "," << M(i, j);
        os << "\n";
      }
    }
    h.feed(os.str());
  }, SliceOptions{block_cap}, &skipped);
  ojson e = {{"flavor", flavor_name(base.flavor)}, {"m", lv.m()}, {"blocks", blocks}, {"dims", dims}, {"hash", hex64(h.h)}};
  if (!skipped.empty()) e["skipped_blocks"] = skipped;
  return e;
}

inline ojson slice_hashes(const RunConfig& c) {
  ojson a = ojson::array();
  std::vector<BaseSpec> bases = detail::quotient_bases(c);
  if (c.r >= 1) bases.insert(bases.begin(), BaseSpec(c.n, c.r, Flavor::PolyTrivialBase));
  for (auto& base : bases)
    for (int m = 1; m <= c.m_max; ++m) a.push_back(slice_summary(base, PrimeLevel(c.p, m), c.K, c.block_cap));
  return a;
}

inline RunReport run(const RunConfig& c) {
  validate_config(c);
  RunReport rep;
  ojson& j = rep.json;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_to_json(c);
  j["slices"] = slice_hashes(c);
  static const std::map<std::string, std::function<SuiteResult(const RunConfig&)>> table = {
      {"relations", suite_relations}, {"exactness", suite_exactness}, {"decomposition", suite_decomposition},
      {"comparison", suite_comparison}, {"monodromy", suite_monodromy}, {"gauge", suite_gauge}};
  ojson suites = ojson::object();
  for (const auto& name : all_suites()) {
    if (std::find(c.suites.begin(), c.suites.end(), name) == c.suites.end()) continue;
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult s = table.at(name)(c);
    s.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ojson o;
    o["pass"] = s.pass;
    o["defects"] = s.defects;
    o["details"] = s.details;
    if (c.timing) o["timing_ms"] = s.millis;
    suites[name] = o;
    rep.pass = rep.pass && s.pass;
  }
  j["suites"] = suites;
  j["pass"] = rep.pass;
  return rep;
}

// ---------------------------------------------------------------------------
// table output

inline std::string p_power_list(i64 p, const ojson& factors) {
  if (factors.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    s += (i ? " " : "") + std::to_string(p);
    int e = factors[i].get<int>();
    if (e != 1) s += "^" + std::to_string(e);
  }
  return s;
}

inline std::string render_table(const ojson& report) {
  std::ostringstream os;
  const i64 p = report["config"]["p"].get<i64>();
  os << "suite            result\n";
  for (auto it = report["suites"].begin(); it != report["suites"].end(); ++it) {
    os << std::left << std::setw(17) << it.key() << (it.value()["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
    for (auto& d : it.value()["defects"]) os << "    " << d.get<std::string>() << "\n";
  }
  if (report["suites"].contains("decomposition")) {
    os << "\ncohomology (invariant factors as p-powers)\n";
    for (auto& t : report["suites"]["decomposition"]["details"]["cohomology"]) {
      os << t["flavor"].get<std::string>() << " m=" << t["m"].get<int>() << "\n";
      for (auto& row : t["cohomology"]) os << "  H^" << row["degree"].get<int>() << ": " << p_power_list(p, row["invariant_factors"]) << "\n";
    }
  }
  if (report["suites"].contains("comparison")) {
    os << "\nlog-MW vs S0 slice\n";
    for (auto& L : report["suites"]["comparison"]["details"]["levels"])
      for (auto& row : L["mod_pm_iso"])
        os << "  m=" << L["m"].get<int>() << " H^" << row["degree"].get<int>() << ": " << p_power_list(p, row["mw"]) << " | "
           << p_power_list(p, row["drw"]) << (row["equal"].get<bool>() ? "" : "  (differ)") << "\n";
  }
  if (report["suites"].contains("gauge")) {
    os << "\ngauge\n";
    auto& g = report["suites"]["gauge"]["details"];
    for (auto it = g.begin(); it != g.end(); ++it)
      os << "  " << std::left << std::setw(18) << it.key() << "eps=" << it.value()["epsilon"].get<std::string>()
         << " C=" << it.value()["C"].get<std::string>() << "\n";
  }
  os << "\noverall: " << (report["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
  return os.str();
}

}  // namespace logdrw
