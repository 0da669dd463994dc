#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigtan/bigcore.hpp"
#include "bigtan/conns.hpp"
#include "bigtan/dfield.hpp"
#include "bigtan/gstruct.hpp"
#include "bigtan/horizon.hpp"
#include "bigtan/metrics.hpp"

namespace bigtan {

inline constexpr const char* kVersion = "0.1.0";

/// Input problem in a scene file or on the command line; the message carries the location.
class SceneError : public Error {
 public:
  using Error::Error;
};

/// One `key[i,j] = value` line.
struct SceneEntry {
  std::string value;
  int line = 0;
};

/// Expression tables of a scene, validated against the dimension. Components are stored as
/// strings in row-major order; unspecified components are "0".
struct SceneFile {
  std::string path = "<memory>";
  std::string name;
  int m = 1;
  std::uint64_t seed = 1;
  int samples = 10;
  std::vector<std::string> suites;  // empty: every suite whose data is present
  std::optional<std::vector<std::string>> base_metric;        // g[i,j], m*m
  std::optional<std::vector<std::string>> linear_connection;  // Gamma[a,b,c], m^3
  std::optional<std::string> lagrangian;
  std::map<std::string, std::vector<std::string>> vector_fields;  // base fields, m components
  std::map<std::string, std::string> functions;                   // integrability test functions
  std::optional<std::pair<std::vector<std::string>, std::vector<std::string>>> horizontal;  // t, tau
  std::map<std::string, std::map<int, std::string>> triple;  // S/P/Q flat-index overrides
  struct DoubleFieldSpec {
    std::vector<std::string> sigma, psi;
    std::string density = "0";
  };
  std::optional<DoubleFieldSpec> double_field;
  std::optional<double> default_tol;
  std::map<std::string, double> suite_tol;
  std::optional<Box> box;
  std::size_t mc_samples = 2000;
  int gauss_nodes = 4;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"canonical", "triple",    "integrability", "connections",
                                              "metric",    "curvature", "dfield",        "action"};
  return names;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> r;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) r.push_back(trim(cur));
  return r;
}

struct Key {
  std::string name;
  std::vector<int> idx;  // 1-based as written
};

inline Key parse_key(const std::string& raw, const std::string& where) {
  Key k;
  const auto br = raw.find('[');
  k.name = trim(raw.substr(0, br));
  if (k.name.empty()) throw SceneError(where + ": empty key");
  for (char ch : k.name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'))
      throw SceneError(where + ": invalid key '" + k.name + "'");
  if (br == std::string::npos) return k;
  const auto close = raw.find(']', br);
  if (close == std::string::npos || !trim(raw.substr(close + 1)).empty())
    throw SceneError(where + ": malformed index in '" + raw + "'");
  for (const auto& part : split(raw.substr(br + 1, close - br - 1), ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw SceneError(where + ": index '" + part + "' is not an integer");
    k.idx.push_back(v);
  }
  return k;
}

inline double to_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) throw SceneError(where + ": '" + s + "' is not a number");
  return v;
}

inline long long to_int(const std::string& s, const std::string& where, long long lo, long long hi) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw SceneError(where + ": '" + s + "' is not an integer");
  if (v < lo || v > hi)
    throw SceneError(where + ": " + s + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

/// Row-major offset of 1-based indices, each in [1, bound].
inline int flat_index(const Key& k, std::size_t rank, int bound, const std::string& where) {
  if (k.idx.size() != rank)
    throw SceneError(where + ": '" + k.name + "' needs " + std::to_string(rank) + " indices");
  int off = 0;
  for (int i : k.idx) {
    if (i < 1 || i > bound)
      throw SceneError(where + ": index " + std::to_string(i) + " of '" + k.name + "' is outside [1, " +
                       std::to_string(bound) + "]");
    off = off * bound + (i - 1);
  }
  return off;
}

/// Fill the partner of each off-diagonal entry that was given alone: sign +1 mirrors, -1 negates.
inline void complete_pairs(std::vector<std::string>& a, const std::set<int>& given, int n, int sign) {
  for (int f : given) {
    const int i = f / n, j = f % n, t = j * n + i;
    if (i != j && !given.count(t)) a[t] = sign > 0 ? a[f] : "-(" + a[f] + ")";
  }
}

/// Every expression must parse for dimension m; errors carry the line.
inline void check_expr(const std::string& s, int m, const std::string& where) {
  try {
    (void)parse_expr(s, m);
  } catch (const Error& e) {
    throw SceneError(where + ": " + e.what());
  }
}

}  // namespace detail

/// Parse scene text. Grammar: `# comment`, `[section]`, `key = value`, `key[i] = value`,
/// `key[i,j] = value`, `key[i,j,k] = value`; indices are 1-based.
inline SceneFile parse_scene(const std::string& text, const std::string& path = "<memory>") {
  using namespace detail;
  SceneFile s;
  s.path = path;
  struct Raw {
    std::string section;
    Key key;
    SceneEntry entry;
    std::string where;
  };
  std::vector<Raw> raws;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int ln = 0;
  static const std::set<std::string> known{"scene",    "base_metric", "linear_connection", "lagrangian",
                                           "vector_fields", "functions", "horizontal", "triple",
                                           "double_field", "tolerance", "box"};
  while (std::getline(in, line)) {
    ++ln;
    const std::string where = path + ":" + std::to_string(ln);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SceneError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known.count(section)) throw SceneError(where + ": unknown section [" + section + "]");
      if (!seen_sections.insert(section).second) throw SceneError(where + ": duplicate section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SceneError(where + ": expected 'key = value'");
    if (section.empty()) throw SceneError(where + ": entry outside a section");
    const std::string keytext = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw SceneError(where + ": empty value");
    Key k = parse_key(keytext, where);
    std::string canon = section + "/" + k.name;
    for (int i : k.idx) canon += "," + std::to_string(i);
    if (!seen_keys.insert(canon).second) throw SceneError(where + ": duplicate key '" + keytext + "'");
    raws.push_back({section, std::move(k), {value, ln}, where});
  }

  // the dimension comes first since every index is checked against it
  bool have_m = false;
  for (const auto& r : raws)
    if (r.section == "scene" && r.key.name == "m" && r.key.idx.empty()) {
      s.m = static_cast<int>(to_int(r.entry.value, r.where, 1, 4));
      have_m = true;
    }
  if (!have_m) throw SceneError(path + ": missing 'm' in [scene]");
  const int m = s.m, n = 3 * m;

  std::vector<std::string> g(m * m, "0"), gamma(m * m * m, "0"), t(m * m, "0"), tau(m * m, "0"),
      sigma(m * m, "0"), psi(m * m, "0");
  std::set<int> g_given, sigma_given, psi_given;
  std::map<std::string, std::set<int>> triple_given;
  bool have_sigma = false;
  std::map<std::string, std::map<int, std::string>> vf;
  std::vector<std::optional<double>> lo(n), hi(n);
  std::optional<double> lo_all, hi_all;

  for (const auto& r : raws) {
    const std::string& v = r.entry.value;
    const std::string& w = r.where;
    const Key& k = r.key;
    auto no_index = [&] {
      if (!k.idx.empty()) throw SceneError(w + ": '" + k.name + "' takes no index");
    };
    auto unknown = [&] { throw SceneError(w + ": unknown key '" + k.name + "' in [" + r.section + "]"); };
    if (r.section == "scene") {
      no_index();
      if (k.name == "m") continue;
      if (k.name == "name") s.name = v;
      else if (k.name == "seed") s.seed = static_cast<std::uint64_t>(to_int(v, w, 0, (1LL << 62)));
      else if (k.name == "samples") s.samples = static_cast<int>(to_int(v, w, 1, 100000));
      else if (k.name == "suites") {
        for (const auto& name : split(v, ',')) {
          if (std::find(suite_names().begin(), suite_names().end(), name) == suite_names().end())
            throw SceneError(w + ": unknown suite '" + name + "'");
          s.suites.push_back(name);
        }
      } else unknown();
    } else if (r.section == "base_metric") {
      if (k.name != "g") unknown();
      const int f = flat_index(k, 2, m, w);
      check_expr(v, m, w);
      g[f] = v;
      g_given.insert(f);
    } else if (r.section == "linear_connection") {
      if (k.name != "Gamma") unknown();
      check_expr(v, m, w);
      gamma[flat_index(k, 3, m, w)] = v;
    } else if (r.section == "lagrangian") {
      if (k.name != "L") unknown();
      no_index();
      check_expr(v, m, w);
      s.lagrangian = v;
    } else if (r.section == "vector_fields") {
      check_expr(v, m, w);
      vf[k.name][flat_index(k, 1, m, w)] = v;
    } else if (r.section == "functions") {
      no_index();
      check_expr(v, m, w);
      s.functions[k.name] = v;
    } else if (r.section == "horizontal") {
      if (k.name != "t" && k.name != "tau") unknown();
      check_expr(v, m, w);
      (k.name == "t" ? t : tau)[flat_index(k, 2, m, w)] = v;
      if (!s.horizontal) s.horizontal.emplace();
    } else if (r.section == "triple") {
      if (k.name != "S" && k.name != "P" && k.name != "Q") unknown();
      check_expr(v, m, w);
      const int f = flat_index(k, 2, n, w);
      s.triple[k.name][f] = v;
      triple_given[k.name].insert(f);
    } else if (r.section == "double_field") {
      if (!s.double_field) s.double_field.emplace();
      check_expr(v, m, w);
      if (k.name == "sigma") {
        const int f = flat_index(k, 2, m, w);
        sigma[f] = v;
        sigma_given.insert(f);
        have_sigma = true;
      } else if (k.name == "psi") {
        const int f = flat_index(k, 2, m, w);
        psi[f] = v;
        psi_given.insert(f);
      } else if (k.name == "density") {
        no_index();
        s.double_field->density = v;
      } else unknown();
    } else if (r.section == "tolerance") {
      no_index();
      const double tol = to_double(v, w);
      if (!(tol > 0)) throw SceneError(w + ": tolerance must be positive");
      if (k.name == "default") s.default_tol = tol;
      else if (std::find(suite_names().begin(), suite_names().end(), k.name) != suite_names().end())
        s.suite_tol[k.name] = tol;
      else unknown();
    } else if (r.section == "box") {
      if (k.name == "lo" || k.name == "hi") {
        auto& arr = k.name == "lo" ? lo : hi;
        auto& all = k.name == "lo" ? lo_all : hi_all;
        if (k.idx.empty()) all = to_double(v, w);
        else arr[flat_index(k, 1, n, w)] = to_double(v, w);
      } else if (k.name == "mc_samples") {
        no_index();
        s.mc_samples = static_cast<std::size_t>(to_int(v, w, 2, 10000000));
      } else if (k.name == "gauss_nodes") {
        no_index();
        s.gauss_nodes = static_cast<int>(to_int(v, w, 2, 8));
      } else unknown();
    }
  }

  if (!g_given.empty()) {
    complete_pairs(g, g_given, m, +1);
    s.base_metric = g;
  }
  if (seen_sections.count("linear_connection")) s.linear_connection = gamma;
  if (s.horizontal) s.horizontal = std::make_pair(t, tau);
  for (auto& [name, comps] : vf) {
    std::vector<std::string> c(m, "0");
    for (auto& [i, e] : comps) c[i] = e;
    s.vector_fields[name] = c;
  }
  for (const char* nm : {"P", "Q"}) {
    auto it = s.triple.find(nm);
    if (it == s.triple.end()) continue;
    for (int f : triple_given[nm]) {
      const int i = f / n, j = f % n, tr = j * n + i;
      if (i != j && !triple_given[nm].count(tr))
        it->second[tr] = std::string(nm) == "Q" ? it->second[f] : "-(" + it->second[f] + ")";
    }
  }
  if (s.double_field) {
    if (!have_sigma) throw SceneError(path + ": [double_field] needs sigma components");
    complete_pairs(sigma, sigma_given, m, +1);
    complete_pairs(psi, psi_given, m, -1);
    s.double_field->sigma = sigma;
    s.double_field->psi = psi;
  }
  if (seen_sections.count("box")) {
    Box b;
    for (int i = 0; i < n; ++i) {
      const auto l = lo[i] ? lo[i] : lo_all;
      const auto h = hi[i] ? hi[i] : hi_all;
      if (!l || !h) throw SceneError(path + ": [box] needs lo and hi for every chart variable");
      if (!(*h > *l)) throw SceneError(path + ": [box] needs hi > lo");
      b.lo.push_back(*l);
      b.hi.push_back(*h);
    }
    s.box = b;
  }
  for (const auto& name : s.suites) {
    const bool ok = (name != "metric" || s.base_metric) && (name != "curvature" || s.base_metric || s.lagrangian) &&
                    (name != "dfield" || s.double_field) && (name != "action" || (s.double_field && s.box));
    if (!ok) throw SceneError(path + ": suite '" + name + "' lacks the sections it needs");
  }
  return s;
}

inline SceneFile load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Objects built from a scene.

/// Horizontal bundle of a scene: [horizontal], else the linear connection, else the Levi-Civita
/// connection of the base metric, else the spray of the Lagrangian, else the flat bundle.
inline HorizontalBundle scene_horizontal(const SceneFile& s) {
  if (s.horizontal) return HorizontalBundle::from_strings(s.m, s.horizontal->first, s.horizontal->second);
  if (s.linear_connection) return from_linear_connection(s.m, *s.linear_connection);
  if (s.base_metric) return sasaki_metric(s.m, *s.base_metric).horizontal();
  if (s.lagrangian) return spray_from_lagrangian(s.m, *s.lagrangian).H;
  return HorizontalBundle::flat(s.m);
}

/// Canonical triple with the scene's component overrides.
inline TriplePack scene_triple(const SceneFile& s) {
  TriplePack T = canonical_triple(s.m);
  const ChartPoint origin(std::vector<double>(s.m, 0.0), std::vector<double>(s.m, 0.0), std::vector<double>(s.m, 0.0));
  for (const auto& [name, over] : s.triple) {
    TensorField& f = name == "S" ? T.S : name == "P" ? T.P : T.Q;
    const TensorValue v = f.value(origin);
    std::vector<std::string> comps;
    for (std::size_t i = 0; i < v.size(); ++i) comps.push_back(detail::num(v.flat(i)));
    for (const auto& [i, e] : over) comps[i] = e;
    f = TensorField::from_strings(f.signature(), s.m, comps);
  }
  return T;
}

inline DoubleField scene_double_field(const SceneFile& s) {
  if (!s.double_field) throw SceneError(s.path + ": no [double_field] section");
  return DoubleField::from_strings(scene_horizontal(s), s.double_field->sigma, s.double_field->psi,
                                   s.double_field->density);
}

inline TensorField diagonal_metric_field(int m) {
  const int n = 3 * m;
  std::vector<std::string> c(n * n, "0");
  for (int i = 0; i < n; ++i) c[i * n + i] = "1";
  return TensorField::from_strings({Slot::down, Slot::down}, m, c);
}

// ---------------------------------------------------------------------------
// Running suites.

struct RunOptions {
  std::vector<std::string> suites;  // empty: the scene's selection
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<double> tol;  // overrides every scene tolerance
};

struct RunResult {
  nlohmann::ordered_json json;
  bool pass = true;
};

namespace detail {

/// Re-judge residual checks (those with a positive tolerance) against an override.
inline Report retol(const Report& r, std::optional<double> tol) {
  if (!tol) return r;
  Report out(r.suite());
  for (const auto& c : r.checks()) {
    if (c.tol > 0) {
      out.record(c.name, c.max_residual, *tol);
      if (!c.note.empty()) out.annotate(c.name, c.note);
    } else {
      out.expect(c.name, c.pass, c.max_residual, c.note);
    }
  }
  return out;
}

inline std::vector<ChartPoint> sample_points(int m, std::uint64_t seed, int n) {
  PointSampler ps(seed);
  std::vector<ChartPoint> pts;
  for (int i = 0; i < n; ++i) pts.push_back(ps.point(m));
  return pts;
}

inline std::vector<Expr> test_functions(const SceneFile& s) {
  std::vector<Expr> fs;
  for (const auto& [name, e] : s.functions) fs.push_back(parse_expr(e, s.m));
  if (fs.empty()) fs = default_test_functions(s.m);
  return fs;
}

}  // namespace detail

/// Suites that run by default: those whose data the scene provides.
inline std::vector<std::string> default_suites(const SceneFile& s) {
  std::vector<std::string> r{"canonical", "triple", "integrability", "connections"};
  if (s.base_metric) r.push_back("metric");
  if (s.base_metric || s.lagrangian) r.push_back("curvature");
  if (s.double_field) r.push_back("dfield");
  if (s.double_field && s.box) r.push_back("action");
  return r;
}

/// One suite. Unknown names and missing data are input errors.
inline nlohmann::ordered_json run_suite(const SceneFile& s, const std::string& name, std::uint64_t seed, int n,
                                        std::optional<double> tol, bool& pass) {
  const int m = s.m;
  std::optional<double> t = tol;
  if (!t) {
    auto it = s.suite_tol.find(name);
    if (it != s.suite_tol.end()) t = it->second;
    else t = s.default_tol;
  }
  nlohmann::ordered_json extra;
  Report r(name);
  if (name == "canonical") {
    if (m > 3) throw SceneError("suite 'canonical' supports m <= 3");
    r = detail::retol(verify_section2(m, seed, n), t);
  } else if (name == "triple") {
    const TriplePack T = scene_triple(s);
    Report ax = triple_axiom_check(T, seed, n, t.value_or(1e-9));
    r.include(ax, "");
    // the adapted frame exists only where the axioms hold
    if (ax.all_pass()) {
      const std::string frame = "adapted frame reconstructs P and Q";
      try {
        double fr = 0.0;
        for (const auto& p : detail::sample_points(m, seed + 1, n)) fr = std::max(fr, frame_residual(T, adapted_frame(T, p)));
        r.record(frame, fr, t.value_or(1e-8));
      } catch (const Error& e) {
        r.expect(frame, false, 0.0, e.what());
      }
    }
  } else if (name == "integrability") {
    r = integrability_check(scene_triple(s), detail::test_functions(s), canonical_delta(m), seed, n, t.value_or(1e-9));
  } else if (name == "connections") {
    const HorizontalBundle H = scene_horizontal(s);
    const TensorField gD = s.base_metric ? sasaki_metric(m, *s.base_metric).field() : diagonal_metric_field(m);
    r.include(verify_section4(H, gD, seed, n, t.value_or(1e-8)), "");
    if (s.lagrangian) {
      const Spray sp = spray_from_lagrangian(m, *s.lagrangian);
      const TensorField Q = lie_of_S(sp.field.field());
      for (const auto& p : detail::sample_points(m, seed + 2, n)) {
        r.record("spray: i(Gamma)theta + dE = 0", spray_residual(sp, p), t.value_or(1e-8));
        r.record("second-order field: Q^3 = Q", cubic_residual(Q, p), t.value_or(1e-10));
      }
    }
  } else if (name == "metric") {
    if (!s.base_metric) throw SceneError("suite 'metric' needs [base_metric]");
    r.include(canonical_metric_connection(sasaki_metric(m, *s.base_metric), seed, n, t.value_or(1e-8)).report, "");
  } else if (name == "curvature") {
    if (!s.base_metric && !s.lagrangian) throw SceneError("suite 'curvature' needs [base_metric] or [lagrangian]");
    if (s.base_metric)
      r.include(detail::retol(curvature_identity_suite(sasaki_metric(m, *s.base_metric), seed, n), t), "sasaki: ");
    if (s.lagrangian) {
      const BigMetric g = lagrangian_metric(m, *s.lagrangian);
      r.include(detail::retol(curvature_identity_suite(g, seed, n), t), "lagrangian: ");
      const TensorField C = cartan_tensor(g);
      for (const auto& p : detail::sample_points(m, seed + 3, n)) {
        const TensorValue c = C.value(p);
        double asym = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
          std::vector<int> idx = c.index(i);
          std::sort(idx.begin(), idx.end());
          asym = std::max(asym, std::fabs(c.flat(i) - c.at(idx)));
        }
        r.record("lagrangian: Cartan tensor totally symmetric", asym, t.value_or(1e-10));
      }
    }
  } else if (name == "dfield") {
    r = verify_double_field(scene_double_field(s), seed, n, t.value_or(1e-8));
  } else if (name == "action") {
    if (!s.double_field || !s.box) throw SceneError("suite 'action' needs [double_field] and [box]");
    const DoubleField F = scene_double_field(s);
    const ActionEstimate mc = action_monte_carlo(F, *s.box, s.mc_samples, seed);
    const ActionEstimate gs = action_gauss(F, *s.box, s.gauss_nodes);
    const double allowed = std::max(3.0 * mc.error + gs.error, 1e-12);
    r.record("action: Monte Carlo within 3 SE of Gauss", std::fabs(mc.value - gs.value), allowed);
    extra["gauss"] = {{"value", gs.value}, {"error", gs.error}, {"nodes", s.gauss_nodes}, {"evaluations", gs.evaluations}};
    extra["monte_carlo"] = {{"value", mc.value}, {"standard_error", mc.error}, {"evaluations", mc.evaluations}};
  } else {
    throw SceneError("unknown suite '" + name + "'");
  }
  Report named(name);
  named.include(r, "");
  pass = named.all_pass();
  nlohmann::ordered_json j = named.to_json();
  if (!extra.is_null()) j["values"] = extra;
  return j;
}

inline RunResult run_suites(const SceneFile& s, const RunOptions& o = {}) {
  std::vector<std::string> which = o.suites.empty() ? (s.suites.empty() ? default_suites(s) : s.suites) : o.suites;
  const std::uint64_t seed = o.seed.value_or(s.seed);
  const int n = o.samples.value_or(s.samples);
  RunResult res;
  res.json["tool"] = "bigtan";
  res.json["version"] = kVersion;
  res.json["scene"] = s.name.empty() ? s.path : s.name;
  res.json["m"] = s.m;
  res.json["seed"] = seed;
  res.json["samples"] = n;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& name : which) {
    bool ok = true;
    arr.push_back(run_suite(s, name, seed, n, o.tol, ok));
    res.pass = res.pass && ok;
  }
  res.json["pass"] = res.pass;
  res.json["suites"] = std::move(arr);
  return res;
}

// ---------------------------------------------------------------------------
// Point evaluation.

/// "x=0.1,0.2;y=...;z=..."; omitted groups are zero.
inline ChartPoint parse_point(const std::string& text, int m) {
  std::vector<double> v[3] = {std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  std::set<char> seen;
  for (const auto& group : detail::split(text, ';')) {
    if (group.empty()) continue;
    const auto eq = group.find('=');
    const std::string key = detail::trim(group.substr(0, eq));
    if (eq == std::string::npos || key.size() != 1 || std::string("xyz").find(key[0]) == std::string::npos)
      throw SceneError("point: expected groups 'x=...', 'y=...', 'z=...' in '" + text + "'");
    if (!seen.insert(key[0]).second) throw SceneError("point: repeated group '" + key + "'");
    const auto vals = detail::split(group.substr(eq + 1), ',');
    if (static_cast<int>(vals.size()) != m)
      throw SceneError("point: group '" + key + "' needs " + std::to_string(m) + " values");
    auto& dst = v[std::string("xyz").find(key[0])];
    for (int i = 0; i < m; ++i) dst[i] = detail::to_double(vals[i], "point");
  }
  return ChartPoint(v[0], v[1], v[2]);
}

inline const std::vector<std::string>& object_names() {
  static const std::vector<std::string> names{
      "lambda", "varpi", "P", "Q", "S", "U", "ev", "E", "gV", "omegaV", "FV", "g_pair",
      "triple.S", "triple.P", "triple.Q", "H.t", "H.tau", "H.curvature", "spray.eta", "sasaki.G",
      "lagrangian.G", "lagrangian.cartan", "dfield.sigma", "dfield.psi", "dfield.G", "dfield.phi",
      "dfield.rho", "dfield.action_density", "complete_lift.<name>"};
  return names;
}

namespace detail {

inline nlohmann::ordered_json dump_tensor(const TensorValue& v) {
  nlohmann::ordered_json j;
  auto sig = nlohmann::ordered_json::array();
  for (Slot sl : v.signature()) sig.push_back(sl == Slot::up ? "up" : "down");
  j["frame"] = frame_name(v.frame());
  j["basis"] = "chart (x, y, z)";
  j["signature"] = sig;
  j["shape"] = std::vector<int>(v.rank(), v.dim());
  std::vector<double> c;
  for (std::size_t i = 0; i < v.size(); ++i) c.push_back(v.flat(i));
  j["components"] = c;
  return j;
}

inline nlohmann::ordered_json dump_matrix(const Eigen::MatrixXd& M, const std::string& basis) {
  nlohmann::ordered_json j;
  j["frame"] = "natural";
  j["basis"] = basis;
  j["shape"] = {M.rows(), M.cols()};
  std::vector<double> c;
  for (int i = 0; i < M.rows(); ++i)
    for (int k = 0; k < M.cols(); ++k) c.push_back(M(i, k));
  j["components"] = c;
  return j;
}

inline nlohmann::ordered_json dump_scalar(double v) {
  nlohmann::ordered_json j;
  j["frame"] = "natural";
  j["basis"] = "scalar";
  j["shape"] = nlohmann::ordered_json::array();
  j["components"] = {v};
  return j;
}

}  // namespace detail

/// Components of a named object at a point, with frame metadata.
inline nlohmann::ordered_json eval_object(const SceneFile& s, const std::string& name, const ChartPoint& p) {
  const int m = s.m;
  nlohmann::ordered_json body;
  auto canonical = [&](const std::string& nm) -> std::optional<TensorField> {
    const CanonicalPack k = canonical_pack(m);
    static const std::map<std::string, TensorField CanonicalPack::*> fields{
        {"lambda", &CanonicalPack::lambda}, {"varpi", &CanonicalPack::varpi}, {"P", &CanonicalPack::P},
        {"Q", &CanonicalPack::Q},           {"S", &CanonicalPack::S},         {"U", &CanonicalPack::U},
        {"ev", &CanonicalPack::ev},         {"E", &CanonicalPack::E},         {"gV", &CanonicalPack::gV},
        {"omegaV", &CanonicalPack::omegaV}, {"FV", &CanonicalPack::FV},       {"g_pair", &CanonicalPack::g_pair}};
    auto it = fields.find(nm);
    if (it == fields.end()) return std::nullopt;
    return k.*(it->second);
  };
  const std::string mbasis = "m x m, base indices";
  const std::string vbasis = "vertical coordinate frame (d/dy, d/dz)";
  if (auto f = canonical(name)) {
    body = detail::dump_tensor(f->value(p));
  } else if (name == "triple.S" || name == "triple.P" || name == "triple.Q") {
    const TriplePack T = scene_triple(s);
    body = detail::dump_tensor((name == "triple.S" ? T.S : name == "triple.P" ? T.P : T.Q).value(p));
  } else if (name == "H.t" || name == "H.tau") {
    const auto [t, tau] = scene_horizontal(s).values(p);
    body = detail::dump_matrix(name == "H.t" ? t : tau, mbasis);
  } else if (name == "H.curvature") {
    body = detail::dump_tensor(ehresmann_curvature(scene_horizontal(s)).value(p));
  } else if (name == "spray.eta") {
    if (!s.lagrangian) throw SceneError("object 'spray.eta' needs [lagrangian]");
    const Context c(p, 3);
    const auto eta = detail::spray_eta(parse_expr(*s.lagrangian, m), c);
    Eigen::MatrixXd v(m, 1);
    for (int i = 0; i < m; ++i) v(i, 0) = eta[i].value();
    body = detail::dump_matrix(v, "d/dy components");
  } else if (name == "sasaki.G") {
    if (!s.base_metric) throw SceneError("object 'sasaki.G' needs [base_metric]");
    body = detail::dump_tensor(sasaki_metric(m, *s.base_metric).field().value(p));
  } else if (name == "lagrangian.G" || name == "lagrangian.cartan") {
    if (!s.lagrangian) throw SceneError("object '" + name + "' needs [lagrangian]");
    const BigMetric g = lagrangian_metric(m, *s.lagrangian);
    body = detail::dump_tensor(name == "lagrangian.G" ? g.field().value(p) : cartan_tensor(g).value(p));
  } else if (name.rfind("dfield.", 0) == 0) {
    const DoubleField F = scene_double_field(s);
    const std::string what = name.substr(7);
    if (what == "sigma" || what == "psi") {
      const Context c(p, 0);
      const auto sp = F.sigma_psi(c);
      body = detail::dump_matrix(detail::values_of(what == "sigma" ? sp.first : sp.second), mbasis);
    } else if (what == "G") {
      body = detail::dump_matrix(F.vertical_metric().value(p), vbasis);
    } else if (what == "phi") {
      body = detail::dump_matrix(phi_matrix(F.vertical_metric().value(p)), vbasis);
    } else if (what == "rho") {
      body = detail::dump_scalar(scalar_curvature(F, p));
    } else if (what == "action_density") {
      body = detail::dump_scalar(action_integrand(F, p));
    } else {
      throw SceneError("unknown object '" + name + "'");
    }
  } else if (name.rfind("complete_lift.", 0) == 0) {
    const std::string field = name.substr(14);
    auto it = s.vector_fields.find(field);
    if (it == s.vector_fields.end()) throw SceneError("unknown vector field '" + field + "'");
    body = detail::dump_tensor(complete_lift(detail::parse_all(m, it->second)).value(p));
  } else {
    throw SceneError("unknown object '" + name + "'");
  }
  nlohmann::ordered_json j;
  j["object"] = name;
  j["point"] = {{"x", p.x}, {"y", p.y}, {"z", p.z}};
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

}  // namespace bigtan
