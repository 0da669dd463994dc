#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bigtan {

/// One verified identity: the largest residual seen over all sample points.
struct Check {
  std::string name;
  double max_residual = 0.0;
  double tol = 0.0;
  bool pass = true;
  std::string note;
};

/// Ordered list of checks. Recording the same name twice keeps the larger residual,
/// so per-point results merge into one entry regardless of evaluation order.
class Report {
 public:
  Report() = default;
  explicit Report(std::string suite) : suite_(std::move(suite)) {}

  const std::string& suite() const { return suite_; }
  const std::vector<Check>& checks() const { return checks_; }

  /// Residual check: passes iff residual <= tol (NaN fails).
  void record(const std::string& name, double residual, double tol) {
    Check& c = find_or_add(name, tol);
    if (std::isnan(residual) || std::isnan(c.max_residual))
      c.max_residual = std::nan("");
    else
      c.max_residual = std::max(c.max_residual, std::fabs(residual));
    c.pass = !std::isnan(c.max_residual) && c.max_residual <= c.tol;
  }

  /// Expectation check (e.g. a negative control must be flagged): passes iff `ok` held at every point.
  void expect(const std::string& name, bool ok, double residual = 0.0, const std::string& note = "") {
    Check& c = find_or_add(name, 0.0);
    c.max_residual = std::max(c.max_residual, std::isnan(residual) ? 0.0 : std::fabs(residual));
    c.pass = c.pass && ok;
    if (!note.empty()) c.note = note;
  }

  void annotate(const std::string& name, const std::string& note) { find_or_add(name, 0.0).note = note; }

  void merge(const Report& other) {
    for (const auto& c : other.checks_) {
      Check& d = find_or_add(c.name, c.tol);
      if (std::isnan(c.max_residual) || std::isnan(d.max_residual))
        d.max_residual = std::nan("");
      else
        d.max_residual = std::max(d.max_residual, c.max_residual);
      d.pass = d.pass && c.pass;
      if (!c.note.empty()) d.note = c.note;
    }
  }

  /// Append another report's checks under a name prefix.
  void include(const Report& other, const std::string& prefix) {
    for (auto c : other.checks_) {
      c.name = prefix + c.name;
      checks_.push_back(std::move(c));
    }
  }

  bool all_pass() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
  }

  const Check* get(const std::string& name) const {
    for (const auto& c : checks_)
      if (c.name == name) return &c;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["suite"] = suite_;
    j["pass"] = all_pass();
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : checks_) {
      nlohmann::ordered_json e;
      e["identity_name"] = c.name;
      if (std::isfinite(c.max_residual))
        e["max_residual"] = c.max_residual;
      else
        e["max_residual"] = nullptr;
      e["tol"] = c.tol;
      e["pass"] = c.pass;
      if (!c.note.empty()) e["note"] = c.note;
      arr.push_back(std::move(e));
    }
    j["checks"] = std::move(arr);
    return j;
  }

 private:
  Check& find_or_add(const std::string& name, double tol) {
    for (auto& c : checks_)
      if (c.name == name) return c;
    checks_.push_back(Check{name, 0.0, tol, true, {}});
    return checks_.back();
  }

  std::string suite_;
  std::vector<Check> checks_;
};

}  // namespace bigtan
