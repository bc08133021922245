#ifndef SZHU_REPORT_HPP
#define SZHU_REPORT_HPP

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace szhu {

struct CheckRow {
  std::string id;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Residual table produced by the verification suites.
struct Report {
  std::vector<CheckRow> rows;

  void add(std::string id, double residual, double tolerance) {
    rows.push_back({std::move(id), residual, tolerance, residual < tolerance});
  }

  void merge(const Report& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  }

  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }

  void print(std::ostream& os) const {
    for (const auto& r : rows) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%-55s residual=%.3e tol=%.1e %s", r.id.c_str(),
                    r.residual, r.tolerance, r.pass ? "pass" : "FAIL");
      os << buf << "\n";
    }
  }
};

}  // namespace szhu

#endif
