#pragma once

#include <cstddef>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "silicon_entropy/bit_vector.hpp"
#include "silicon_entropy/parallel.hpp"
#include "silicon_entropy/randtest/tests.hpp"

namespace silicon_entropy::randtest {

struct SuiteConfig {
  double alpha = kDefaultAlpha;
  std::size_t block_size = 128;
  unsigned serial_m = 2;
  unsigned apen_m = 2;
  unsigned jobs = 1;
};

struct SuiteError {
  std::string test_name;
  std::string message;
};

/// all_pass is false when any report fails or any test could not run.
struct SuiteReport {
  std::vector<PValueReport> reports;
  std::vector<SuiteError> errors;
  std::size_t input_length = 0;
  double alpha = kDefaultAlpha;
  bool all_pass = false;

  const PValueReport* find(const std::string& name) const {
    for (const auto& r : reports) {
      if (r.test_name == name) return &r;
    }
    return nullptr;
  }
};

inline const std::vector<std::string>& suite_test_names() {
  static const std::vector<std::string> names{"monobit",        "block_frequency", "runs",
                                              "longest_run",    "cusum_forward",   "cusum_backward",
                                              "serial_1",       "serial_2",        "approx_entropy"};
  return names;
}

/// Runs the seven tests (nine reports: cusum and serial give two each). A test
/// that throws is recorded in `errors` and the rest still run. Report order is
/// fixed regardless of `jobs`.
inline SuiteReport run_suite(const BitVector& bits, const SuiteConfig& config = {}) {
  const TestOptions opt{config.alpha, true};
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ArgumentError("run_suite: alpha must be in (0, 1)");

  using Job = std::function<std::vector<PValueReport>()>;
  const std::vector<std::pair<std::string, Job>> jobs{
      {"monobit", [&] { return std::vector{monobit(bits, opt)}; }},
      {"block_frequency", [&] { return std::vector{block_frequency(bits, config.block_size, opt)}; }},
      {"runs", [&] { return std::vector{runs(bits, opt)}; }},
      {"longest_run", [&] { return std::vector{longest_run(bits, opt)}; }},
      {"cusum", [&] { return std::vector{cusum(bits, CusumMode::forward, opt), cusum(bits, CusumMode::backward, opt)}; }},
      {"serial",
       [&] {
         auto [a, b] = serial(bits, config.serial_m, opt);
         return std::vector{a, b};
       }},
      {"approx_entropy", [&] { return std::vector{approx_entropy(bits, config.apen_m, opt)}; }},
  };

  std::vector<std::vector<PValueReport>> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    try {
      results[i] = jobs[i].second();
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  SuiteReport report;
  report.input_length = bits.size();
  report.alpha = config.alpha;
  bool ok = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!failures[i].empty()) {
      report.errors.push_back({jobs[i].first, failures[i]});
      ok = false;
    }
    for (auto& r : results[i]) {
      ok = ok && r.pass;
      report.reports.push_back(std::move(r));
    }
  }
  report.all_pass = ok;
  return report;
}

inline nlohmann::ordered_json to_json(const PValueReport& r) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  return {{"name", r.test_name}, {"statistic", r.statistic}, {"p_value", r.p_value}, {"pass", r.pass}, {"params", params}};
}

inline nlohmann::ordered_json to_json(const SuiteReport& s) {
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (const auto& e : s.errors) errors.push_back({{"test", e.test_name}, {"error", e.message}});
  return {{"input_length", s.input_length}, {"alpha", s.alpha}, {"all_pass", s.all_pass}, {"reports", reports},
          {"errors", errors}};
}

// One test per line: name  statistic  p_value  PASS|FAIL
inline void write_text_table(std::ostream& out, const SuiteReport& s) {
  char line[160];
  for (const auto& r : s.reports) {
    std::snprintf(line, sizeof line, "%-16s  %16.6f  %10.6f  %s\n", r.test_name.c_str(), r.statistic, r.p_value,
                  r.pass ? "PASS" : "FAIL");
    out << line;
  }
  for (const auto& e : s.errors) out << e.test_name << "  ERROR  " << e.message << '\n';
}

}  // namespace silicon_entropy::randtest
