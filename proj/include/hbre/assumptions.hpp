#pragma once

// Numerical probe of the standing assumptions on an environment model.
//
// "No zero offspring" is checked exactly from the law structure. The
// vanishing-defect condition d(xi, s) = 0 can only be probed: sampled
// environments are iterated and the trend of h_{n+1}(xi,s)/h_n(theta xi,s)
// is inspected against declared thresholds.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbre/composition.hpp"
#include "hbre/environment.hpp"

namespace hbre {

enum class ProbeVerdict { Consistent, Inconsistent, Inconclusive };

inline const char* to_string(ProbeVerdict v) {
  switch (v) {
    case ProbeVerdict::Consistent: return "consistent";
    case ProbeVerdict::Inconsistent: return "inconsistent";
    case ProbeVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct AssumptionProbe {
  std::size_t n_probe = 30;
  std::vector<double> s_grid = {0.5, 1.0, 2.0};
  std::size_t replicates = 10;
  double zero_threshold = 1e-6;       // final ratio at or below: d = 0 supported
  double positive_floor = 1e-3;       // stabilized ratio at or above: d > 0 supported
  double stabilization_tol = 1e-9;    // max |r_n - r_{n-1}| over the last 5 ratios
};

struct AssumptionReport {
  bool a1_holds = false;
  ProbeVerdict a2 = ProbeVerdict::Inconclusive;
  struct Entry {
    std::uint64_t replicate;
    double s;
    double final_ratio;
    bool stabilized;
  };
  std::vector<Entry> entries;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries) {
      rows.push_back({{"replicate", e.replicate}, {"s", e.s}, {"final_ratio", e.final_ratio},
                      {"stabilized", e.stabilized}});
    }
    return {{"a1", a1_holds ? "pass" : "fail"}, {"a2", to_string(a2)}, {"ratios", rows}};
  }
};

inline AssumptionReport validate_assumptions(std::shared_ptr<const EnvironmentModel> model,
                                             const AssumptionProbe& probe) {
  AssumptionReport report;
  report.a1_holds = model->satisfies_a1();
  if (probe.s_grid.empty() || probe.replicates == 0 || probe.n_probe < 1) return report;
  // without A1 the inverse iterates leave the domain once e^{-s} drops below f(0)
  if (!report.a1_holds) return report;

  bool all_zero = true;
  bool any_positive = false;
  for (std::uint64_t r = 0; r < probe.replicates; ++r) {
    const Environment env = sample_environment(model, r);
    for (double s : probe.s_grid) {
      const auto ratios = estimate_d(env, TailScalar::from_value(s), probe.n_probe);
      const double last = ratios.back();
      bool stable = ratios.size() >= 5;
      for (std::size_t i = ratios.size() >= 5 ? ratios.size() - 4 : 1; stable && i < ratios.size(); ++i) {
        stable = std::fabs(ratios[i] - ratios[i - 1]) <= probe.stabilization_tol;
      }
      report.entries.push_back({r, s, last, stable});
      if (!(last <= probe.zero_threshold)) all_zero = false;
      if (stable && last >= probe.positive_floor) any_positive = true;
    }
  }
  if (any_positive) {
    report.a2 = ProbeVerdict::Inconsistent;
  } else if (all_zero) {
    report.a2 = ProbeVerdict::Consistent;
  }
  return report;
}

}  // namespace hbre
