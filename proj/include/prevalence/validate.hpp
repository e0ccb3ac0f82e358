#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prevalence {

struct ValidationConfig {
  int instances = 12;
  std::uint64_t seed = 1;
  int mc_replications = 4000;
  double perturb_propensity = 0.0;  // fault injection: moves every propensity this share toward 1/2
  unsigned threads = 1;
};

struct ValidationCheck {
  std::string name;
  std::uint64_t instance_seed = 0;
  bool passed = true;
  double error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Cross-checks the counting engine, Q, the variance identity and the
/// interval programs against brute force on random instances with N <= 12.
std::vector<ValidationCheck> run_validation(const ValidationConfig& cfg);

}  // namespace prevalence
