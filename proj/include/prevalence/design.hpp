#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "prevalence/rng.hpp"

namespace prevalence {

using BigInt = boost::multiprecision::cpp_int;
using Assignment = std::vector<std::uint8_t>;

struct CompleteRandomization {
  int n_units = 0;
  int n_treated = 0;
};

struct StratifiedRandomization {
  std::vector<int> stratum_of;             // per unit
  std::vector<int> n_treated_per_stratum;  // per stratum
};

struct ClusterRandomization {
  std::vector<int> cluster_of;                      // per unit
  std::vector<int> stratum_of_cluster;              // per cluster
  std::vector<int> n_treated_clusters_per_stratum;  // per stratum
};

using DesignSpec = std::variant<CompleteRandomization, StratifiedRandomization, ClusterRandomization>;

/// A coordinate fixed by conditioning. For cluster designs, fixing a unit
/// fixes its whole cluster.
struct Condition {
  int unit = 0;
  std::uint8_t value = 0;
};

class InfeasibleCondition : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SupportTooLarge : public std::runtime_error {
 public:
  SupportTooLarge(BigInt size, std::uint64_t cap);
  const BigInt& support() const { return size_; }

 private:
  BigInt size_;
};

/// Known randomization law of the treatment vector: treated "blocks" are
/// drawn without replacement within each stratum. A block is a unit for
/// complete and stratified designs and a cluster for cluster designs.
class Design {
 public:
  explicit Design(DesignSpec spec);

  static Design complete(int n_units, int n_treated);

  const DesignSpec& spec() const { return spec_; }
  std::string kind() const;
  bool clustered() const { return std::holds_alternative<ClusterRandomization>(spec_); }

  int n_units() const { return static_cast<int>(block_of_unit_.size()); }
  int n_blocks() const { return static_cast<int>(stratum_of_block_.size()); }
  int n_strata() const { return static_cast<int>(treated_per_stratum_.size()); }

  int block_of(int unit) const { return block_of_unit_[static_cast<std::size_t>(unit)]; }
  int stratum_of_block(int block) const { return stratum_of_block_[static_cast<std::size_t>(block)]; }
  std::span<const int> units_of_block(int block) const { return units_of_block_[static_cast<std::size_t>(block)]; }
  std::span<const int> blocks_of_stratum(int s) const { return blocks_of_stratum_[static_cast<std::size_t>(s)]; }
  int stratum_size(int s) const { return static_cast<int>(blocks_of_stratum_[static_cast<std::size_t>(s)].size()); }
  int stratum_treated(int s) const { return treated_per_stratum_[static_cast<std::size_t>(s)]; }

  /// Exact marginal P(X_unit = 1).
  double marginal_treated(int unit) const;

  /// Strata whose treated share falls outside [rho, 1 - rho]. Diagnostic only.
  std::vector<int> rho_violations(double rho) const;

 private:
  DesignSpec spec_;
  std::vector<int> block_of_unit_;
  std::vector<int> stratum_of_block_;
  std::vector<std::vector<int>> units_of_block_;
  std::vector<std::vector<int>> blocks_of_stratum_;
  std::vector<int> treated_per_stratum_;
};

/// The design after conditioning: fixed blocks and what remains to be drawn
/// in each stratum.
struct ConditionedPool {
  std::vector<std::pair<int, std::uint8_t>> fixed_blocks;  // (block, value), at most 2
  std::vector<int> remaining_blocks;                       // per stratum
  std::vector<int> remaining_treated;                      // per stratum

  /// Value of a fixed block, or -1 when the block is free.
  int fixed_value(int block) const;
};

/// Throws InfeasibleCondition when no assignment in the support matches.
ConditionedPool condition_design(const Design& d, std::span<const Condition> fixed);

Assignment sample_assignment(const Design& d, Rng& rng);
Assignment sample_assignment(const Design& d, std::uint64_t seed);

/// Exact draw from the law of X given up to two fixed coordinates.
Assignment sample_conditional(const Design& d, std::span<const Condition> fixed, Rng& rng);
Assignment sample_conditional(const Design& d, std::span<const Condition> fixed, std::uint64_t seed);

/// Product over strata of C(blocks, treated).
BigInt support_size(const Design& d);

/// Calls visit once for every assignment in the support. Throws
/// SupportTooLarge (carrying the exact count) when the support exceeds cap.
void enumerate_assignments(const Design& d, std::uint64_t cap,
                           const std::function<void(const Assignment&)>& visit);

bool in_support(const Design& d, const Assignment& x);

}  // namespace prevalence
