#include "prevalence/design.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace prevalence {

namespace {

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

std::string big_to_string(const BigInt& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int count_groups(const std::vector<int>& labels, const char* what) {
  int n = 0;
  for (int s : labels) {
    if (s < 0) throw std::invalid_argument(std::string("design: negative ") + what + " index");
    n = std::max(n, s + 1);
  }
  return n;
}

// Draws exactly `treated` of `pool` uniformly by partial Fisher-Yates and
// marks their units.
void draw_blocks(const Design& d, std::vector<int>& pool, int treated, Rng& rng, Assignment& x) {
  const int n = static_cast<int>(pool.size());
  for (int k = 0; k < treated; ++k) {
    std::uniform_int_distribution<int> pick(k, n - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
    for (int u : d.units_of_block(pool[static_cast<std::size_t>(k)])) x[static_cast<std::size_t>(u)] = 1;
  }
}

}  // namespace

SupportTooLarge::SupportTooLarge(BigInt size, std::uint64_t cap)
    : std::runtime_error("design support has " + big_to_string(size) + " assignments, above the cap of " +
                         std::to_string(cap)),
      size_(std::move(size)) {}

Design::Design(DesignSpec spec) : spec_(std::move(spec)) {
  if (const auto* c = std::get_if<CompleteRandomization>(&spec_)) {
    if (c->n_units <= 0) throw std::invalid_argument("design: no units");
    block_of_unit_.resize(static_cast<std::size_t>(c->n_units));
    std::iota(block_of_unit_.begin(), block_of_unit_.end(), 0);
    stratum_of_block_.assign(static_cast<std::size_t>(c->n_units), 0);
    treated_per_stratum_ = {c->n_treated};
  } else if (const auto* s = std::get_if<StratifiedRandomization>(&spec_)) {
    if (s->stratum_of.empty()) throw std::invalid_argument("design: no units");
    block_of_unit_.resize(s->stratum_of.size());
    std::iota(block_of_unit_.begin(), block_of_unit_.end(), 0);
    stratum_of_block_ = s->stratum_of;
    treated_per_stratum_ = s->n_treated_per_stratum;
    if (count_groups(s->stratum_of, "stratum") > static_cast<int>(treated_per_stratum_.size()))
      throw std::invalid_argument("design: stratum without a treated count");
  } else {
    const auto& c = std::get<ClusterRandomization>(spec_);
    if (c.cluster_of.empty()) throw std::invalid_argument("design: no units");
    const int n_clusters = count_groups(c.cluster_of, "cluster");
    if (static_cast<int>(c.stratum_of_cluster.size()) != n_clusters)
      throw std::invalid_argument("design: stratum_of_cluster must list every cluster");
    block_of_unit_ = c.cluster_of;
    stratum_of_block_ = c.stratum_of_cluster;
    treated_per_stratum_ = c.n_treated_clusters_per_stratum;
    if (count_groups(c.stratum_of_cluster, "stratum") > static_cast<int>(treated_per_stratum_.size()))
      throw std::invalid_argument("design: stratum without a treated count");
  }

  units_of_block_.assign(stratum_of_block_.size(), {});
  for (int u = 0; u < n_units(); ++u) units_of_block_[static_cast<std::size_t>(block_of(u))].push_back(u);
  blocks_of_stratum_.assign(treated_per_stratum_.size(), {});
  for (int b = 0; b < n_blocks(); ++b) {
    if (units_of_block_[static_cast<std::size_t>(b)].empty())
      throw std::invalid_argument("design: cluster " + std::to_string(b) + " has no units");
    blocks_of_stratum_[static_cast<std::size_t>(stratum_of_block(b))].push_back(b);
  }
  for (int s = 0; s < n_strata(); ++s) {
    const int t = stratum_treated(s);
    const int n = stratum_size(s);
    if (t <= 0 || t >= n)
      throw std::invalid_argument("design: stratum " + std::to_string(s) + " must treat strictly between 0 and " +
                                  std::to_string(n) + " blocks, got " + std::to_string(t));
  }
}

Design Design::complete(int n_units, int n_treated) { return Design(CompleteRandomization{n_units, n_treated}); }

std::string Design::kind() const {
  if (std::holds_alternative<CompleteRandomization>(spec_)) return "complete";
  if (std::holds_alternative<StratifiedRandomization>(spec_)) return "stratified";
  return "cluster";
}

double Design::marginal_treated(int unit) const {
  const int s = stratum_of_block(block_of(unit));
  return static_cast<double>(stratum_treated(s)) / stratum_size(s);
}

std::vector<int> Design::rho_violations(double rho) const {
  std::vector<int> out;
  for (int s = 0; s < n_strata(); ++s) {
    const double share = static_cast<double>(stratum_treated(s)) / stratum_size(s);
    if (share < rho || share > 1.0 - rho) out.push_back(s);
  }
  return out;
}

int ConditionedPool::fixed_value(int block) const {
  for (const auto& [b, v] : fixed_blocks)
    if (b == block) return v;
  return -1;
}

ConditionedPool condition_design(const Design& d, std::span<const Condition> fixed) {
  if (fixed.size() > 2) throw std::invalid_argument("condition_design: at most two fixed coordinates");
  ConditionedPool pool;
  for (const auto& c : fixed) {
    if (c.unit < 0 || c.unit >= d.n_units()) throw std::invalid_argument("condition_design: unit out of range");
    if (c.value > 1) throw std::invalid_argument("condition_design: treatment must be 0 or 1");
    const int b = d.block_of(c.unit);
    const int existing = pool.fixed_value(b);
    if (existing >= 0) {
      if (existing != c.value)
        throw InfeasibleCondition("conditioning assigns two treatments to block " + std::to_string(b));
      continue;
    }
    pool.fixed_blocks.emplace_back(b, c.value);
  }
  pool.remaining_blocks.resize(static_cast<std::size_t>(d.n_strata()));
  pool.remaining_treated.resize(static_cast<std::size_t>(d.n_strata()));
  for (int s = 0; s < d.n_strata(); ++s) {
    pool.remaining_blocks[static_cast<std::size_t>(s)] = d.stratum_size(s);
    pool.remaining_treated[static_cast<std::size_t>(s)] = d.stratum_treated(s);
  }
  for (const auto& [b, v] : pool.fixed_blocks) {
    const auto s = static_cast<std::size_t>(d.stratum_of_block(b));
    pool.remaining_blocks[s] -= 1;
    pool.remaining_treated[s] -= v;
  }
  for (int s = 0; s < d.n_strata(); ++s) {
    const int n = pool.remaining_blocks[static_cast<std::size_t>(s)];
    const int t = pool.remaining_treated[static_cast<std::size_t>(s)];
    if (t < 0 || t > n)
      throw InfeasibleCondition("conditioning is infeasible in stratum " + std::to_string(s));
  }
  return pool;
}

Assignment sample_assignment(const Design& d, Rng& rng) { return sample_conditional(d, {}, rng); }

Assignment sample_assignment(const Design& d, std::uint64_t seed) {
  Rng rng(seed);
  return sample_assignment(d, rng);
}

Assignment sample_conditional(const Design& d, std::span<const Condition> fixed, Rng& rng) {
  const ConditionedPool pool = condition_design(d, fixed);
  Assignment x(static_cast<std::size_t>(d.n_units()), 0);
  for (const auto& [b, v] : pool.fixed_blocks)
    if (v)
      for (int u : d.units_of_block(b)) x[static_cast<std::size_t>(u)] = 1;
  std::vector<int> free;
  for (int s = 0; s < d.n_strata(); ++s) {
    free.clear();
    for (int b : d.blocks_of_stratum(s))
      if (pool.fixed_value(b) < 0) free.push_back(b);
    draw_blocks(d, free, pool.remaining_treated[static_cast<std::size_t>(s)], rng, x);
  }
  return x;
}

Assignment sample_conditional(const Design& d, std::span<const Condition> fixed, std::uint64_t seed) {
  Rng rng(seed);
  return sample_conditional(d, fixed, rng);
}

BigInt support_size(const Design& d) {
  BigInt total = 1;
  for (int s = 0; s < d.n_strata(); ++s) total *= binomial(d.stratum_size(s), d.stratum_treated(s));
  return total;
}

void enumerate_assignments(const Design& d, std::uint64_t cap, const std::function<void(const Assignment&)>& visit) {
  const BigInt size = support_size(d);
  if (size > cap) throw SupportTooLarge(size, cap);

  // One combination (lexicographic index vector) per stratum, advanced like
  // an odometer.
  const int n_strata = d.n_strata();
  std::vector<std::vector<int>> combo(static_cast<std::size_t>(n_strata));
  for (int s = 0; s < n_strata; ++s) {
    combo[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(d.stratum_treated(s)));
    std::iota(combo[static_cast<std::size_t>(s)].begin(), combo[static_cast<std::size_t>(s)].end(), 0);
  }
  auto advance = [&](int s) {
    auto& c = combo[static_cast<std::size_t>(s)];
    const int n = d.stratum_size(s);
    const int k = static_cast<int>(c.size());
    int pos = k - 1;
    while (pos >= 0 && c[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) {
      std::iota(c.begin(), c.end(), 0);
      return false;
    }
    ++c[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < k; ++q) c[static_cast<std::size_t>(q)] = c[static_cast<std::size_t>(q - 1)] + 1;
    return true;
  };

  Assignment x(static_cast<std::size_t>(d.n_units()));
  for (;;) {
    std::fill(x.begin(), x.end(), 0);
    for (int s = 0; s < n_strata; ++s) {
      const auto blocks = d.blocks_of_stratum(s);
      for (int idx : combo[static_cast<std::size_t>(s)])
        for (int u : d.units_of_block(blocks[static_cast<std::size_t>(idx)])) x[static_cast<std::size_t>(u)] = 1;
    }
    visit(x);
    int s = 0;
    while (s < n_strata && !advance(s)) ++s;
    if (s == n_strata) return;
  }
}

bool in_support(const Design& d, const Assignment& x) {
  if (static_cast<int>(x.size()) != d.n_units()) return false;
  std::vector<int> treated(static_cast<std::size_t>(d.n_strata()), 0);
  for (int b = 0; b < d.n_blocks(); ++b) {
    const auto units = d.units_of_block(b);
    const std::uint8_t v = x[static_cast<std::size_t>(units[0])];
    if (v > 1) return false;
    for (int u : units)
      if (x[static_cast<std::size_t>(u)] != v) return false;
    treated[static_cast<std::size_t>(d.stratum_of_block(b))] += v;
  }
  for (int s = 0; s < d.n_strata(); ++s)
    if (treated[static_cast<std::size_t>(s)] != d.stratum_treated(s)) return false;
  return true;
}

}  // namespace prevalence
