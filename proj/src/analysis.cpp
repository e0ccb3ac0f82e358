#include "prevalence/analysis.hpp"

#include <stdexcept>

namespace prevalence {

Analysis analyze(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const PropensityTable& table,
                 const Assignment& x, const OutcomeVector& y, const AnalysisConfig& cfg, const QMoments* moments) {
  const int n = d.n_units();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n || g.size() != n || table.size() != n)
    throw std::invalid_argument("analyze: dimension mismatch");
  Analysis a;
  a.w = compute_exposure(g, spec, x);
  a.u = build_u(cfg.variant, x, a.w, table);
  a.point = point_estimate(a.u, y);
  const UDefinition def{cfg.variant, &table};
  a.q = moments ? assemble_Q(*moments, x) : build_Q(d, g, spec, def, x, cfg.engine);
  a.majorizer = extract_majorizer(a.q.q, cfg.solver);
  for (double alpha : cfg.alphas) a.intervals.push_back(combined_interval(a.u, a.q, a.majorizer, y, alpha, cfg.solver));
  return a;
}

}  // namespace prevalence
