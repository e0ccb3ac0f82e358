#pragma once

// The data-only inference path: (design, graph, exposure, X, Y) to the point
// estimate and the combined lower bounds.

#include <vector>

#include "prevalence/design.hpp"
#include "prevalence/exposure.hpp"
#include "prevalence/interval.hpp"
#include "prevalence/propensity.hpp"
#include "prevalence/statistic.hpp"

namespace prevalence {

struct AnalysisConfig {
  Variant variant = Variant::ipw;
  EngineConfig engine;
  SolverConfig solver;
  std::vector<double> alphas{0.05, 0.025};
};

struct Analysis {
  ExposureVector w;
  UVector u;
  PointEstimate point;
  QMatrix q;
  DiagonalMajorizer majorizer;
  std::vector<IntervalResult> intervals;  // one per alpha, in config order
};

/// `table` must outlive the result (u refers to it). When `moments` is given,
/// Q is assembled from it instead of being recomputed.
Analysis analyze(const Design& d, const AdjacencyGraph& g, const ExposureSpec& spec, const PropensityTable& table,
                 const Assignment& x, const OutcomeVector& y, const AnalysisConfig& cfg,
                 const QMoments* moments = nullptr);

}  // namespace prevalence
