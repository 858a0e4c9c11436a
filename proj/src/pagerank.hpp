#pragma once

#include "core.hpp"

namespace swarmsynth {

struct PageRankVector {
    std::vector<double> values;  // non-negative, sums to 1
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    bool averaged = false;  // Cesaro fallback kicked in (periodic chain)
};

// Stationary distribution of a row-stochastic matrix by power iteration
// (x <- x^T G) from a uniform start. Periodic chains that oscillate are
// resolved by averaging the last two iterates once the residual plateaus.
// Non-convergence is reported through the flags, not thrown; callers like the
// policy optimizer accept the partial result.
PageRankVector pagerank(const Matrix& g, double tol = 1e-10, int max_iter = 10000,
                        const std::vector<double>* start = nullptr);

// Eq. fitness: mean PageRank over the desired states divided by the mean over
// all states, computed in that literal form.
double fitness_pr(const PageRankVector& pr, const DesiredStateSet& desired);

}  // namespace swarmsynth
