#include "pagerank.hpp"

#include <cmath>

namespace swarmsynth {

namespace {

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

void normalize_l1(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s <= 0.0) {
        v.assign(v.size(), 1.0 / static_cast<double>(v.size()));
        return;
    }
    for (double& x : v) x /= s;
}

}  // namespace

PageRankVector pagerank(const Matrix& g, double tol, int max_iter, const std::vector<double>* start) {
    const size_t n = g.size();
    for (const auto& row : g)
        if (row.size() != n) throw std::invalid_argument("pagerank: matrix is not square");
    if (n == 0) throw std::invalid_argument("pagerank: empty matrix");

    PageRankVector out;
    std::vector<double> x;
    if (start) {
        x = *start;
        if (x.size() != n) throw std::invalid_argument("pagerank: start vector has wrong length");
        normalize_l1(x);
    } else {
        x.assign(n, 1.0 / static_cast<double>(n));
    }

    std::vector<double> next(n, 0.0);
    std::vector<double> prev = x;
    double residual = 0.0;
    double prev_residual = -1.0;
    double prev_prev_residual = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        for (size_t j = 0; j < n; ++j) next[j] = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double xi = x[i];
            if (xi == 0.0) continue;
            const auto& row = g[i];
            for (size_t j = 0; j < n; ++j) next[j] += xi * row[j];
        }
        normalize_l1(next);
        residual = l1_distance(next, x);
        prev = x;
        x = next;
        out.iterations = it;
        if (residual < tol) {
            out.converged = true;
            break;
        }
        // Oscillation: the residual stops moving while staying above tol
        // (periodic chain). Averaging consecutive iterates damps the
        // unit-circle modes (kills period 2 outright); the loop then measures
        // the true residual on the averaged vector and keeps iterating if
        // needed.
        if (it > 4 && prev_prev_residual >= 0.0 &&
            std::abs(residual - prev_prev_residual) < 1e-14 && residual >= tol) {
            for (size_t j = 0; j < n; ++j) x[j] = 0.5 * (x[j] + prev[j]);
            normalize_l1(x);
            out.averaged = true;
            prev_residual = -1.0;
            prev_prev_residual = -1.0;
            continue;
        }
        prev_prev_residual = prev_residual;
        prev_residual = residual;
    }
    out.residual = residual;
    out.values = x;
    return out;
}

double fitness_pr(const PageRankVector& pr, const DesiredStateSet& desired) {
    if (desired.members.empty()) throw std::invalid_argument("fitness_pr: empty desired state set");
    const auto& v = pr.values;
    double num = 0.0;
    for (int s : desired.members) {
        if (s < 0 || s >= static_cast<int>(v.size()))
            throw std::out_of_range("fitness_pr: desired state out of range");
        num += v[static_cast<size_t>(s)];
    }
    num /= static_cast<double>(desired.members.size());
    double den = 0.0;
    for (double x : v) den += x;
    den /= static_cast<double>(v.size());
    return num / den;
}

}  // namespace swarmsynth
