#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "deadnet/tensor.hpp"

namespace deadnet {

struct GradientReport {
    std::size_t coordinates = 0;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

inline std::vector<std::size_t> pick_coordinates(std::size_t size, std::size_t coordinates, std::uint64_t seed) {
    std::vector<std::size_t> picks(size);
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    if (coordinates < picks.size()) {
        std::mt19937_64 rng(seed);
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(coordinates);
    }
    return picks;
}

inline void note_coordinate(GradientReport& report, std::size_t i, double analytic, double numeric) {
    const double err = relative_error(analytic, numeric);
    ++report.coordinates;
    if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = err;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
    }
}

/// Compares an analytic gradient against central differences of `loss`
/// (step h) at `coordinates` randomly chosen entries of `point`. When the
/// tensor has fewer entries than requested, every entry is checked.
/// `point` is perturbed in place and restored.
inline GradientReport gradient_check(const std::function<double()>& loss, Tensor64& point,
                                     const Tensor64& analytic, std::size_t coordinates, std::uint64_t seed,
                                     double h = 1e-5) {
    require_shape(analytic, point.shape(), "gradient_check analytic gradient");
    GradientReport report;
    for (auto i : pick_coordinates(point.size(), coordinates, seed)) {
        const double saved = point[i];
        point[i] = saved + h;
        const double up = loss();
        point[i] = saved - h;
        const double down = loss();
        point[i] = saved;
        note_coordinate(report, i, analytic[i], (up - down) / (2.0 * h));
    }
    return report;
}

/// Central differences at each of `steps`, keeping per coordinate the one
/// whose forward and backward differences agree best. In a piecewise-linear
/// net a step that straddles a ReLU or pooling kink shows up as a one-sided
/// mismatch that does not shrink with h, while roundoff grows as h shrinks;
/// the choice never looks at the analytic value.
inline GradientReport gradient_check_piecewise(const std::function<double()>& loss, Tensor64& point,
                                               const Tensor64& analytic, std::size_t coordinates,
                                               std::uint64_t seed, const std::vector<double>& steps) {
    require_shape(analytic, point.shape(), "gradient_check analytic gradient");
    if (steps.empty()) throw Error("gradient_check_piecewise needs at least one step");
    const double centre = loss();
    GradientReport report;
    for (auto i : pick_coordinates(point.size(), coordinates, seed)) {
        const double saved = point[i];
        double best_numeric = 0.0, best_gap = std::numeric_limits<double>::infinity();
        for (double h : steps) {
            point[i] = saved + h;
            const double up = loss();
            point[i] = saved - h;
            const double down = loss();
            point[i] = saved;
            const double gap = std::abs((up - centre) - (centre - down)) / h;
            if (gap < best_gap) {
                best_gap = gap;
                best_numeric = (up - down) / (2.0 * h);
            }
        }
        note_coordinate(report, i, analytic[i], best_numeric);
    }
    return report;
}

inline GradientReport merge(GradientReport a, const GradientReport& b) {
    const std::size_t total = a.coordinates + b.coordinates;
    if (b.max_relative_error > a.max_relative_error) a = b;
    a.coordinates = total;
    return a;
}

}  // namespace deadnet
