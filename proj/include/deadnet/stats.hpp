#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deadnet/trainer.hpp"

namespace deadnet {

double normal_cdf(double x);
/// Acklam's rational approximation followed by one Halley step; absolute
/// error well below 1e-9 on (0, 1).
double normal_quantile(double p);

struct VirtualBatch {
    std::vector<int> healthy;  // 1 = correct
    std::vector<int> sick;

    double accuracy() const;
};

/// Each batch draws `per_class` distinct healthy-labeled and sick-labeled
/// classifications uniformly at random; outcomes are correctness indicators.
std::vector<VirtualBatch> make_virtual_batches(const std::vector<Classification>& items, std::size_t n_batches,
                                               std::uint64_t seed, std::size_t per_class = 10);
std::vector<double> batch_accuracies(const std::vector<VirtualBatch>& batches);

struct BootstrapResult {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::size_t resamples = 0;
    double z0 = 0.0;
    double acceleration = 0.0;
};

inline constexpr std::size_t kDefaultResamples = 100000;

/// Sorted means of `resamples` bootstrap resamples (with replacement) of
/// `values`. Drawn in fixed chunks with per-chunk seeds, so the result does
/// not depend on the worker count.
std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples, std::uint64_t seed);

/// BCa interval for the mean of `values`. The q-quantile of the bootstrap
/// distribution is sorted[ceil(q B) - 1].
BootstrapResult bootstrap_bca(std::span<const double> values, std::size_t resamples = kDefaultResamples,
                              double level = 0.95, std::uint64_t seed = 0);

/// Plain percentile interval over the same resamples as bootstrap_bca.
BootstrapResult bootstrap_percentile(std::span<const double> values, std::size_t resamples = kDefaultResamples,
                                     double level = 0.95, std::uint64_t seed = 0);

struct ConcordanceReport {
    std::size_t overlaps = 0;
    std::size_t disagreements = 0;
    double d = 0.0;  // disagreement rate
    double a = 0.0;  // implied ambiguous fraction, 2d
    double r = 0.0;  // ambiguous fraction left after filtering, d / (1 - d)
    double u = 1.0;  // performance upper bound, 1 - r
};

ConcordanceReport ambiguity_chain(std::size_t disagreements, std::size_t overlaps);

struct HealthyRate {
    double rate = 0.0;
    BootstrapResult interval;
};

/// Fraction predicted healthy, with a BCa interval over virtual batches of
/// `batch_size` images drawn from `items`.
HealthyRate healthy_rate(const std::vector<Classification>& items, std::size_t n_batches = 100,
                         std::size_t batch_size = 20, std::size_t resamples = kDefaultResamples, double level = 0.95,
                         std::uint64_t seed = 0);

std::string to_json(const BootstrapResult& result);
std::string to_json(const ConcordanceReport& report);

}  // namespace deadnet
