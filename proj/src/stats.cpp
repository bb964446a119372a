#include "deadnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "deadnet/parallel.hpp"
#include "deadnet/random.hpp"
#include "json.hpp"

namespace deadnet {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -INFINITY;
        if (p == 1.0) return INFINITY;
        throw Error("normal_quantile needs p in [0, 1]");
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - p_low) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    // Halley refinement
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

// ---- virtual batches -----------------------------------------------------------

double VirtualBatch::accuracy() const {
    const auto n = healthy.size() + sick.size();
    if (n == 0) return 0.0;
    const auto correct = std::accumulate(healthy.begin(), healthy.end(), 0) + std::accumulate(sick.begin(), sick.end(), 0);
    return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

std::vector<int> draw_outcomes(const std::vector<int>& pool, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates: k distinct members
    std::vector<int> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
        std::swap(idx[i], idx[j]);
        out.push_back(pool[idx[i]]);
    }
    return out;
}

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
    const auto B = static_cast<double>(sorted.size());
    auto k = static_cast<std::ptrdiff_t>(std::ceil(q * B)) - 1;
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
    return sorted[static_cast<std::size_t>(k)];
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
}

}  // namespace

std::vector<VirtualBatch> make_virtual_batches(const std::vector<Classification>& items, std::size_t n_batches,
                                               std::uint64_t seed, std::size_t per_class) {
    std::vector<int> healthy, sick;
    for (const auto& c : items) (c.label == kSickClass ? sick : healthy).push_back(c.correct() ? 1 : 0);
    if (healthy.size() < per_class || sick.size() < per_class) {
        throw Error("virtual batches need at least " + std::to_string(per_class) + " items of each class (have " +
                    std::to_string(healthy.size()) + " healthy, " + std::to_string(sick.size()) + " sick)");
    }
    std::mt19937_64 rng(seed);
    std::vector<VirtualBatch> out(n_batches);
    for (auto& b : out) {
        b.healthy = draw_outcomes(healthy, per_class, rng);
        b.sick = draw_outcomes(sick, per_class, rng);
    }
    return out;
}

std::vector<double> batch_accuracies(const std::vector<VirtualBatch>& batches) {
    std::vector<double> out;
    out.reserve(batches.size());
    for (const auto& b : batches) out.push_back(b.accuracy());
    return out;
}

// ---- bootstrap -----------------------------------------------------------------

std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples, std::uint64_t seed) {
    if (values.empty()) throw Error("bootstrap of an empty sample");
    if (resamples == 0) throw Error("bootstrap needs at least one resample");
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (resamples + chunk - 1) / chunk;
    const std::size_t n = values.size();
    std::vector<double> means(resamples);
    parallel_for(chunks, [&](std::size_t c) {
        std::mt19937_64 rng(mix_seed(seed, c));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t hi = std::min(resamples, (c + 1) * chunk);
        for (std::size_t r = c * chunk; r < hi; ++r) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += values[pick(rng)];
            means[r] = s / static_cast<double>(n);
        }
    });
    std::sort(means.begin(), means.end());
    return means;
}

BootstrapResult bootstrap_bca(std::span<const double> values, std::size_t resamples, double level,
                              std::uint64_t seed) {
    check_level(level);
    if (values.empty()) throw Error("bootstrap of an empty sample");
    BootstrapResult res;
    res.estimate = mean_of(values);
    res.level = level;
    res.resamples = resamples;
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        res.lower = res.upper = res.estimate;
        return res;
    }
    const auto sorted = bootstrap_means(values, resamples, seed);
    const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), res.estimate) - sorted.begin());
    const double B = static_cast<double>(resamples);
    // keep z0 finite when every resample falls on one side
    const double frac = std::clamp(static_cast<double>(below) / B, 1.0 / (B + 1), B / (B + 1));
    res.z0 = normal_quantile(frac);

    const std::size_t n = values.size();
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    std::vector<double> jack(n);
    for (std::size_t i = 0; i < n; ++i) jack[i] = (total - values[i]) / static_cast<double>(n - 1);
    const double jbar = mean_of(jack);
    double num = 0, den = 0;
    for (double t : jack) {
        const double dlt = jbar - t;
        num += dlt * dlt * dlt;
        den += dlt * dlt;
    }
    res.acceleration = den > 0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

    auto adjusted = [&](double alpha) {
        const double z = normal_quantile(alpha);
        const double s = res.z0 + z;
        return normal_cdf(res.z0 + s / (1 - res.acceleration * s));
    };
    const double tail = (1 - level) / 2;
    res.lower = std::min(quantile_of_sorted(sorted, adjusted(tail)), res.estimate);
    res.upper = std::max(quantile_of_sorted(sorted, adjusted(1 - tail)), res.estimate);
    return res;
}

BootstrapResult bootstrap_percentile(std::span<const double> values, std::size_t resamples, double level,
                                     std::uint64_t seed) {
    check_level(level);
    BootstrapResult res;
    res.estimate = mean_of(values);
    res.level = level;
    res.resamples = resamples;
    const auto sorted = bootstrap_means(values, resamples, seed);
    const double tail = (1 - level) / 2;
    res.lower = quantile_of_sorted(sorted, tail);
    res.upper = quantile_of_sorted(sorted, 1 - tail);
    return res;
}

// ---- ambiguity -----------------------------------------------------------------

ConcordanceReport ambiguity_chain(std::size_t disagreements, std::size_t overlaps) {
    if (overlaps == 0) throw Error("ambiguity chain needs at least one overlapping annotation");
    if (disagreements > overlaps) throw Error("more disagreements than overlaps");
    ConcordanceReport r;
    r.overlaps = overlaps;
    r.disagreements = disagreements;
    r.d = static_cast<double>(disagreements) / static_cast<double>(overlaps);
    if (r.d >= 0.5) throw Error("disagreement rate " + std::to_string(r.d) + " >= 0.5 breaks the ambiguity model");
    r.a = 2 * r.d;
    r.r = r.d / (1 - r.d);
    r.u = 1 - r.r;
    return r;
}

HealthyRate healthy_rate(const std::vector<Classification>& items, std::size_t n_batches, std::size_t batch_size,
                         std::size_t resamples, double level, std::uint64_t seed) {
    if (items.empty()) throw Error("healthy rate of an empty set");
    std::vector<int> healthy;
    for (const auto& c : items) healthy.push_back(c.predicted == kHealthyClass ? 1 : 0);
    HealthyRate out;
    out.rate = static_cast<double>(std::accumulate(healthy.begin(), healthy.end(), 0)) / static_cast<double>(items.size());
    const std::size_t k = std::min(batch_size, healthy.size());
    std::mt19937_64 rng(seed);
    std::vector<double> rates;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const auto draw = draw_outcomes(healthy, k, rng);
        rates.push_back(static_cast<double>(std::accumulate(draw.begin(), draw.end(), 0)) / static_cast<double>(k));
    }
    out.interval = bootstrap_bca(rates, resamples, level, mix_seed(seed, 1));
    return out;
}

std::string to_json(const BootstrapResult& r) {
    nlohmann::ordered_json j;
    j["estimate"] = r.estimate;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["level"] = r.level;
    j["resamples"] = r.resamples;
    j["z0"] = r.z0;
    j["acceleration"] = r.acceleration;
    return j.dump();
}

std::string to_json(const ConcordanceReport& r) {
    nlohmann::ordered_json j;
    j["overlaps"] = r.overlaps;
    j["disagreements"] = r.disagreements;
    j["disagreement_rate"] = r.d;
    j["ambiguous_fraction"] = r.a;
    j["post_filter_ambiguous_fraction"] = r.r;
    j["performance_upper_bound"] = r.u;
    return j.dump();
}

}  // namespace deadnet
