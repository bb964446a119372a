#include <cmath>
#include <random>

#include "deadnet/stats.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace deadnet;

namespace {

std::vector<Classification> outcomes(std::size_t healthy, std::size_t sick, double p_correct, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution ok(p_correct);
    std::vector<Classification> out;
    for (std::size_t i = 0; i < healthy + sick; ++i) {
        const int label = i < healthy ? 0 : 1;
        out.push_back({"img" + std::to_string(i), label, ok(rng) ? label : 1 - label, 0.0});
    }
    return out;
}

}  // namespace

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
    CHECK(std::abs(normal_quantile(0.025) + 1.959963984540054) < 1e-9);
    CHECK(std::abs(normal_quantile(1e-6) + 4.753424308822899) < 1e-8);
    for (double p = 1e-5; p < 1; p += 0.01373) CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-12);
    CHECK_THROWS(normal_quantile(1.5));
}

TEST_CASE("virtual batches") {
    const auto items = outcomes(60, 50, 0.8, 1);
    const auto batches = make_virtual_batches(items, 100, 5);
    REQUIRE(batches.size() == 100);
    std::size_t total = 0;
    for (const auto& b : batches) {
        CHECK(b.healthy.size() == 10);
        CHECK(b.sick.size() == 10);
        total += b.healthy.size() + b.sick.size();
    }
    CHECK(total == 2000);
    const auto again = make_virtual_batches(items, 100, 5);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(again[i].healthy == batches[i].healthy);
        CHECK(again[i].sick == batches[i].sick);
    }
    CHECK_THROWS(make_virtual_batches(outcomes(9, 50, 0.8, 1), 100, 1));
}

TEST_CASE("bootstrap degenerate input collapses to a point") {
    const std::vector<double> ones(100, 1.0);
    const auto r = bootstrap_bca(ones);
    CHECK(r.lower == 1.0);
    CHECK(r.upper == 1.0);
    CHECK(r.estimate == 1.0);
    CHECK_THROWS(bootstrap_bca(std::vector<double>{}));
}

TEST_CASE("bootstrap n=5 matches the exhaustive oracle") {
    // 5^5 enumeration: z0 = -0.1534, a = 0, bounds [0.32, 0.80]
    const std::vector<double> v{0.2, 0.4, 0.6, 0.8, 1.0};
    const auto r = bootstrap_bca(v, kDefaultResamples, 0.95, 3);
    CHECK(r.z0 == doctest::Approx(-0.1534).epsilon(0.02));
    CHECK(std::abs(r.acceleration) < 1e-12);
    CHECK(std::abs(r.lower - 0.32) <= 0.01);
    CHECK(std::abs(r.upper - 0.80) <= 0.01);
}

TEST_CASE("bootstrap properties") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    std::vector<double> sym(400);
    for (auto& x : sym) x = n(rng);
    const auto bca = bootstrap_bca(sym, kDefaultResamples, 0.95, 1);
    const auto pct = bootstrap_percentile(sym, kDefaultResamples, 0.95, 1);
    CHECK(std::abs(bca.lower - pct.lower) < 0.005);
    CHECK(std::abs(bca.upper - pct.upper) < 0.005);

    std::exponential_distribution<double> e(1.0);
    std::vector<double> skew(60);
    for (auto& x : skew) x = e(rng);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r95 = bootstrap_bca(skew, 20000, 0.95, seed);
        const auto r99 = bootstrap_bca(skew, 20000, 0.99, seed);
        CHECK(r95.lower <= r95.estimate);
        CHECK(r95.estimate <= r95.upper);
        CHECK(r99.lower <= r95.lower);
        CHECK(r99.upper >= r95.upper);
    }
    CHECK(bootstrap_bca(skew, 20000, 0.95, 4).acceleration > 0);
    CHECK(bootstrap_means(skew, 10000, 2) == bootstrap_means(skew, 10000, 2));
}

TEST_CASE("ambiguity chain") {
    const auto r = ambiguity_chain(49, 263);
    CHECK(std::abs(100 * r.d - 18.6) <= 0.1);
    CHECK(std::abs(100 * r.a - 37.2) <= 0.1);
    CHECK(std::abs(100 * r.r - 22.9) <= 0.1);
    CHECK(std::abs(100 * r.u - 77.1) <= 0.1);

    const auto zero = ambiguity_chain(0, 50);
    CHECK(zero.a == 0.0);
    CHECK(zero.r == 0.0);
    CHECK(zero.u == 1.0);

    const auto q = ambiguity_chain(25, 100);
    CHECK(q.a == doctest::Approx(0.5));
    CHECK(q.r == doctest::Approx(1.0 / 3));
    CHECK(q.u == doctest::Approx(2.0 / 3));

    double prev = 2;
    for (std::size_t d = 0; d < 132; ++d) {
        const double u = ambiguity_chain(d, 263).u;
        CHECK(u < prev);
        prev = u;
    }
    CHECK_THROWS(ambiguity_chain(132, 263));
    CHECK_THROWS(ambiguity_chain(10, 5));

    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j["overlaps"] == 263);
    CHECK(j["performance_upper_bound"].get<double>() == doctest::Approx(r.u));
}

TEST_CASE("healthy rate") {
    std::vector<Classification> all_healthy(50, Classification{"x", 0, 0, 0.1});
    const auto h = healthy_rate(all_healthy);
    CHECK(h.rate == 1.0);
    CHECK(h.interval.lower == 1.0);
    CHECK(h.interval.upper == 1.0);

    auto mixed = outcomes(300, 0, 0.85, 4);
    std::size_t predicted_healthy = 0;
    for (const auto& c : mixed) predicted_healthy += c.predicted == 0;
    const auto m = healthy_rate(mixed, 100, 20, 20000, 0.95, 2);
    CHECK(m.rate == doctest::Approx(double(predicted_healthy) / mixed.size()));
    CHECK(m.interval.lower <= m.interval.estimate);
    CHECK(m.interval.upper >= m.interval.estimate);
    CHECK_THROWS(healthy_rate({}));
}
