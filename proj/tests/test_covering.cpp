#include <doctest.h>

#include <cmath>
#include <random>

#include "boxlab/covering.hpp"
#include "oracles.hpp"

using namespace boxlab;

namespace {

PointCloud cantor_cloud(int depth) {
    auto nums = oracles::cantor_lower_numerators(depth);
    std::uint64_t den = 1;
    for (int i = 0; i < depth; ++i) den *= 3;
    PointCloud cloud(1);
    for (long long a : nums)
        cloud.push_fixed1(Fixed96::from_rational(static_cast<std::uint64_t>(a), den));
    return cloud;
}

// Moran fallback cloud with r_n = 2^-2^n, built independently of the
// constructions module: corner sums of the per-level offsets.
PointCloud moran_pow_cloud(int depth) {
    std::vector<double> rho(static_cast<std::size_t>(depth) + 1);
    rho[0] = 1.0;
    for (int n = 1; n <= depth; ++n)
        rho[static_cast<std::size_t>(n)] =
            rho[static_cast<std::size_t>(n) - 1] * std::pow(2.0, -std::pow(2.0, n));
    std::vector<double> pts{0.0};
    for (int n = 1; n <= depth; ++n) {
        double off = rho[static_cast<std::size_t>(n) - 1] - rho[static_cast<std::size_t>(n)];
        std::vector<double> next;
        for (double p : pts) {
            next.push_back(p);
            next.push_back(p + off);
        }
        pts = std::move(next);
    }
    PointCloud cloud(1);
    for (double p : pts) cloud.push1(p);
    return cloud;
}

}  // namespace

TEST_CASE("count_boxes basics") {
    PointCloud single(1);
    single.push1(0.37);
    CHECK(count_boxes(single, 0.5) == 1);
    CHECK(count_boxes(single, 1e-9) == 1);

    PointCloud two(1);
    two.push1(0.0);
    two.push1(0.5);
    CHECK(count_boxes(two, 0.25) == 2);

    // Depth-6 middle-third endpoints: one cell per level-6 interval.
    PointCloud cantor = cantor_cloud(6);
    CHECK(cantor.size() == 64);
    CHECK(count_boxes(cantor, Fixed96::from_rational(1, 729)) == 64);
}

TEST_CASE("count_boxes errors") {
    PointCloud empty(1);
    CHECK_THROWS_WITH_AS(count_boxes(empty, 0.5), "empty input", std::invalid_argument);
    PointCloud single(1);
    single.push1(0.2);
    CHECK_THROWS_WITH_AS(count_boxes(single, 1.5), "scale out of range", std::invalid_argument);
    CHECK_THROWS_WITH_AS(count_boxes(single, 0.0), "scale out of range", std::invalid_argument);
}

TEST_CASE("covering_profile examples") {
    PointCloud single(1);
    single.push1(0.4);
    CoveringProfile p = covering_profile(single, std::vector<double>{0.5, 0.25});
    CHECK(p.entries[0].exponent == doctest::Approx(0.0));
    CHECK(p.entries[1].exponent == doctest::Approx(0.0));
    CHECK(p.grid_constant == doctest::Approx(std::log(2.0)));

    // Uniform 2^k grid at r = 2^-k: full occupancy, exponent exactly 1.
    const int k = 6;
    PointCloud grid(1);
    for (int i = 0; i < (1 << k); ++i)
        grid.push_fixed1(Fixed96::from_rational(static_cast<std::uint64_t>(i), 1u << k));
    CoveringProfile gp = covering_profile(grid, std::vector<Fixed96>{Fixed96::from_pow2(k)});
    CHECK(gp.entries[0].count == (1 << k));
    CHECK(gp.entries[0].exponent == doctest::Approx(1.0).epsilon(1e-12));

    // Moran cloud r_n = 2^-2^n at rho_3 = 2^-14: 8 cells, exponent 3/14.
    PointCloud moran = moran_pow_cloud(4);
    CoveringProfile mp = covering_profile(moran, std::vector<Fixed96>{Fixed96::from_pow2(14)});
    CHECK(mp.entries[0].count == 8);
    CHECK(mp.entries[0].exponent == doctest::Approx(3.0 / 14.0).epsilon(1e-12));
}

TEST_CASE("covering_class_samples") {
    // zero exponents map to zero samples
    PointCloud single(1);
    single.push1(0.2);
    CoveringProfile zp = covering_profile(
        single, std::vector<double>{std::exp(-3.0), std::exp(-4.0), std::exp(-5.0)});
    for (auto [x, v] : covering_class_samples(zp)) {
        CHECK(v == 0.0);
        CHECK(x > 0.0);
    }

    CoveringProfile p;
    p.dim = 1;
    p.grid_constant = grid_constant(1);
    p.entries.push_back(CoveringEntry{std::exp(-std::exp(1.0)), 1, 0.5});
    // exponent field is carried through the reparametrisation untouched
    p.entries[0].exponent = 0.5;
    auto samples = covering_class_samples(p);
    CHECK(samples[0].first == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(samples[0].second == doctest::Approx(0.5));

    PointCloud moran = moran_pow_cloud(4);
    CoveringProfile mp = covering_profile(moran, std::vector<Fixed96>{Fixed96::from_pow2(14)});
    auto ms = covering_class_samples(mp);
    CHECK(ms[0].first == doctest::Approx(std::log(14.0 * std::log(2.0))).epsilon(1e-12));
    CHECK(ms[0].second == doctest::Approx(3.0 / 14.0));

    CoveringProfile coarse;
    coarse.entries.push_back(CoveringEntry{0.5, 2, 0.3});
    CHECK_THROWS_WITH_AS(covering_class_samples(coarse),
                         "scale too coarse for doubly-logarithmic chart", std::invalid_argument);
}

TEST_CASE("count monotonicity on nested scale lists") {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    PointCloud cloud(1);
    for (int i = 0; i < 400; ++i) cloud.push1(unif(rng));
    std::vector<Fixed96> scales;
    for (int k = 1; k <= 30; ++k) scales.push_back(Fixed96::from_pow2(k));
    CoveringProfile p = covering_profile(cloud, scales);  // throws on regression
    for (std::size_t i = 1; i < p.entries.size(); ++i)
        CHECK(p.entries[i].count >= p.entries[i - 1].count);
}

TEST_CASE("covering regularity inequalities on sampled scale pairs") {
    PointCloud cantor = cantor_cloud(10);
    std::vector<double> scales;
    for (int k = 2; k <= 40; ++k) scales.push_back(std::pow(2.0, -k));
    CoveringProfile p = covering_profile(cantor, scales);
    const double a_d = p.grid_constant;
    const int d = 1;
    for (std::size_t coarse = 0; coarse < p.entries.size(); ++coarse) {
        for (std::size_t fine = coarse; fine < p.entries.size(); ++fine) {
            double r = p.entries[fine].r;
            double theta = std::log(p.entries[coarse].r) / std::log(r);
            double s_r = p.entries[fine].exponent;
            double s_theta = p.entries[coarse].exponent;
            CHECK(theta * s_theta <= s_r + 1e-12);
            CHECK(s_r <= d - (d - s_theta) * theta + a_d / std::log(1.0 / r) + 1e-12);
        }
    }
}

TEST_CASE("small-scale regularity envelope decreases") {
    PointCloud cantor = cantor_cloud(12);
    std::vector<double> scales;
    for (int k = 4; k <= 18; ++k) scales.push_back(std::pow(3.0, -k));
    CoveringProfile p = covering_profile(cantor, scales);
    double max_exp = 0;
    for (const auto& e : p.entries) max_exp = std::max(max_exp, e.exponent);
    // sup over sampled theta of theta(s(r^theta) - max_exp), along refining r.
    std::vector<double> sup_excess;
    for (std::size_t fine = 2; fine < p.entries.size(); ++fine) {
        double r = p.entries[fine].r;
        double m = -1e9;
        for (std::size_t coarse = 0; coarse <= fine; ++coarse) {
            double theta = std::log(p.entries[coarse].r) / std::log(r);
            m = std::max(m, theta * (p.entries[coarse].exponent - max_exp));
        }
        sup_excess.push_back(m);
    }
    for (std::size_t i = 1; i < sup_excess.size(); ++i)
        CHECK(sup_excess[i] <= sup_excess[i - 1] + 1e-9);
    CHECK(sup_excess.back() <= 1e-9);
}

TEST_CASE("grid anchor shift changes counts by at most 2^d") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    PointCloud cloud(2);
    for (int i = 0; i < 300; ++i) {
        double p[2] = {unif(rng) * 0.9, unif(rng) * 0.9};
        cloud.push(p);
    }
    for (int trial = 0; trial < 10; ++trial) {
        double r = 0.01 + 0.2 * unif(rng);
        Fixed96 rf = Fixed96::from_double(r);
        long long base = count_boxes(cloud, rf);
        Fixed96 off = Fixed96::from_double(unif(rng) * r * 0.999);
        long long shifted = count_boxes_offset(cloud, rf, off);
        CHECK(shifted <= 4 * base);
        CHECK(base <= 4 * shifted);
    }
}
