#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "boxlab/ifs.hpp"
#include "boxlab/scaling.hpp"
#include "boxlab/covering.hpp"
#include "oracles.hpp"

using namespace boxlab;

namespace {

Cifs cantor13() {
    return make_similarity_system(
        1, {Similarity{1.0 / 3.0, {0.0}}, Similarity{1.0 / 3.0, {2.0 / 3.0}}});
}

Cifs gauss12() { return make_gauss_system({1, 2}); }

// Independent breadth-first enumeration of stopped words for small systems:
// returns the number of prefix-minimal words with rho <= r < rho(parent),
// with rho evaluated by direct interval composition of the branch maps.
struct BfWord {
    double a = 0, b = 1;   // image interval endpoints (unsorted)
    double deriv_sup = 1;  // sup |S_w'| via chain rule on a sample grid
};

long long exhaustive_stopped_count(const std::vector<std::function<double(double)>>& maps,
                                   const std::vector<std::function<double(double)>>& derivs,
                                   double r) {
    struct Node { std::function<double(double)> f; std::function<double(double)> df; };
    std::vector<Node> frontier;
    for (std::size_t i = 0; i < maps.size(); ++i) frontier.push_back(Node{maps[i], derivs[i]});
    long long stopped = 0;
    int guard = 0;
    while (!frontier.empty() && ++guard < 40) {
        std::vector<Node> next;
        for (const Node& node : frontier) {
            double sup = 0;
            for (int k = 0; k <= 64; ++k) sup = std::max(sup, std::fabs(node.df(k / 64.0)));
            if (sup <= r) {
                ++stopped;
                continue;
            }
            for (std::size_t i = 0; i < maps.size(); ++i) {
                auto f = node.f, df = node.df;
                auto gi = maps[i], dgi = derivs[i];
                next.push_back(Node{[f, gi](double x) { return f(gi(x)); },
                                    [f, df, gi, dgi](double x) { return df(gi(x)) * dgi(x); }});
            }
        }
        frontier = std::move(next);
    }
    return stopped;
}

}  // namespace

TEST_CASE("contraction norms") {
    Cifs sys = cantor13();
    Word w;
    w.letters = {0, 1, 0, 1};
    RhoInterval rho = contraction_norm(sys, w);
    CHECK(rho.hi() == doctest::Approx(std::pow(3.0, -4.0)).epsilon(1e-14));
    CHECK(rho.lo() == doctest::Approx(rho.hi()).epsilon(1e-14));

    Word empty;
    RhoInterval id = contraction_norm(sys, empty);
    CHECK(id.hi() == doctest::Approx(1.0));

    // Gauss word (2,2): S(x) = 1/(2 + 1/(2+x)); dense-sampling oracle.
    Cifs g2 = make_gauss_system({2});
    Word ww;
    ww.letters = {0, 0};
    RhoInterval r22 = contraction_norm(g2, ww);
    double sampled_sup = 0, sampled_inf = 1e9;
    for (int i = 0; i <= 10000; ++i) {
        double x = i / 10000.0;
        double inner = 1.0 / (2.0 + x);
        double deriv = std::fabs(-1.0 / ((2.0 + inner) * (2.0 + inner)) *
                                 (-1.0 / ((2.0 + x) * (2.0 + x))));
        sampled_sup = std::max(sampled_sup, deriv);
        sampled_inf = std::min(sampled_inf, deriv);
    }
    CHECK(r22.hi() == doctest::Approx(sampled_sup).epsilon(1e-9));
    CHECK(r22.hi() == doctest::Approx(1.0 / 25.0).epsilon(1e-12));
    CHECK(r22.lo() <= sampled_inf + 1e-12);
    CHECK(r22.lo() == doctest::Approx(1.0 / 49.0).epsilon(1e-12));
    CHECK(r22.hi() / r22.lo() <= g2.distortion + 1e-9);
}

TEST_CASE("rho approximate submultiplicativity") {
    Cifs sys = gauss12();
    std::mt19937_64 rng(321);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_int_distribution<std::uint32_t> letter(0, 2);
    for (int trial = 0; trial < 1000; ++trial) {
        Word wi, wj, wij;
        int ni = len(rng), nj = len(rng);
        for (int k = 0; k < ni; ++k) wi.letters.push_back(letter(rng));
        for (int k = 0; k < nj; ++k) wj.letters.push_back(letter(rng));
        wij.letters = wi.letters;
        wij.letters.insert(wij.letters.end(), wj.letters.begin(), wj.letters.end());
        double ri = contraction_norm(sys, wi).hi();
        double rj = contraction_norm(sys, wj).hi();
        double rij = contraction_norm(sys, wij).hi();
        CHECK(rij <= ri * rj * (1 + 1e-12));
        CHECK(rij >= ri * rj / sys.distortion * (1 - 1e-12));
    }
}

TEST_CASE("pressure brackets") {
    Cifs half = make_similarity_system(1, {Similarity{0.5, {0.0}}, Similarity{0.5, {0.5}}});
    Bracket p1 = pressure(half, 1.0, 1, UINT64_MAX);
    CHECK(p1.contains(0.0));
    CHECK(p1.width() <= 1e-12);

    Cifs c13 = cantor13();
    Bracket p2 = pressure(c13, std::log(2.0) / std::log(3.0), 1, UINT64_MAX);
    CHECK(std::fabs(p2.lo) <= 1e-12);
    CHECK(std::fabs(p2.hi) <= 1e-12);

    // Gauss digits {1,2} at t = 0.55: negative bracket, sign stable at a
    // deeper level.
    Cifs g = gauss12();
    Bracket p8 = pressure(g, 0.55, 8, UINT64_MAX);
    CHECK(p8.hi < 0);
    Bracket p12 = pressure(g, 0.55, 12, UINT64_MAX);
    CHECK(p12.hi < 0);

    // monotone decreasing in t
    Bracket a = pressure(g, 0.40, 8, UINT64_MAX);
    Bracket b = pressure(g, 0.55, 8, UINT64_MAX);
    Bracket c = pressure(g, 0.70, 8, UINT64_MAX);
    CHECK(a.lo > b.lo);
    CHECK(b.lo > c.lo);
    CHECK(a.hi > b.hi);
    CHECK(b.hi > c.hi);
}

TEST_CASE("hausdorff dimension engine") {
    Cifs half = make_similarity_system(1, {Similarity{0.5, {0.0}}, Similarity{0.5, {0.5}}});
    DimBracket h2 = hausdorff_dim(half, 1e-8);
    CHECK(h2.lo <= 1.0);
    CHECK(h2.hi >= 1.0);
    CHECK(h2.width() <= 1e-6);
    CHECK(h2.certified);

    DimBracket h13 = hausdorff_dim(cantor13(), 1e-8);
    double expected = std::log(2.0) / std::log(3.0);
    CHECK(h13.lo <= expected);
    CHECK(h13.hi >= expected);
    CHECK(h13.width() <= 1e-6);

    // Gauss {1,2}: periodic-point root at level 12, stable against level 14.
    DimBracket g12 = hausdorff_dim(gauss12(), 2e-3, 12);
    CHECK(g12.mid() == doctest::Approx(0.5312).epsilon(4e-3));
    CHECK(g12.width() <= 4e-3);
    DimBracket g14 = hausdorff_dim(gauss12(), 2e-3, 13);
    CHECK(std::fabs(g12.mid() - g14.mid()) <= g12.width() + g14.width());
    // root lies inside the rigorous envelope
    CHECK(g12.env_lo <= g12.mid());
    CHECK(g12.mid() <= g12.env_hi);
}

TEST_CASE("orbit sets and fixed points") {
    Cifs one = make_similarity_system(1, {Similarity{0.4, {0.3}}});
    double fp = 0.3 / 0.6;
    PointCloud orbit = orbit_set(one, fp, 3);
    CHECK(orbit.size() == 1);
    CHECK(orbit.at(0, 0).to_double() == doctest::Approx(fp).epsilon(1e-12));

    PointCloud o2 = orbit_set(cantor13(), 0.0, 2);
    std::multiset<double> got;
    for (std::size_t i = 0; i < o2.size(); ++i) got.insert(o2.at(i, 0).to_double());
    std::multiset<double> expected{0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0};
    REQUIRE(got.size() == 4);
    auto it = got.begin();
    for (double e : expected) CHECK(*it++ == doctest::Approx(e).epsilon(1e-12));

    // Fixed points of squares-of-[2,4] digits: quadratic-root oracle.
    Cifs band = make_gauss_system({4, 9, 16});
    PointCloud fps = fixed_points(band);
    REQUIRE(fps.size() == 3);
    double digits[] = {4, 9, 16};
    for (int i = 0; i < 3; ++i) {
        double beta = digits[i];
        double oracle = 2.0 / (beta + std::sqrt(beta * beta + 4.0));
        CHECK(fps.at(static_cast<std::size_t>(i), 0).to_double() ==
              doctest::Approx(oracle).epsilon(1e-14));
        // solves x = 1/(beta + x)
        double x = fps.at(static_cast<std::size_t>(i), 0).to_double();
        CHECK(x == doctest::Approx(1.0 / (beta + x)).epsilon(1e-12));
    }

    Cifs trunc = cantor13();
    trunc.trunc.max_index = 1;
    CHECK_THROWS_WITH_AS(orbit_set(trunc, 0.0, 2), "degenerate truncation", std::invalid_argument);
}

TEST_CASE("stopping words") {
    Cifs one = make_similarity_system(1, {Similarity{0.5, {0.25}}});
    SymbolicCover cover = stopping_words(one, 0.2);
    REQUIRE(cover.stopped.size() == 1);
    CHECK(cover.stopped[0].word.level() == 3);  // 1/8 <= 1/5 < 1/4
    CHECK(cover.complete);

    SymbolicCover c13 = stopping_words(cantor13(), std::pow(3.0, -5.0) * 1.0001);
    CHECK(c13.stopped.size() == 32);
    for (const auto& w : c13.stopped) CHECK(w.word.level() == 5);

    // Gauss {1,2} at r = 1e-3: level cap and count against an exhaustive
    // functional-composition oracle.
    Cifs g = gauss12();
    double r = 1e-3;
    SymbolicCover gc = stopping_words(g, r);
    CHECK(gc.complete);
    double max_level = std::log(1.0 / r) / std::log(1.0 / g.ratio_bound);
    for (const auto& w : gc.stopped) CHECK(w.word.level() <= static_cast<int>(max_level) + 1);

    std::vector<std::function<double(double)>> maps{
        [](double x) { return 1.0 / (2.0 + x); },
        [](double x) { return 1.0 / (1.0 + 1.0 / (1.0 + x)); },
        [](double x) { return 1.0 / (2.0 + 1.0 / (1.0 + x)); }};
    std::vector<std::function<double(double)>> derivs{
        [](double x) { return -1.0 / ((2.0 + x) * (2.0 + x)); },
        [](double x) {
            double u = 1.0 + 1.0 / (1.0 + x);
            return 1.0 / (u * u) / ((1.0 + x) * (1.0 + x));
        },
        [](double x) {
            double u = 2.0 + 1.0 / (1.0 + x);
            return 1.0 / (u * u) / ((1.0 + x) * (1.0 + x));
        }};
    long long oracle = exhaustive_stopped_count(maps, derivs, r);
    CHECK(static_cast<long long>(gc.stopped.size()) == oracle);

    // Band words carry valid theta values.
    for (const auto& w : gc.band) {
        CHECK(w.theta > 0.0);
        CHECK(w.theta <= 1.0 + 1e-12);
    }
}

TEST_CASE("stopping words budget flag") {
    SymbolicCover partial = stopping_words(cantor13(), 1e-5, 100);
    CHECK_FALSE(partial.complete);

    PointCloud f1 = orbit_set(cantor13(), 0.0, 1);
    TauEstimate tau = symbolic_covering_estimate(cantor13(), 1e-5, 1, f1, 20);
    CHECK_FALSE(tau.complete);
}

TEST_CASE("pressure diverges below the finiteness threshold") {
    // Square-band digit tails converge only for t > 1/4.
    Cifs sys;
    sys.kind = SystemKind::kGauss;
    sys.dim = 1;
    sys.branches.push_back(GaussBranch{16, false});
    sys.tail.kind = TailSpec::Kind::kSquareBandStages;
    sys.tail.next_stage = 1;
    sys.tail.a_prev = 2.0L;
    sys.finalize();
    CHECK_THROWS_WITH_AS(pressure(sys, 0.2, 1, UINT64_MAX), "pressure infinite at t",
                         std::runtime_error);
    Bracket fine = pressure(sys, 0.4, 1, UINT64_MAX);
    CHECK(std::isfinite(fine.hi));
}

TEST_CASE("saturation of finite subsystems") {
    // #I(r) ~ r^-h kicks in once log(1/r) dominates the one-level offset:
    // below 3^-13 the sampled exponent stays within 0.05 of h.
    Cifs c13 = cantor13();
    double h = std::log(2.0) / std::log(3.0);
    for (int k = 13; k <= 17; k += 2) {
        double r = std::pow(3.0, -k);
        SymbolicCover cover = stopping_words(c13, r);
        CHECK(std::log(static_cast<double>(cover.band.size())) / std::log(1.0 / r) >= h - 0.05);
    }
}

TEST_CASE("tau symbolic covering estimate") {
    // Singleton attractor: every term counts one box.
    Cifs one = make_similarity_system(1, {Similarity{0.5, {0.25}}});
    PointCloud f1 = fixed_points(one);
    double r = 1e-3;
    TauEstimate tau = symbolic_covering_estimate(one, r, 1, f1);
    long long words = static_cast<long long>(std::floor(std::log(1.0 / r) / std::log(2.0))) + 1;
    CHECK(tau.terms == words);
    CHECK(tau.tau == doctest::Approx(static_cast<double>(words)));
    CHECK(tau.nr_bracket.lo <= 1.0);
    CHECK(tau.nr_bracket.hi >= 1.0);

    // Cantor at r = 3^-6: within factor 4 of the direct count 64 of the
    // depth-8 endpoint cloud.
    Cifs c13 = cantor13();
    PointCloud fc = orbit_set(c13, 0.0, 1);
    double rc = std::pow(3.0, -6.0);
    TauEstimate tc = symbolic_covering_estimate(c13, rc * 1.0001, 1, fc);
    auto nums = oracles::cantor_lower_numerators(8);
    PointCloud depth8(1);
    for (long long a : nums)
        depth8.push_fixed1(Fixed96::from_rational(static_cast<std::uint64_t>(a), 6561));
    long long direct = count_boxes(depth8, Fixed96::from_rational(1, 729));
    CHECK(direct == 64);
    CHECK(tc.tau <= 4.0 * direct);
    CHECK(tc.tau >= direct / 4.0);
}

TEST_CASE("tau sandwich for gauss {1,2}") {
    // tau_1 carries the distortion constant of the level transfer: the gap
    // |log N - log tau| is a stable constant (~log 17 here, shrinking with m),
    // so the sandwich holds in the eps*log(1/r) + C form.
    Cifs g = gauss12();
    PointCloud f1 = orbit_set(g, fixed_points(g, 1).at(0, 0).to_double(), 1);
    const double eps = 0.05;
    const double c_const = std::log(20.0);
    double prev_ratio = 1e9;
    for (double r : {1e-3, 1e-5}) {
        TauEstimate tau = symbolic_covering_estimate(g, r, 1, f1);
        // direct count from an independent cylinder-endpoint enumeration
        SymbolicCover cover = stopping_words(g, r);
        PointCloud cl(1);
        for (const auto& cw : cover.stopped) {
            double pp = 1, p = 0, qp = 0, q = 1;
            for (std::uint32_t l : cw.word.letters) {
                const GaussBranch& br = g.branches[l];
                double dd = static_cast<double>(br.digit);
                double npp, np, nqp, nq;
                if (!br.composed_with_one) {
                    npp = p; np = pp + p * dd; nqp = q; nq = qp + q * dd;
                } else {
                    npp = pp + p * dd; np = npp + p; nqp = qp + q * dd; nq = nqp + q;
                }
                pp = npp; p = np; qp = nqp; q = nq;
            }
            cl.push1(p / q);
            cl.push1((pp + p) / (qp + q));
        }
        double n_direct = static_cast<double>(count_boxes(cl, r));
        double gap = std::fabs(std::log(tau.tau) - std::log(n_direct));
        CHECK(gap <= eps * std::log(1.0 / r) + c_const);
        // normalised gap shrinks as r refines
        double ratio = gap / std::log(1.0 / r);
        CHECK(ratio <= prev_ratio + 1e-9);
        prev_ratio = ratio;
    }
    // tau_2 tightens the transfer: smaller constant at the same scale.
    PointCloud f2 = orbit_set(g, fixed_points(g, 1).at(0, 0).to_double(), 2);
    TauEstimate t1 = symbolic_covering_estimate(g, 1e-4, 1, f1);
    TauEstimate t2 = symbolic_covering_estimate(g, 1e-4, 2, f2);
    CHECK(t2.tau <= t1.tau);
}

TEST_CASE("bounded neighbourhood diagnostics") {
    // Well-separated images: multiplicity 1 below the separation gap.
    Cifs sep = make_similarity_system(1, {Similarity{0.2, {0.0}}, Similarity{0.2, {0.8}}});
    SymbolicCover cover = stopping_words(sep, 0.05);
    // probes on the attractor, r below the separation gap
    int mult = bounded_neighbourhood_count(sep, cover.stopped, 0.01, {0.0, 0.2, 0.8, 1.0});
    CHECK(mult == 1);

    // Two abutting intervals: probing the shared endpoint sees both.
    Cifs abut = make_similarity_system(1, {Similarity{0.5, {0.0}}, Similarity{0.5, {0.5}}});
    SymbolicCover ca = stopping_words(abut, 0.3);
    int m2 = bounded_neighbourhood_count(abut, ca.stopped, 0.05, {0.5});
    CHECK(m2 == 2);

    // Gauss {1,2}: an incomparable family whose contractions straddle r
    // (words stopped a factor K/rho_min above r), bounded multiplicity that
    // stays put as probes double.
    Cifs g = gauss12();
    std::vector<CoverWord> family = stopping_words(g, 0.036).stopped;
    // Probes sampled on the attractor: random level-8 cylinder endpoints.
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<std::uint32_t> letter(0, 2);
    auto random_attractor_point = [&]() {
        double x = 0;
        for (int lvl = 0; lvl < 8; ++lvl) {
            std::uint32_t i = letter(rng);
            const GaussBranch& b = g.branches[i];
            double d = static_cast<double>(b.digit);
            x = b.composed_with_one ? (x + 1.0) / (d * x + d + 1.0) : 1.0 / (d + x);
        }
        return x;
    };
    std::vector<double> probes;
    for (int i = 0; i < 1000; ++i) probes.push_back(random_attractor_point());
    int m6 = bounded_neighbourhood_count(g, family, 1e-3, probes);
    CHECK(m6 >= 1);
    CHECK(m6 <= 8);
    for (int i = 0; i < 1000; ++i) probes.push_back(random_attractor_point());
    int m6b = bounded_neighbourhood_count(g, family, 1e-3, probes);
    CHECK(m6b <= 8);
    CHECK(m6b >= m6);

    // Comparable words are rejected.
    std::vector<CoverWord> bad = family;
    CoverWord prefix;
    prefix.word.letters = {0};
    prefix.rho = RhoInterval{0, 0};
    bad.push_back(prefix);
    CHECK_THROWS_WITH_AS(bounded_neighbourhood_count(g, bad, 1e-3, probes), "invalid family",
                         std::invalid_argument);
}

TEST_CASE("discrete approximation check") {
    Cifs c13 = cantor13();
    PointCloud f = fixed_points(c13);
    std::vector<double> scales;
    for (int k = 2; k <= 20; ++k) scales.push_back(std::pow(2.0, -k));
    CHECK(discrete_approximation_check(f, f, scales) == doctest::Approx(0.0));

    PointCloud o1 = orbit_set(c13, 0.0, 1);
    CHECK(discrete_approximation_check(f, o1, scales) <= std::log(2.0) + 1e-12);

    Cifs band = make_gauss_system({4, 9, 16});
    PointCloud fb = fixed_points(band);
    PointCloud ob = orbit_set(band, 0.0, 1);
    std::vector<double> deep;
    for (int k = 0; k < 20; ++k) deep.push_back(std::pow(10.0, -2.0 - 8.0 * k / 19.0));
    CHECK(discrete_approximation_check(fb, ob, deep) <= std::log(2.0) + 1e-12);
}

TEST_CASE("higher-iterate psi stability") {
    Cifs c13 = cantor13();
    PointCloud f1 = orbit_set(c13, 0.0, 1);
    PointCloud f2 = orbit_set(c13, 0.0, 2);
    double h = std::log(2.0) / std::log(3.0);
    auto s_of = [](const PointCloud& cloud, double rr) {
        return std::log(static_cast<double>(count_boxes(cloud, rr))) / std::log(1.0 / rr);
    };
    double prev = 1e9;
    for (int k = 4; k <= 10; k += 3) {
        double r = std::pow(3.0, -k);
        PsiResult p1 = psi([&](double rr) { return s_of(f1, rr); }, h, r, 1);
        PsiResult p2 = psi([&](double rr) { return s_of(f2, rr); }, h, r, 1);
        double diff = std::fabs(p1.value - p2.value);
        CHECK(diff <= prev + 1e-9);
        prev = diff;
    }
    CHECK(prev <= 0.1);
}

TEST_CASE("system json round trip") {
    Cifs g = gauss12();
    Cifs g2 = Cifs::from_json(g.to_json());
    CHECK(g2.branches.size() == g.branches.size());
    CHECK(g2.distortion == g.distortion);

    Cifs c = cantor13();
    Cifs c2 = Cifs::from_json(c.to_json());
    REQUIRE(c2.sims.size() == 2);
    CHECK(c2.sims[1].translation[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-16));
}
