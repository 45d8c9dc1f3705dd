#pragma once

// Countable contraction systems: contraction norms, pressure, Hausdorff
// dimension, orbit/fixed-point clouds, symbolic covers and tau counts.
//
// Two built-in families:
//   - similarity systems S(x) = c x + b on [0,1]^d (K = 1, rho exact);
//   - Gauss-map inverse branches S_b(x) = 1/(b+x) on [0,1], with composed
//     branches S_{1b}(x) = 1/(b + 1/(1+x)) when the digit 1 is present
//     (K = 4; rho(word) = q^-2 from the continuant is the exact sup norm,
//     the inf norm is (q + q')^-2).
//
// Infinite generator families are enumerated lazily under an explicit
// truncation; pressure brackets carry certified tail corrections (geometric
// ratio schedules and square-band digit stages only).

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxlab/cloud.hpp"
#include "boxlab/covering.hpp"

namespace boxlab {

struct Similarity {
    double ratio = 0;
    std::vector<double> translation;
};

struct GaussBranch {
    std::uint64_t digit = 0;
    bool composed_with_one = false;  // S_{1b} instead of S_b
};

enum class SystemKind { kSimilarity, kGauss };

struct Truncation {
    std::uint64_t max_index = 10'000'000;  // generators retained
    int max_level = 24;                    // word level cap
};

// Certified bound on the generator mass dropped by truncation.
struct TailSpec {
    enum class Kind { kNone, kGeometricRatios, kSquareBandStages };
    Kind kind = Kind::kNone;
    // kGeometricRatios: dropped ratios satisfy c_k <= 2^-k for index k >= first_index.
    std::uint64_t first_index = 0;
    // kSquareBandStages: dropped digits are {b^2 : b in [a_n, 2a_n]} for stages
    // n >= next_stage, with a_n = (2 a_{n-1})^n and a_{next_stage-1} = a_prev.
    int next_stage = 0;
    long double a_prev = 0;
};

// Digit generator: squares of the integers in closed bands, cut from below.
struct DigitBandSpec {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> bands;
    std::uint64_t min_digit = 0;
};

struct Cifs {
    SystemKind kind = SystemKind::kSimilarity;
    int dim = 1;
    std::vector<Similarity> sims;
    std::vector<GaussBranch> branches;
    double distortion = 1.0;   // K
    double ratio_bound = 0.0;  // xi = sup_i rho(i)
    Truncation trunc;
    TailSpec tail;
    std::optional<std::vector<std::uint64_t>> digit_list;  // gauss source spec
    std::optional<DigitBandSpec> band_spec;

    std::size_t generator_count() const {
        return kind == SystemKind::kSimilarity ? sims.size() : branches.size();
    }
    void finalize();  // compute xi, K; validate

    nlohmann::json to_json() const;
    static Cifs from_json(const nlohmann::json& j);
};

Cifs make_similarity_system(int dim, std::vector<Similarity> gens);
Cifs make_gauss_system(const std::vector<std::uint64_t>& digits);
Cifs make_gauss_band_system(const DigitBandSpec& spec, const TailSpec& tail);

struct Word {
    std::vector<std::uint32_t> letters;  // generator indices
    int level() const { return static_cast<int>(letters.size()); }
};

// Contraction norm enclosure in log space: exact sup at exp(log_hi), inf at
// exp(log_lo); hi/lo <= K.
struct RhoInterval {
    double log_lo = 0;
    double log_hi = 0;
    double lo() const { return std::exp(log_lo); }
    double hi() const { return std::exp(log_hi); }
};

RhoInterval contraction_norm(const Cifs& system, const Word& w);

struct Bracket {
    double lo = 0;
    double hi = 0;
    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

// Level-n pressure bracket: lo from inf-norm sums (supermultiplicative),
// hi from sup-norm sums plus certified truncation tails.  Throws
// "pressure infinite at t" when the tail bound diverges.
Bracket pressure(const Cifs& system, double t, int level, std::uint64_t max_index);

// (1/n) log of the level-n sum of |S_w'(x_w)|^t over fixed points x_w; the
// primary root estimator for conformal systems (lies inside the bracket).
double periodic_pressure(const Cifs& system, double t, int level, std::uint64_t max_index);

struct DimBracket {
    double lo = 0;
    double hi = 0;
    bool certified = false;  // [lo,hi] is a rigorous enclosure
    double env_lo = 0;       // rigorous envelope from the pressure brackets
    double env_hi = 0;
    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
};

// Bisection on the pressure sign.  Finite similarity systems solve the Moran
// equation directly (certified).  Conformal systems report the root of the
// level-n fixed-point-derivative pressure, refined to `tol`, together with
// the rigorous envelope [root of lower bracket, root of upper bracket].
DimBracket hausdorff_dim(const Cifs& system, double tol, int level = 12);

// Fixed points of the retained generators (exact for Gauss digit branches).
PointCloud fixed_points(const Cifs& system, std::uint64_t max_count = UINT64_MAX);

// O(x0, m) = {S_w(x0) : |w| = m} over retained generators; exact rational
// tracking for Gauss words while it fits 64-bit.
PointCloud orbit_set(const Cifs& system, const std::vector<double>& x0, int m,
                     std::uint64_t point_budget = 10'000'000);
PointCloud orbit_set(const Cifs& system, double x0, int m,
                     std::uint64_t point_budget = 10'000'000);

struct CoverWord {
    Word word;
    RhoInterval rho;
    double theta = 0;  // 1 - log rho / log r, populated for band words
};

struct SymbolicCover {
    double r = 0;
    std::vector<CoverWord> stopped;  // prefix-minimal: rho(w) <= r < rho(parent)
    std::vector<CoverWord> band;     // r < rho(w) <= r K / rho_min (finite systems)
    long long residual_count = 0;    // N_r bound for the truncated-away residual
    bool complete = true;
};

SymbolicCover stopping_words(const Cifs& system, double r, std::uint64_t word_budget = 10'000'000);

struct TauEstimate {
    double tau = 0;            // sum over (I^m)* words with rho > r of N_{r/rho}(F_m)
    long long terms = 0;
    double residual = 0;       // N_r(F_m) bound for the small-word residual
    Bracket nr_bracket;        // enclosure for N_r(limit set) with explicit slack
    double slack_factor = 1;   // multiplicative slack applied on each side
    bool complete = true;
};

TauEstimate symbolic_covering_estimate(const Cifs& system, double r, int m,
                                       const PointCloud& fm_cloud,
                                       std::uint64_t word_budget = 10'000'000);

// Finite-scale diagnostic for the bounded neighbourhood constant: maximum
// over probes x of #{w in family : rho(w) > r, S_w(X) meets B(x, r)}.
int bounded_neighbourhood_count(const Cifs& system, const std::vector<CoverWord>& family,
                                double r, const std::vector<double>& probes);

// max over scales of |log N_r(E1) - log N_r(E2)|.
double discrete_approximation_check(const PointCloud& e1, const PointCloud& e2,
                                    const std::vector<double>& scales);

}  // namespace boxlab
