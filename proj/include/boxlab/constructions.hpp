#pragma once

// Explicit constructions: homogeneous Moran sets with prescribed covering
// class, countable discrete sets, similarity systems with prescribed
// fixed-point class and Hausdorff dimension, the sharpness family, and the
// restricted-digit continued-fraction set whose box dimension fails to exist.

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "boxlab/cloud.hpp"
#include "boxlab/ifs.hpp"
#include "boxlab/scaling.hpp"

namespace boxlab {

struct MoranSpec {
    int dim = 1;
    std::vector<double> ratios;   // r_k in (0, 1/2]
    std::vector<double> rho;      // rho_k = r_1 ... r_k
    std::vector<double> knots_x;  // x_k = log log(1/rho_k)
    // Dyadic fast path: every rho_k = 2^-pow2[k], exact in fixed point.
    std::optional<std::vector<int>> pow2;
    int depth_limit = 0;
};

// Knot recursion: with w(x) = g(x) e^x (non-decreasing for g in G(0,d)),
// place knots at w(x_k) = k d log 2, so the exact count 2^{dk} at scale
// rho_k = exp(-exp(x_k)) reproduces g at every knot.  Asymptotically-zero
// classes fall back to r_n = 2^-2^n.
MoranSpec moran_scales_from_class(const ScalingFunction& g, int dim, int depth);

// Lower corners of the depth-level cubes; N_{rho_n} of the depth-n cloud is
// exactly 2^{dn} in grid counting.
PointCloud moran_points(const MoranSpec& spec, int depth);

struct DiscreteSetBudget {
    int max_slab = 40;                   // slabs (0, 1/n)^d for n = 1..max_slab
    std::uint64_t max_points = 2'000'000;
};

// Countable discrete set accumulating only at 0 with the covering class of
// the Moran set for g: union over n of 2^-n-nets of M intersected with
// (0, 1/n)^d.
PointCloud discrete_set_from_class(const ScalingFunction& g, int dim,
                                   const DiscreteSetBudget& budget = {});

struct PrescribedSystem {
    Cifs system;
    PointCloud fixed_cloud;        // fixed points of the retained generators
    double h = 0;
    double common_ratio = 0;       // c for the 2^{dn}-1 block maps
    double point_mass = 0;         // sum of c_p^h over the per-point maps
    int block_exponent = 0;        // n with log(2^{dn}-1)/(n log 2) > h
    nlohmann::json provenance;
};

// Similarity system whose fixed points carry the class g and whose Hausdorff
// dimension is exactly h: per-point maps at a discrete class-g set inside
// (0, 2^-n)^d plus 2^{dn}-1 common-ratio maps outside it, with
// (2^{dn}-1) c^h = 1 - sum c_p^h.
PrescribedSystem ifs_with_prescribed(const ScalingFunction& g, double h, int dim,
                                     const DiscreteSetBudget& budget = {});

// Solves c from (2^{dn}-1) c^h = 1 - point_mass.
double prescribed_common_ratio(int dim, int n, double h, double point_mass);

struct SharpnessParams {
    double h = 0, s = 0, t = 0, beta = 0;
    int dim = 1;
    double delta = 0.01;
    int stages = 5;
};

struct SharpnessStage {
    double t_n = 0, beta_n = 0;
    double a1 = 0, a2 = 0, a2_raw = 0, a3 = 0, a3_contact = 0;
    double b1 = 0, b2 = 0;
};

struct SharpnessSystem {
    SharpnessParams params;       // with the delta actually used
    std::vector<SharpnessStage> stage_constants;
    ScalingFunction f;            // target fixed-point class (sawtooth)
    ScalingFunction predicted_envelope;
    std::vector<double> envelope_knot_values;  // envelope value at each stage junction
    nlohmann::json provenance;
};

// Stage constants and the two concatenations; optionally build the realizing
// similarity system via ifs_with_prescribed.
SharpnessSystem sharpness_system(const SharpnessParams& params);

struct DigitSet {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> bands;  // integer bands [a_n, 2a_n]
    std::uint64_t cut = 0;                                       // I = I_0 cap [cut, inf)
    int explicit_stages = 0;
    std::vector<long double> a_seq;  // a_0 .. a_{n_max}
    nlohmann::json provenance;
};

Cifs gauss_cifs(const std::vector<std::uint64_t>& digits);
Cifs gauss_cifs(const DigitSet& digits);

// The restricted-digit family: a_0 = 2, a_n = (2 a_{n-1})^n, digits the
// squares of the band integers, cut at the smallest stage boundary whose
// certified Hausdorff upper bound is below 1/3.
DigitSet nonexistence_digit_set(int n_max, double containment = 1.0);

}  // namespace boxlab
