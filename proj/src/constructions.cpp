#include "boxlab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace boxlab {

namespace {

constexpr double kLog2 = 0.6931471805599453;

// g is asymptotically zero iff its final regime decays to 0.
bool asymptotically_zero(const ScalingFunction& g) {
    const Segment& last = g.segments.back();
    double limit = last.kind == SegmentKind::kConstant ? last.value : last.target;
    return std::fabs(limit) < 1e-12;
}

// w(x) = g(x) e^x, non-decreasing for g in G(0, d).
double weight(const ScalingFunction& g, double x) { return g.eval(x) * std::exp(x); }

// Leftmost root of w(x) = target; throws when the recursion stalls.
double weight_root(const ScalingFunction& g, double target, double lo_hint) {
    double hi = std::max(lo_hint, 1.0);
    int guard = 0;
    while (weight(g, hi) < target) {
        hi *= 2.0;
        if (hi > 1e4 || ++guard > 64) throw std::runtime_error("recursion stalled");
    }
    double lo = std::min(lo_hint, hi);
    while (weight(g, lo) >= target) {
        lo -= std::max(1.0, std::fabs(lo));
        if (lo < -1e4) throw std::runtime_error("recursion stalled");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++i) {
        double mid = 0.5 * (lo + hi);
        if (weight(g, mid) >= target) hi = mid; else lo = mid;
    }
    return hi;
}

}  // namespace

MoranSpec moran_scales_from_class(const ScalingFunction& g, int dim, int depth) {
    if (dim < 1) throw std::invalid_argument("dim must be positive");
    if (depth < 1) throw std::invalid_argument("depth must be positive");
    g.validate(static_cast<double>(dim));

    MoranSpec spec;
    spec.dim = dim;
    spec.depth_limit = depth;

    if (asymptotically_zero(g)) {
        // Fallback sequence r_n = 2^-2^n; rho_n = 2^-(2^{n+1}-2).
        spec.pow2 = std::vector<int>();
        for (int n = 1; n <= depth; ++n) {
            long long e = (2LL << n) - 2;
            if (e > Fixed96::kFracBits) {
                spec.depth_limit = n - 1;
                break;
            }
            spec.pow2->push_back(static_cast<int>(e));
            spec.ratios.push_back(std::pow(2.0, -std::pow(2.0, n)));
            spec.rho.push_back(std::pow(2.0, -static_cast<double>(e)));
            spec.knots_x.push_back(std::log(static_cast<double>(e) * kLog2));
        }
        if (spec.ratios.empty()) throw std::runtime_error("precision exceeded");
        return spec;
    }

    // Constant class with integer d/c: exactly dyadic knots.
    bool constant_class = g.segments.size() == 1 &&
                          g.segments.front().kind == SegmentKind::kConstant &&
                          std::fabs(g.left_extension - g.segments.front().value) < 1e-12;
    if (constant_class) {
        double c = g.segments.front().value;
        if (c > 1e-12) {
            double q = dim / c;
            double qr = std::round(q);
            if (std::fabs(q - qr) < 1e-9 && qr >= 1) {
                int qi = static_cast<int>(qr);
                spec.pow2 = std::vector<int>();
                for (int k = 1; k <= depth; ++k) {
                    if (static_cast<long long>(k) * qi > Fixed96::kFracBits) {
                        spec.depth_limit = k - 1;
                        break;
                    }
                    spec.pow2->push_back(k * qi);
                    spec.ratios.push_back(std::pow(2.0, -qi));
                    spec.rho.push_back(std::pow(2.0, -static_cast<double>(k * qi)));
                    spec.knots_x.push_back(std::log(k * qi * kLog2));
                }
                if (spec.ratios.empty()) throw std::runtime_error("precision exceeded");
                return spec;
            }
        }
    }

    double x_prev = -1e3;
    double log_rho_prev = 0;  // log rho_0 = 0
    for (int k = 1; k <= depth; ++k) {
        double x_k = weight_root(g, k * dim * kLog2, x_prev);
        double log_rho = -std::exp(x_k);
        double ratio = std::exp(log_rho - log_rho_prev);
        if (ratio > 0.5 + 1e-9)
            throw std::runtime_error("moran ratio above 1/2: class violation");
        if (-log_rho > 62.0 * kLog2) {  // keep corners well inside fixed-point range
            spec.depth_limit = k - 1;
            break;
        }
        spec.ratios.push_back(std::min(ratio, 0.5));
        spec.rho.push_back(std::exp(log_rho));
        spec.knots_x.push_back(x_k);
        x_prev = x_k;
        log_rho_prev = log_rho;
    }
    if (spec.ratios.empty()) throw std::runtime_error("precision exceeded");
    spec.depth_limit = static_cast<int>(spec.ratios.size());
    return spec;
}

PointCloud moran_points(const MoranSpec& spec, int depth) {
    if (depth < 0) throw std::invalid_argument("depth must be non-negative");
    if (depth > static_cast<int>(spec.ratios.size())) throw std::runtime_error("precision exceeded");
    double total = std::pow(2.0, spec.dim * depth);
    if (total > 4e6) throw std::runtime_error("budget exceeded");

    // Per-level offset rho_{n-1} - rho_n, exact when dyadic.
    std::vector<Fixed96> offsets;
    for (int n = 1; n <= depth; ++n) {
        if (spec.pow2) {
            int e_prev = n == 1 ? 0 : (*spec.pow2)[static_cast<std::size_t>(n) - 2];
            int e_cur = (*spec.pow2)[static_cast<std::size_t>(n) - 1];
            offsets.push_back(Fixed96::from_raw((u128{1} << (Fixed96::kFracBits - e_prev)) -
                                                (u128{1} << (Fixed96::kFracBits - e_cur))));
        } else {
            double prev = n == 1 ? 1.0 : spec.rho[static_cast<std::size_t>(n) - 2];
            offsets.push_back(Fixed96::from_double(prev - spec.rho[static_cast<std::size_t>(n) - 1]));
        }
    }

    const int d = spec.dim;
    std::vector<Fixed96> corners(static_cast<std::size_t>(d), Fixed96::zero());
    PointCloud cloud(d);
    // Depth-first over the 2^d choices at each level.
    struct Frame { std::vector<Fixed96> pt; unsigned next; };
    std::vector<Frame> stack;
    stack.push_back(Frame{corners, 0});
    const unsigned kids = 1u << d;
    while (!stack.empty()) {
        Frame& f = stack.back();
        int level = static_cast<int>(stack.size()) - 1;
        if (level == depth) {
            cloud.push_fixed(f.pt);
            stack.pop_back();
            continue;
        }
        if (f.next == kids) {
            stack.pop_back();
            continue;
        }
        unsigned mask = f.next++;
        Frame child;
        child.pt = f.pt;
        child.next = 0;
        for (int a = 0; a < d; ++a)
            if (mask & (1u << a))
                child.pt[static_cast<std::size_t>(a)].m += offsets[static_cast<std::size_t>(level)].m;
        stack.push_back(std::move(child));
    }
    return cloud;
}

PointCloud discrete_set_from_class(const ScalingFunction& g, int dim,
                                   const DiscreteSetBudget& budget) {
    MoranSpec spec = moran_scales_from_class(g, dim, 96);
    const int levels = static_cast<int>(spec.ratios.size());
    const double sqrt_d = std::sqrt(static_cast<double>(dim));

    std::vector<std::vector<Fixed96>> reps;
    std::uint64_t total = 0;
    for (int n = 1; n <= budget.max_slab; ++n) {
        // net depth: first k with rho_k * sqrt(d) <= 2^-n
        int k = 0;
        while (k < levels && spec.rho[static_cast<std::size_t>(k)] * sqrt_d > std::pow(2.0, -n))
            ++k;
        if (k >= levels) break;  // precision exhausted
        int depth = k + 1;
        if (std::pow(2.0, dim * depth) > 4e6) break;
        PointCloud net = moran_points(spec, depth);
        double slab = 1.0 / n;
        // Offset pushing the zero corner to a positive deeper corner.
        Fixed96 bump = depth < levels
                           ? Fixed96::from_double(spec.rho[static_cast<std::size_t>(depth) - 1] -
                                                  spec.rho[static_cast<std::size_t>(depth)])
                           : Fixed96::from_double(spec.rho[static_cast<std::size_t>(depth) - 1] * 0.5);
        for (std::size_t i = 0; i < net.size(); ++i) {
            std::vector<Fixed96> p(static_cast<std::size_t>(dim));
            bool zero = false, inside = true;
            for (int a = 0; a < dim; ++a) {
                p[static_cast<std::size_t>(a)] = net.at(i, a);
                if (p[static_cast<std::size_t>(a)].m == 0) zero = true;
                if (p[static_cast<std::size_t>(a)].to_double() >= slab) inside = false;
            }
            if (!inside) continue;
            if (zero)
                for (auto& c : p)
                    if (c.m == 0) c.m += bump.m;
            for (auto& c : p)
                if (c.to_double() >= slab) inside = false;
            if (!inside) continue;
            reps.push_back(std::move(p));
            ++total;
        }
        if (total > budget.max_points) break;
    }
    if (reps.empty()) throw std::runtime_error("precision exceeded");

    std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].m != b[i].m) return a[i].m < b[i].m;
        }
        return false;
    });
    reps.erase(std::unique(reps.begin(), reps.end(),
                           [](const auto& a, const auto& b) {
                               for (std::size_t i = 0; i < a.size(); ++i)
                                   if (a[i].m != b[i].m) return false;
                               return true;
                           }),
               reps.end());

    PointCloud cloud(dim);
    for (const auto& p : reps) cloud.push_fixed(p);
    return cloud;
}

double prescribed_common_ratio(int dim, int n, double h, double point_mass) {
    if (point_mass >= 1.0) throw std::invalid_argument("point mass must be below 1");
    double blocks = std::pow(2.0, dim * n) - 1.0;
    return std::pow((1.0 - point_mass) / blocks, 1.0 / h);
}

PrescribedSystem ifs_with_prescribed(const ScalingFunction& g, double h, int dim,
                                     const DiscreteSetBudget& budget) {
    if (!(h > 0 && h < dim)) throw std::invalid_argument("dimension out of range");
    PrescribedSystem out;
    out.h = h;

    int n = 1;
    while (std::log(std::pow(2.0, dim * n) - 1.0) / (n * kLog2) <= h) {
        ++n;
        if (n > 30) throw std::runtime_error("dimension out of range");
    }
    out.block_exponent = n;
    const double cell = std::pow(2.0, -n);

    PointCloud f0 = discrete_set_from_class(g, dim, budget);
    // F1: points strictly inside (0, 2^-n)^d, largest first.
    std::vector<std::vector<double>> f1;
    for (std::size_t i = 0; i < f0.size(); ++i) {
        std::vector<double> p(static_cast<std::size_t>(dim));
        bool inside = true;
        for (int a = 0; a < dim; ++a) {
            p[static_cast<std::size_t>(a)] = f0.at(i, a).to_double();
            if (!(p[static_cast<std::size_t>(a)] > 0 && p[static_cast<std::size_t>(a)] < cell))
                inside = false;
        }
        if (inside) f1.push_back(std::move(p));
    }
    if (f1.empty()) throw std::runtime_error("packing failure");
    auto norm_inf = [&](const std::vector<double>& p) {
        double m = 0;
        for (double c : p) m = std::max(m, c);
        return m;
    };
    std::sort(f1.begin(), f1.end(), [&](const auto& a, const auto& b) {
        double na = norm_inf(a), nb = norm_inf(b);
        if (na != nb) return na > nb;
        return a > b;
    });

    // Distance to nearest neighbour or to the boundary of (0, cell)^d;
    // sorted-neighbour pass for d = 1, quadratic scan otherwise.
    std::vector<double> gaps(f1.size(), std::numeric_limits<double>::infinity());
    if (dim == 1) {
        for (std::size_t i = 0; i < f1.size(); ++i) {
            gaps[i] = std::min(f1[i][0], cell - f1[i][0]);
            if (i > 0) gaps[i] = std::min(gaps[i], f1[i - 1][0] - f1[i][0]);
            if (i + 1 < f1.size()) gaps[i] = std::min(gaps[i], f1[i][0] - f1[i + 1][0]);
        }
    } else {
        if (f1.size() > 4000) f1.resize(4000);
        gaps.assign(f1.size(), std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < f1.size(); ++i) {
            for (int a = 0; a < dim; ++a) {
                gaps[i] = std::min(gaps[i], f1[i][static_cast<std::size_t>(a)]);
                gaps[i] = std::min(gaps[i], cell - f1[i][static_cast<std::size_t>(a)]);
            }
            for (std::size_t j = 0; j < f1.size(); ++j) {
                if (j == i) continue;
                double dist = 0;
                for (int a = 0; a < dim; ++a)
                    dist = std::max(dist, std::fabs(f1[i][static_cast<std::size_t>(a)] -
                                                    f1[j][static_cast<std::size_t>(a)]));
                gaps[i] = std::min(gaps[i], dist);
            }
        }
    }

    std::vector<double> ratios(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
        double by_index = i < 900 ? std::pow(2.0, -static_cast<double>(i + 1)) : 0.0;
        double floor_ratio = 1e-220;  // keeps deep fixed points as valid generators
        ratios[i] = std::max(std::min({gaps[i] / 4.0, cell / 4.0, std::max(by_index, floor_ratio)}),
                             floor_ratio * 1e-40);
        if (!(ratios[i] > 0)) throw std::runtime_error("packing failure");
    }

    // Halve the per-point ratios until their pressure mass at h is small, so
    // the common-ratio block carries most of the dimension at finite scale.
    const double mass_target = 0.25;
    int halvings = 0;
    auto mass = [&]() {
        double m = 0;
        for (double c : ratios) m += std::pow(c, h);
        // certified bound for the (hypothetical) dropped tail of the schedule
        m += std::pow(2.0, -static_cast<double>(f1.size() + 1) * h) /
             (1.0 - std::pow(2.0, -h));
        return m;
    };
    while (mass() >= mass_target && halvings < 400) {
        for (double& c : ratios) c *= 0.5;
        ++halvings;
    }
    out.point_mass = mass();
    out.common_ratio = prescribed_common_ratio(dim, n, h, out.point_mass);

    std::vector<Similarity> gens;
    gens.reserve(f1.size() + (std::size_t{1} << (dim * n)));
    for (std::size_t i = 0; i < f1.size(); ++i) {
        Similarity s;
        s.ratio = ratios[i];
        s.translation.resize(static_cast<std::size_t>(dim));
        for (int a = 0; a < dim; ++a)
            s.translation[static_cast<std::size_t>(a)] =
                f1[i][static_cast<std::size_t>(a)] * (1.0 - ratios[i]);
        gens.push_back(std::move(s));
    }
    // Block maps on the lexicographically first grid cells, corner cell excluded.
    long long cells = 1LL << (dim * n);
    for (long long idx = 1; idx < cells; ++idx) {
        Similarity s;
        s.ratio = out.common_ratio;
        s.translation.resize(static_cast<std::size_t>(dim));
        long long rest = idx;
        for (int a = dim - 1; a >= 0; --a) {
            s.translation[static_cast<std::size_t>(a)] =
                static_cast<double>(rest % (1LL << n)) * cell;
            rest /= (1LL << n);
        }
        gens.push_back(std::move(s));
    }

    out.system = make_similarity_system(dim, std::move(gens));
    out.system.tail.kind = TailSpec::Kind::kGeometricRatios;
    out.system.tail.first_index = f1.size() + 1;
    out.fixed_cloud = fixed_points(out.system);
    out.provenance = {{"block_exponent", n},
                      {"common_ratio", out.common_ratio},
                      {"point_mass", out.point_mass},
                      {"point_maps", f1.size()},
                      {"halvings", halvings},
                      {"h", h}};
    return out;
}

SharpnessSystem sharpness_system(const SharpnessParams& params) {
    const double h = params.h, s = params.s, t = params.t, beta = params.beta;
    const double d = static_cast<double>(params.dim);
    if (!(h > 0 && h < d)) throw std::invalid_argument("dimension out of range");
    if (!(0 <= s && s <= t && t <= d)) throw std::invalid_argument("inconsistent dimension parameters");
    DimInterval window = dim_interval(h, s, t, d);
    if (beta < window.lo - 1e-12 || beta > window.hi + 1e-12)
        throw std::invalid_argument("unreachable target");

    SharpnessSystem out;
    out.params = params;

    if (window.degenerate || !(s > 0) || !(t > h)) {
        // Degenerate window: any class with liminf s and limsup t realizes beta.
        std::vector<ConcatPiece> pieces;
        if (std::fabs(t - s) < 1e-15) {
            pieces.push_back(ConcatPiece{SegmentKind::kConstant, s, 0, 1.0});
        } else {
            double up = std::log((d - s) / (d - t));
            double down = std::log(t / std::max(s, 1e-12));
            for (int k = 0; k < params.stages; ++k) {
                pieces.push_back(ConcatPiece{SegmentKind::kToward, k == 0 ? s : s, d, up});
                pieces.push_back(ConcatPiece{SegmentKind::kToward, t, 0, down});
            }
            pieces.push_back(ConcatPiece{SegmentKind::kConstant, s, 0, 1.0});
        }
        out.f = concatenate(pieces);
        out.predicted_envelope = minimal_envelope(out.f, h);
        out.envelope_knot_values.assign(static_cast<std::size_t>(params.stages), window.lo);
        out.provenance = {{"degenerate", true}, {"beta", window.lo}};
        return out;
    }

    // Shrink delta until every built stage satisfies the smallness conditions
    // and has a usable contact length.
    double delta = params.delta;
    auto stage_at = [&](int n, double dlt, SharpnessStage* st) -> bool {
        double beta_n = std::max(beta, h + dlt / n);
        double t_n = std::min(t, d - dlt / n);
        double t_next = std::min(t, d - dlt / (n + 1));
        if (!(h < beta_n && beta_n < t_n && t_n < d)) return false;
        if (beta_n > window.hi + 1e-12) return false;
        double a1 = std::log(t_n / s);
        double a3 = std::log((d - s) / (d - t_next));
        double a3c = std::log((d - s) / (d - beta_n));
        if (a3c > a3 + 1e-12) return false;
        double span = std::log((t_n - h) / (beta_n - h));
        double a2_raw = span - a1 - a3c;
        if (a2_raw < -1e-9) return false;
        st->t_n = t_n;
        st->beta_n = beta_n;
        st->a1 = a1;
        st->a2_raw = a2_raw;
        st->a2 = std::max(a2_raw, 0.0);
        st->a3 = a3;
        st->a3_contact = a3c;
        st->b1 = st->a1 + st->a2 + st->a3_contact;
        st->b2 = st->a3 - st->a3_contact;
        return true;
    };
    bool ok = false;
    for (int tries = 0; tries < 60 && !ok; ++tries) {
        ok = true;
        for (int n = 1; n <= params.stages && ok; ++n) {
            SharpnessStage st;
            ok = stage_at(n, delta, &st);
        }
        if (!ok) delta *= 0.5;
        if (delta < 1e-12) throw std::runtime_error("stage constraints violated");
    }
    out.params.delta = delta;

    std::vector<ConcatPiece> f_pieces, g_pieces;
    for (int n = 1; n <= params.stages; ++n) {
        SharpnessStage st;
        if (!stage_at(n, delta, &st)) throw std::runtime_error("stage constraints violated");
        out.stage_constants.push_back(st);
        f_pieces.push_back(ConcatPiece{SegmentKind::kToward, st.t_n, 0.0, st.a1});
        if (st.a2 > 0) f_pieces.push_back(ConcatPiece{SegmentKind::kConstant, s, 0.0, st.a2});
        f_pieces.push_back(ConcatPiece{SegmentKind::kToward, s, d, st.a3});
        g_pieces.push_back(ConcatPiece{SegmentKind::kToward, st.t_n, h, st.b1});
        g_pieces.push_back(ConcatPiece{SegmentKind::kToward, st.beta_n, d, st.b2});
        out.envelope_knot_values.push_back(st.beta_n);
    }
    out.f = concatenate(f_pieces);
    out.predicted_envelope = concatenate(g_pieces);

    nlohmann::json stages_json = nlohmann::json::array();
    for (const auto& st : out.stage_constants)
        stages_json.push_back({{"t_n", st.t_n},
                               {"beta_n", st.beta_n},
                               {"a1", st.a1},
                               {"a2", st.a2},
                               {"a2_raw", st.a2_raw},
                               {"a3", st.a3},
                               {"a3_contact", st.a3_contact},
                               {"b1", st.b1},
                               {"b2", st.b2}});
    out.provenance = {{"delta", delta}, {"stages", stages_json}};
    return out;
}

Cifs gauss_cifs(const std::vector<std::uint64_t>& digits) {
    if (digits.empty()) throw std::invalid_argument("improper digit set");
    return make_gauss_system(digits);
}

Cifs gauss_cifs(const DigitSet& digits) {
    DigitBandSpec spec;
    spec.bands = digits.bands;
    spec.min_digit = digits.cut;
    TailSpec tail;
    tail.kind = TailSpec::Kind::kSquareBandStages;
    tail.next_stage = digits.explicit_stages + 1;
    tail.a_prev = digits.a_seq.back();
    return make_gauss_band_system(spec, tail);
}

DigitSet nonexistence_digit_set(int n_max, double containment) {
    if (n_max < 2) throw std::invalid_argument("need at least two stages");
    if (n_max > 3) throw std::invalid_argument("stage budget: bands beyond a_3 overflow 64-bit digits");
    if (!(containment > 0 && containment <= 1)) throw std::invalid_argument("containment out of range");

    DigitSet out;
    out.explicit_stages = n_max;
    std::uint64_t a = 2;
    out.a_seq.push_back(2.0L);
    out.bands.emplace_back(a, 2 * a);
    for (int k = 1; k <= n_max; ++k) {
        std::uint64_t base = 2 * a;
        std::uint64_t next = 1;
        for (int i = 0; i < k; ++i) next *= base;
        a = next;
        out.a_seq.push_back(static_cast<long double>(a));
        out.bands.emplace_back(a, 2 * a);
    }

    // Smallest stage-boundary cut whose certified pressure bound puts the
    // Hausdorff dimension below 1/3 (and honours the containment bound).
    const double t_cert = 1.0 / 3.0 - 1e-3;
    double bound_val = 0;
    bool found = false;
    for (int j = 0; j <= n_max && !found; ++j) {
        long double a_j = out.a_seq[static_cast<std::size_t>(j)];
        std::uint64_t cut = static_cast<std::uint64_t>(a_j) * static_cast<std::uint64_t>(a_j);
        if (1.0 / static_cast<double>(cut) > containment) continue;
        DigitSet cand = out;
        cand.cut = cut;
        Cifs sys = gauss_cifs(cand);
        Bracket p = pressure(sys, t_cert, 1, UINT64_MAX);
        if (p.hi < 0) {
            out.cut = cut;
            bound_val = p.hi;
            found = true;
        }
    }
    if (!found) throw std::runtime_error("cut undecided");

    nlohmann::json aseq = nlohmann::json::array();
    for (long double v : out.a_seq) aseq.push_back(static_cast<double>(v));
    out.provenance = {{"a_seq", aseq},
                      {"cut", out.cut},
                      {"certified_t", t_cert},
                      {"certified_upper_pressure", bound_val},
                      {"containment", containment}};
    return out;
}

}  // namespace boxlab
