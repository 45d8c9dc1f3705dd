#include "boxlab/ifs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace boxlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Moebius word state S(x) = (pp x + p)/(qp x + q), entries rescaled so the
// true matrix is the stored one times e^ls.  Continued-fraction words have
// determinant +-1, so log|S'(x)| = -2 (log(qp x + q) + ls).
struct Mobius {
    double pp = 1, p = 0, qp = 0, q = 1;
    double ls = 0;

    void compose(const GaussBranch& b) {
        double d = static_cast<double>(b.digit);
        double npp, np, nqp, nq;
        if (!b.composed_with_one) {
            // [[0,1],[1,d]]
            npp = p;
            np = pp + p * d;
            nqp = q;
            nq = qp + q * d;
        } else {
            // [[1,1],[d,d+1]]
            npp = pp + p * d;
            np = npp + p;
            nqp = qp + q * d;
            nq = nqp + q;
        }
        pp = npp; p = np; qp = nqp; q = nq;
        if (q > 1e120) {
            pp *= 1e-120; p *= 1e-120; qp *= 1e-120; q *= 1e-120;
            ls += 120.0 * std::log(10.0);
        }
    }

    double log_rho_hi() const { return -2.0 * (std::log(q) + ls); }        // sup at x = 0
    double log_rho_lo() const { return -2.0 * (std::log(q + qp) + ls); }   // inf at x = 1

    // Fixed point of S in [0,1]: qp x^2 + (q - pp) x - p = 0.
    double fixed_point() const {
        if (qp == 0) return p / (q - pp);
        double b = q - pp;
        return 2.0 * p / (b + std::sqrt(b * b + 4.0 * qp * p));
    }

};

double mobius_log_deriv(const Mobius& m, double x) {
    return -2.0 * (std::log(m.qp * x + m.q) + m.ls);
}

double mobius_eval(const Mobius& m, double x) {
    return (m.pp * x + m.p) / (m.qp * x + m.q);
}

std::size_t retained_count(const Cifs& s) {
    return std::min<std::uint64_t>(s.trunc.max_index, s.generator_count());
}

double gen_log_rho_hi(const Cifs& s, std::size_t i) {
    if (s.kind == SystemKind::kSimilarity) return std::log(s.sims[i].ratio);
    Mobius m;
    m.compose(s.branches[i]);
    return m.log_rho_hi();
}

// Upper bound on sum over dropped square-band stage digits of rho_hi^t
// = b^{-4t} over b in [a_n, 2a_n], stages n >= next_stage.  Diverges for
// 4t <= 1.
double square_band_tail(const TailSpec& tail, double t) {
    double q = 4.0 * t;
    if (q <= 1.0 + 1e-12) return kInf;
    long double acc = 0;
    long double a_prev = tail.a_prev;
    for (int n = tail.next_stage; n < tail.next_stage + 64; ++n) {
        long double log_a = static_cast<long double>(n) * std::log(2.0L * a_prev);
        if (log_a * (q - 1.0) > 800.0L) break;  // remaining stages are below 1e-300
        long double a = std::exp(log_a);
        // sum_{b=a}^{2a} b^-q <= a^-q + (a^{1-q} - (2a)^{1-q})/(q-1)
        long double term = std::pow(a, -static_cast<long double>(q)) +
                           (std::pow(a, 1.0L - q) - std::pow(2.0L * a, 1.0L - q)) / (q - 1.0L);
        acc += term;
        a_prev = a;
    }
    return static_cast<double>(acc);
}

// Sum of rho_hi^t over generators dropped by truncation plus the analytic
// tail; infinite when not certifiable.
double tail_mass(const Cifs& s, double t) {
    double mass = 0;
    std::size_t r = retained_count(s);
    for (std::size_t i = r; i < s.generator_count(); ++i)
        mass += std::exp(t * gen_log_rho_hi(s, i));
    switch (s.tail.kind) {
        case TailSpec::Kind::kNone:
            break;
        case TailSpec::Kind::kGeometricRatios: {
            // dropped ratios c_k <= 2^-k for k >= first_index
            double base = std::exp2(-t);
            if (base >= 1.0) return kInf;
            mass += std::pow(2.0, -t * static_cast<double>(s.tail.first_index)) / (1.0 - base);
            break;
        }
        case TailSpec::Kind::kSquareBandStages:
            mass += square_band_tail(s.tail, t);
            break;
    }
    return mass;
}

struct PressureSums {
    double z_lo = 0;
    double z_hi = 0;
    double z_per = 0;   // fixed-point derivative sums
    double tail1 = 0;   // dropped level-1 mass (upper bound)
    double z1_hi_full = 0;
    int level = 1;
};

PressureSums gauss_level_sums(const Cifs& s, double t, int level, std::uint64_t max_index) {
    PressureSums out;
    out.level = level;
    std::size_t r = std::min<std::uint64_t>(max_index, s.branches.size());
    if (r == 0) throw std::invalid_argument("degenerate truncation");

    struct Frame { Mobius m; std::size_t next = 0; };
    std::vector<Frame> stack(static_cast<std::size_t>(level) + 1);
    int depth = 0;
    stack[0] = Frame{Mobius{}, 0};
    while (depth >= 0) {
        Frame& f = stack[static_cast<std::size_t>(depth)];
        if (depth == level) {
            out.z_lo += std::exp(t * f.m.log_rho_lo());
            out.z_hi += std::exp(t * f.m.log_rho_hi());
            out.z_per += std::exp(t * mobius_log_deriv(f.m, f.m.fixed_point()));
            --depth;
            continue;
        }
        if (f.next == r) {
            --depth;
            continue;
        }
        Frame& child = stack[static_cast<std::size_t>(depth) + 1];
        child.m = f.m;
        child.m.compose(s.branches[f.next]);
        child.next = 0;
        ++f.next;
        ++depth;
    }

    out.tail1 = tail_mass(s, t);
    double z1 = 0;
    for (std::size_t i = 0; i < r; ++i) z1 += std::exp(t * gen_log_rho_hi(s, i));
    out.z1_hi_full = z1 + out.tail1;
    return out;
}

Bracket pressure_bracket(const Cifs& s, double t, int level, std::uint64_t max_index) {
    if (!(t > 0)) throw std::invalid_argument("pressure exponent must be positive");
    if (level < 1) throw std::invalid_argument("level must be positive");
    if (s.kind == SystemKind::kSimilarity) {
        std::size_t r = retained_count(s);
        double z = 0;
        for (std::size_t i = 0; i < r; ++i) z += std::pow(s.sims[i].ratio, t);
        double tail = tail_mass(s, t);
        if (std::isinf(tail)) throw std::runtime_error("pressure infinite at t");
        return Bracket{std::log(z), std::log(z + tail)};
    }
    PressureSums sums = gauss_level_sums(s, t, level, max_index);
    if (std::isinf(sums.tail1)) throw std::runtime_error("pressure infinite at t");
    double level_tail =
        sums.tail1 > 0
            ? static_cast<double>(level) * sums.tail1 *
                  std::pow(std::max(sums.z1_hi_full, 1.0), static_cast<double>(level - 1))
            : 0.0;
    double inv_n = 1.0 / static_cast<double>(level);
    return Bracket{inv_n * std::log(sums.z_lo), inv_n * std::log(sums.z_hi + level_tail)};
}

}  // namespace

void Cifs::finalize() {
    if (dim < 1) throw std::invalid_argument("dim must be positive");
    if (kind == SystemKind::kSimilarity) {
        if (sims.empty()) throw std::invalid_argument("empty generator list");
        double xi = 0;
        for (const auto& g : sims) {
            if (!(g.ratio > 0 && g.ratio < 1))
                throw std::invalid_argument("similarity ratio outside (0,1)");
            if (static_cast<int>(g.translation.size()) != dim)
                throw std::invalid_argument("translation dimension mismatch");
            xi = std::max(xi, g.ratio);
        }
        ratio_bound = xi;
        distortion = 1.0;
    } else {
        if (branches.empty()) throw std::invalid_argument("improper digit set");
        if (dim != 1) throw std::invalid_argument("gauss systems are one-dimensional");
        double xi = 0;
        for (std::size_t i = 0; i < branches.size(); ++i) {
            if (branches[i].digit == 0) throw std::invalid_argument("digit must be positive");
            xi = std::max(xi, std::exp(gen_log_rho_hi(*this, i)));
        }
        ratio_bound = xi;
        distortion = 4.0;
        if (!(ratio_bound < 1)) throw std::invalid_argument("improper digit set");
    }
}

Cifs make_similarity_system(int dim, std::vector<Similarity> gens) {
    Cifs s;
    s.kind = SystemKind::kSimilarity;
    s.dim = dim;
    s.sims = std::move(gens);
    s.finalize();
    return s;
}

Cifs make_gauss_system(const std::vector<std::uint64_t>& digits) {
    if (digits.empty()) throw std::invalid_argument("improper digit set");
    std::vector<std::uint64_t> sorted = digits;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    Cifs s;
    s.kind = SystemKind::kGauss;
    s.dim = 1;
    bool has_one = sorted.front() == 1;
    for (std::uint64_t b : sorted) {
        if (b != 1) s.branches.push_back(GaussBranch{b, false});
    }
    if (has_one) {
        for (std::uint64_t b : sorted) s.branches.push_back(GaussBranch{b, true});
    }
    s.digit_list = sorted;
    s.finalize();
    return s;
}

Cifs make_gauss_band_system(const DigitBandSpec& spec, const TailSpec& tail) {
    Cifs s;
    s.kind = SystemKind::kGauss;
    s.dim = 1;
    for (const auto& [lo, hi] : spec.bands) {
        for (std::uint64_t b = lo; b <= hi; ++b) {
            std::uint64_t digit = b * b;
            if (digit >= spec.min_digit) s.branches.push_back(GaussBranch{digit, false});
        }
    }
    std::sort(s.branches.begin(), s.branches.end(),
              [](const GaussBranch& a, const GaussBranch& b) { return a.digit < b.digit; });
    s.branches.erase(std::unique(s.branches.begin(), s.branches.end(),
                                 [](const GaussBranch& a, const GaussBranch& b) {
                                     return a.digit == b.digit;
                                 }),
                     s.branches.end());
    s.band_spec = spec;
    s.tail = tail;
    s.finalize();
    return s;
}

RhoInterval contraction_norm(const Cifs& system, const Word& w) {
    for (std::uint32_t i : w.letters)
        if (i >= system.generator_count()) throw std::invalid_argument("invalid generator index");
    if (system.kind == SystemKind::kSimilarity) {
        double log_rho = 0;
        for (std::uint32_t i : w.letters) log_rho += std::log(system.sims[i].ratio);
        return RhoInterval{log_rho, log_rho};
    }
    Mobius m;
    for (std::uint32_t i : w.letters) m.compose(system.branches[i]);
    return RhoInterval{m.log_rho_lo(), m.log_rho_hi()};
}

Bracket pressure(const Cifs& system, double t, int level, std::uint64_t max_index) {
    return pressure_bracket(system, t, level, max_index);
}

double periodic_pressure(const Cifs& system, double t, int level, std::uint64_t max_index) {
    if (system.kind == SystemKind::kSimilarity) {
        std::size_t r = retained_count(system);
        double z = 0;
        for (std::size_t i = 0; i < r; ++i) z += std::pow(system.sims[i].ratio, t);
        return std::log(z);
    }
    PressureSums sums = gauss_level_sums(system, t, level, max_index);
    return std::log(sums.z_per) / static_cast<double>(level);
}

namespace {

// Bisection for the root of a decreasing function sign(t); sign(t) > 0 means
// the pressure at t is positive.
template <class SignFn>
double pressure_root(SignFn&& sign, double hi_seed, double tol) {
    double lo = 0.0;
    double hi = hi_seed;
    int guard = 0;
    while (sign(hi) > 0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 12) throw std::runtime_error("undecided at resolution");
    }
    if (sign(1e-12) <= 0) return 0.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (sign(mid) > 0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

DimBracket hausdorff_dim(const Cifs& system, double tol, int level) {
    if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");
    DimBracket out;
    if (system.kind == SystemKind::kSimilarity) {
        std::size_t r = retained_count(system);
        auto z_retained = [&](double t) {
            double z = 0;
            for (std::size_t i = 0; i < r; ++i) z += std::pow(system.sims[i].ratio, t);
            return z;
        };
        auto z_full = [&](double t) {
            double tail = tail_mass(system, t);
            return std::isinf(tail) ? kInf : z_retained(t) + tail;
        };
        double bisect_tol = std::min(tol * 0.5, 1e-9);
        double root_lo = pressure_root([&](double t) { return z_retained(t) - 1.0; },
                                       static_cast<double>(system.dim), bisect_tol);
        double root_hi = pressure_root([&](double t) { return z_full(t) - 1.0; },
                                       static_cast<double>(system.dim), bisect_tol);
        out.env_lo = root_lo - bisect_tol;
        out.env_hi = root_hi + bisect_tol;
        out.lo = std::max(0.0, out.env_lo);
        out.hi = out.env_hi;
        out.certified = true;
        return out;
    }

    // Conformal path: rigorous envelope from the interval brackets, primary
    // estimate from the fixed-point derivative pressure at the same level.
    auto sums_at = [&](double t) { return gauss_level_sums(system, t, level, system.trunc.max_index); };
    auto sign_lo = [&](double t) {
        try {
            return std::log(sums_at(t).z_lo) > 0 ? 1 : -1;
        } catch (const std::exception&) {
            return 1;  // divergent tail: pressure certainly positive
        }
    };
    auto sign_hi = [&](double t) {
        PressureSums ps = sums_at(t);
        if (std::isinf(ps.tail1)) return 1;
        double level_tail = ps.tail1 > 0
                                ? static_cast<double>(level) * ps.tail1 *
                                      std::pow(std::max(ps.z1_hi_full, 1.0),
                                               static_cast<double>(level - 1))
                                : 0.0;
        return std::log(ps.z_hi + level_tail) > 0 ? 1 : -1;
    };
    auto sign_per = [&](double t) { return std::log(sums_at(t).z_per) > 0 ? 1 : -1; };

    double bisect_tol = std::clamp(tol * 0.5, 1e-9, 1e-3);
    out.env_lo = pressure_root(sign_lo, 1.0, bisect_tol) - bisect_tol;
    out.env_hi = pressure_root(sign_hi, 1.0, bisect_tol) + bisect_tol;
    double per_root = pressure_root(sign_per, 1.0, bisect_tol);
    out.lo = std::max(out.env_lo, per_root - 0.5 * tol);
    out.hi = std::min(out.env_hi, per_root + 0.5 * tol);
    out.certified = (out.env_hi - out.env_lo) <= tol;
    return out;
}

PointCloud fixed_points(const Cifs& system, std::uint64_t max_count) {
    std::size_t r = std::min<std::uint64_t>(retained_count(system), max_count);
    PointCloud cloud(system.dim);
    if (system.kind == SystemKind::kSimilarity) {
        std::vector<Fixed96> pt(system.dim);
        for (std::size_t i = 0; i < r; ++i) {
            const Similarity& g = system.sims[i];
            for (int a = 0; a < system.dim; ++a)
                pt[static_cast<std::size_t>(a)] =
                    Fixed96::from_double(g.translation[static_cast<std::size_t>(a)] / (1.0 - g.ratio));
            cloud.push_fixed(pt);
        }
        return cloud;
    }
    for (std::size_t i = 0; i < r; ++i) {
        const GaussBranch& b = system.branches[i];
        if (!b.composed_with_one) {
            cloud.push_fixed1(Fixed96::gauss_fixed_point(b.digit));
        } else {
            double d = static_cast<double>(b.digit);
            double x = 2.0 / (d + std::sqrt(d * d + 4.0 * d));  // b x^2 + b x - 1 = 0
            cloud.push_fixed1(Fixed96::from_double(x));
        }
    }
    return cloud;
}

PointCloud orbit_set(const Cifs& system, const std::vector<double>& x0, int m,
                     std::uint64_t point_budget) {
    if (m < 0) throw std::invalid_argument("level must be non-negative");
    if (static_cast<int>(x0.size()) != system.dim)
        throw std::invalid_argument("point dimension mismatch");
    std::size_t r = retained_count(system);
    if (r < 2 && system.generator_count() >= 2)
        throw std::invalid_argument("degenerate truncation");
    double count = 1;
    for (int k = 0; k < m; ++k) {
        count *= static_cast<double>(r);
        if (count > static_cast<double>(point_budget))
            throw std::runtime_error("budget exceeded");
    }

    PointCloud cloud(system.dim);
    if (system.kind == SystemKind::kSimilarity) {
        std::vector<std::vector<double>> pts{x0};
        for (int k = 0; k < m; ++k) {
            std::vector<std::vector<double>> next;
            next.reserve(pts.size() * r);
            for (std::size_t i = 0; i < r; ++i) {
                const Similarity& g = system.sims[i];
                for (const auto& p : pts) {
                    std::vector<double> q(system.dim);
                    for (int a = 0; a < system.dim; ++a)
                        q[static_cast<std::size_t>(a)] =
                            g.ratio * p[static_cast<std::size_t>(a)] +
                            g.translation[static_cast<std::size_t>(a)];
                    next.push_back(std::move(q));
                }
            }
            pts = std::move(next);
        }
        for (const auto& p : pts) cloud.push(p);
        return cloud;
    }

    // Gauss: exact rationals while they fit, starting from x0 = num/den.
    struct Pt { bool exact; std::uint64_t num, den; double val; };
    Pt start;
    double x = x0[0];
    if (x == 0.0) start = Pt{true, 0, 1, 0.0};
    else if (x == 1.0) start = Pt{true, 1, 1, 1.0};
    else start = Pt{false, 0, 0, x};
    std::vector<Pt> pts{start};
    for (int k = 0; k < m; ++k) {
        std::vector<Pt> next;
        next.reserve(pts.size() * r);
        for (std::size_t i = 0; i < r; ++i) {
            const GaussBranch& b = system.branches[i];
            for (const Pt& p : pts) {
                Pt q{false, 0, 0, 0.0};
                if (p.exact) {
                    // S_b: p/q -> q/(b q + p); S_{1b}: p/q -> (p+q)/(b p + (b+1) q)
                    u128 num, den;
                    if (!b.composed_with_one) {
                        num = p.den;
                        den = static_cast<u128>(b.digit) * p.den + p.num;
                    } else {
                        num = static_cast<u128>(p.num) + p.den;
                        den = static_cast<u128>(b.digit) * p.num +
                              (static_cast<u128>(b.digit) + 1) * p.den;
                    }
                    if (den <= UINT64_MAX && num <= UINT64_MAX) {
                        q = Pt{true, static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den), 0.0};
                        q.val = static_cast<double>(q.num) / static_cast<double>(q.den);
                    } else {
                        q.exact = false;
                        q.val = static_cast<double>(num) / static_cast<double>(den);
                    }
                } else {
                    Mobius mm;
                    mm.compose(b);
                    q.val = mobius_eval(mm, p.val);
                }
                next.push_back(q);
            }
        }
        pts = std::move(next);
    }
    for (const Pt& p : pts) {
        if (p.exact) cloud.push_fixed1(Fixed96::from_rational(p.num, p.den));
        else cloud.push_fixed1(Fixed96::from_double(p.val));
    }
    return cloud;
}

PointCloud orbit_set(const Cifs& system, double x0, int m, std::uint64_t point_budget) {
    return orbit_set(system, std::vector<double>(static_cast<std::size_t>(system.dim), x0), m,
                     point_budget);
}

SymbolicCover stopping_words(const Cifs& system, double r, std::uint64_t word_budget) {
    if (!(r > 0 && r < 1)) throw std::invalid_argument("scale out of range");
    std::size_t gens = retained_count(system);
    if (gens == 0) throw std::invalid_argument("degenerate truncation");
    const double log_r = std::log(r);

    SymbolicCover cover;
    cover.r = r;
    bool finite_complete = (system.tail.kind == TailSpec::Kind::kNone) &&
                           gens == system.generator_count();
    double band_hi_log = kInf;
    if (finite_complete) {
        double log_rho_min = 0;
        for (std::size_t i = 0; i < gens; ++i)
            log_rho_min = std::min(log_rho_min, gen_log_rho_hi(system, i));
        band_hi_log = log_r + std::log(system.distortion) - log_rho_min;
    }

    std::uint64_t visited = 0;
    // Depth-first over words with rho(parent) > r.
    std::vector<std::size_t> path;
    std::vector<Mobius> mstack{Mobius{}};
    std::vector<double> rstack{0.0};
    std::vector<std::size_t> next{0};

    while (!next.empty()) {
        if (next.back() == gens) {
            next.pop_back();
            mstack.pop_back();
            rstack.pop_back();
            if (!path.empty()) path.pop_back();
            continue;
        }
        std::size_t i = next.back()++;
        if (++visited > word_budget) {
            cover.complete = false;
            break;
        }
        Mobius child_m = mstack.back();
        double child_r = rstack.back();
        if (system.kind == SystemKind::kGauss) child_m.compose(system.branches[i]);
        else child_r += std::log(system.sims[i].ratio);
        double log_rho = system.kind == SystemKind::kGauss ? child_m.log_rho_hi() : child_r;

        Word w;
        w.letters.reserve(path.size() + 1);
        for (std::size_t l : path) w.letters.push_back(static_cast<std::uint32_t>(l));
        w.letters.push_back(static_cast<std::uint32_t>(i));

        RhoInterval rho{system.kind == SystemKind::kGauss ? child_m.log_rho_lo() : child_r, log_rho};
        if (log_rho > log_r && log_rho <= band_hi_log)
            cover.band.push_back(CoverWord{w, rho, 1.0 - log_rho / log_r});

        if (log_rho <= log_r) {
            cover.stopped.push_back(CoverWord{w, rho, 0.0});
            continue;
        }
        if (static_cast<int>(w.letters.size()) >= system.trunc.max_level) {
            cover.complete = false;  // level cap hit before the stopping scale
            cover.stopped.push_back(CoverWord{w, rho, 0.0});
            continue;
        }
        path.push_back(i);
        mstack.push_back(child_m);
        rstack.push_back(child_r);
        next.push_back(0);
    }

    if (!finite_complete) {
        PointCloud f = fixed_points(system);
        cover.residual_count = count_boxes(f, Fixed96::from_double(r));
    }
    return cover;
}

TauEstimate symbolic_covering_estimate(const Cifs& system, double r, int m,
                                       const PointCloud& fm_cloud, std::uint64_t word_budget) {
    if (!(r > 0 && r < 1)) throw std::invalid_argument("scale out of range");
    if (m < 1) throw std::invalid_argument("level infeasible");
    std::size_t gens = retained_count(system);
    if (gens == 0) throw std::invalid_argument("degenerate truncation");
    double block_count = std::pow(static_cast<double>(gens), m);
    if (block_count > 4e6) throw std::invalid_argument("level infeasible");
    if (fm_cloud.empty()) throw std::invalid_argument("empty input");

    const double log_r = std::log(r);
    TauEstimate est;
    std::uint64_t visited = 0;

    // Enumerate blocks of m letters as single super-letters.
    struct Block { Mobius m; double log_rho; };
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(block_count));
    {
        std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
        while (true) {
            Block b;
            b.log_rho = 0;
            if (system.kind == SystemKind::kGauss) {
                for (std::size_t k = 0; k < idx.size(); ++k) b.m.compose(system.branches[idx[k]]);
                b.log_rho = b.m.log_rho_hi();
            } else {
                for (std::size_t k = 0; k < idx.size(); ++k)
                    b.log_rho += std::log(system.sims[idx[k]].ratio);
            }
            blocks.push_back(b);
            int pos = m - 1;
            while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == gens) {
                idx[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    // Largest contraction first, so the child scan can stop at the first
    // block that falls below the stopping scale.
    std::sort(blocks.begin(), blocks.end(),
              [](const Block& a, const Block& b) { return a.log_rho > b.log_rho; });

    // DFS over (I^m)* words with rho > r, accumulating N_{r/rho}(F_m); the
    // cloud is sorted once and each term is a linear counting pass.
    std::optional<SortedCounter> fast;
    if (fm_cloud.dim == 1) fast.emplace(fm_cloud);
    auto count_at = [&](double scale) {
        return fast ? fast->count(scale) : count_boxes(fm_cloud, scale);
    };
    std::vector<double> stack{0.0};
    std::vector<std::size_t> next{0};
    while (!next.empty()) {
        if (next.back() == 0) {
            // visit this node once, on first entry
            double log_rho = stack.back();
            double scale = std::exp(log_r - log_rho);
            if (scale >= 1.0) scale = std::nextafter(1.0, 0.0);
            est.tau += static_cast<double>(count_at(scale));
            ++est.terms;
        }
        if (next.back() == blocks.size()) {
            next.pop_back();
            stack.pop_back();
            continue;
        }
        std::size_t i = next.back()++;
        double child = stack.back() + blocks[i].log_rho;
        if (child <= log_r) {
            next.back() = blocks.size();  // blocks sorted: the rest stop as well
            continue;
        }
        if (++visited > word_budget) {
            est.complete = false;
            break;
        }
        stack.push_back(child);
        next.push_back(0);
    }

    est.residual = static_cast<double>(count_at(r));
    double xi_m = std::pow(system.ratio_bound, m);
    double k = std::ceil(std::log(r) / std::log(xi_m));
    est.slack_factor = std::pow(4.0, std::max(1.0, k));
    est.nr_bracket = Bracket{std::max(1.0, est.tau / est.slack_factor),
                             est.tau * est.slack_factor + est.residual};
    return est;
}

int bounded_neighbourhood_count(const Cifs& system, const std::vector<CoverWord>& family,
                                double r, const std::vector<double>& probes) {
    if (system.dim != 1)
        throw std::invalid_argument("neighbourhood diagnostic supports d = 1 only");
    // Mutual incomparability check.
    std::vector<const CoverWord*> sorted;
    sorted.reserve(family.size());
    for (const auto& w : family) sorted.push_back(&w);
    std::sort(sorted.begin(), sorted.end(), [](const CoverWord* a, const CoverWord* b) {
        return a->word.letters < b->word.letters;
    });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto& a = sorted[i]->word.letters;
        const auto& b = sorted[i + 1]->word.letters;
        if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin()))
            throw std::invalid_argument("invalid family");
    }

    // Image intervals [S_w(0), S_w(1)] (sorted endpoints).
    const double log_r = std::log(r);
    struct Interval { double lo, hi; };
    std::vector<Interval> imgs;
    imgs.reserve(family.size());
    for (const auto& cw : family) {
        if (cw.rho.log_hi <= log_r) continue;  // rho(w) <= r: not counted
        double a, b;
        if (system.kind == SystemKind::kGauss) {
            Mobius m;
            for (std::uint32_t l : cw.word.letters) m.compose(system.branches[l]);
            a = mobius_eval(m, 0.0);
            b = mobius_eval(m, 1.0);
        } else {
            a = 0.0;
            b = 1.0;
            for (auto it = cw.word.letters.rbegin(); it != cw.word.letters.rend(); ++it) {
                const Similarity& g = system.sims[*it];
                a = g.ratio * a + g.translation[0];
                b = g.ratio * b + g.translation[0];
            }
        }
        imgs.push_back(Interval{std::min(a, b), std::max(a, b)});
    }

    int worst = 0;
    for (double x : probes) {
        int count = 0;
        for (const Interval& iv : imgs)
            if (iv.lo < x + r && iv.hi > x - r) ++count;
        worst = std::max(worst, count);
    }
    return worst;
}

double discrete_approximation_check(const PointCloud& e1, const PointCloud& e2,
                                    const std::vector<double>& scales) {
    double worst = 0;
    for (double r : scales) {
        double n1 = static_cast<double>(count_boxes(e1, r));
        double n2 = static_cast<double>(count_boxes(e2, r));
        worst = std::max(worst, std::fabs(std::log(n1) - std::log(n2)));
    }
    return worst;
}

nlohmann::json Cifs::to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    j["truncation"] = {{"max_index", trunc.max_index}, {"max_level", trunc.max_level}};
    switch (tail.kind) {
        case TailSpec::Kind::kNone:
            j["tail"] = {{"kind", "none"}};
            break;
        case TailSpec::Kind::kGeometricRatios:
            j["tail"] = {{"kind", "geometric"}, {"first_index", tail.first_index}};
            break;
        case TailSpec::Kind::kSquareBandStages:
            j["tail"] = {{"kind", "square_band_stages"},
                         {"next_stage", tail.next_stage},
                         {"a_prev", static_cast<double>(tail.a_prev)}};
            break;
    }
    if (kind == SystemKind::kSimilarity) {
        j["kind"] = "similarity";
        j["generators"] = nlohmann::json::array();
        for (const auto& g : sims)
            j["generators"].push_back({{"ratio", g.ratio}, {"translation", g.translation}});
    } else {
        j["kind"] = "gauss";
        if (band_spec) {
            nlohmann::json bands = nlohmann::json::array();
            for (const auto& [lo, hi] : band_spec->bands) bands.push_back({lo, hi});
            j["digit_set"] = {{"squares_of_bands", bands}, {"min_digit", band_spec->min_digit}};
        } else if (digit_list) {
            j["digit_set"] = {{"list", *digit_list}};
        } else {
            nlohmann::json bl = nlohmann::json::array();
            for (const auto& b : branches)
                bl.push_back({{"digit", b.digit}, {"composed_with_one", b.composed_with_one}});
            j["branches"] = bl;
        }
    }
    return j;
}

Cifs Cifs::from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    Truncation tr;
    if (j.contains("truncation")) {
        tr.max_index = j["truncation"].value("max_index", tr.max_index);
        tr.max_level = j["truncation"].value("max_level", tr.max_level);
    }
    TailSpec tail;
    if (j.contains("tail")) {
        std::string tk = j["tail"].value("kind", "none");
        if (tk == "geometric") {
            tail.kind = TailSpec::Kind::kGeometricRatios;
            tail.first_index = j["tail"].at("first_index").get<std::uint64_t>();
        } else if (tk == "square_band_stages") {
            tail.kind = TailSpec::Kind::kSquareBandStages;
            tail.next_stage = j["tail"].at("next_stage").get<int>();
            tail.a_prev = j["tail"].at("a_prev").get<double>();
        }
    }
    Cifs s;
    if (kind == "similarity") {
        std::vector<Similarity> gens;
        for (const auto& g : j.at("generators"))
            gens.push_back(Similarity{g.at("ratio").get<double>(),
                                      g.at("translation").get<std::vector<double>>()});
        s = make_similarity_system(j.at("dim").get<int>(), std::move(gens));
    } else if (kind == "gauss") {
        if (j.contains("digit_set") && j["digit_set"].contains("squares_of_bands")) {
            DigitBandSpec spec;
            for (const auto& b : j["digit_set"]["squares_of_bands"])
                spec.bands.emplace_back(b.at(0).get<std::uint64_t>(), b.at(1).get<std::uint64_t>());
            spec.min_digit = j["digit_set"].value("min_digit", std::uint64_t{0});
            s = make_gauss_band_system(spec, tail);
        } else if (j.contains("digit_set")) {
            s = make_gauss_system(j["digit_set"].at("list").get<std::vector<std::uint64_t>>());
        } else {
            s.kind = SystemKind::kGauss;
            s.dim = 1;
            for (const auto& b : j.at("branches"))
                s.branches.push_back(GaussBranch{b.at("digit").get<std::uint64_t>(),
                                                 b.at("composed_with_one").get<bool>()});
            s.finalize();
        }
    } else {
        throw std::invalid_argument("unknown system kind: " + kind);
    }
    s.trunc = tr;
    s.tail = tail;
    return s;
}

}  // namespace boxlab
