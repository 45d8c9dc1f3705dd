#include "boxlab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

namespace boxlab {

namespace {

constexpr double kJoinTol = 1e-12;

bool nearly_equal(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

double ScalingFunction::eval(double x) const {
    if (segments.empty()) return left_extension;
    if (x < segments.front().x0) return left_extension;
    // Last segment whose x0 <= x.
    std::size_t lo = 0, hi = segments.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (segments[mid].x0 <= x) lo = mid; else hi = mid - 1;
    }
    return segments[lo].eval(x);
}

void ScalingFunction::validate(double dim_bound) const {
    if (segments.empty()) throw std::invalid_argument("scaling function has no segments");
    double prev_end_x = segments.front().x0;
    double prev_end_v = left_extension;
    for (const Segment& s : segments) {
        if (s.length < 0) throw std::invalid_argument("negative segment length");
        if (std::fabs(s.x0 - prev_end_x) > 1e-9)
            throw std::invalid_argument("segments are not contiguous");
        if (std::fabs(s.value - prev_end_v) > kJoinTol * std::max(1.0, std::fabs(prev_end_v)))
            throw std::invalid_argument("discontinuous at segment join");
        double lo = std::min(s.value, s.kind == SegmentKind::kToward ? s.target : s.value);
        double hi = std::max(s.value, s.kind == SegmentKind::kToward ? s.target : s.value);
        if (lo < -1e-9 || hi > dim_bound + 1e-9)
            throw std::invalid_argument("scaling function values outside [0, d]");
        prev_end_x = s.x0 + s.length;
        prev_end_v = s.end_value();
    }
}

ScalingFunction ScalingFunction::constant(double v) {
    ScalingFunction f;
    f.left_extension = v;
    f.segments.push_back(Segment{0.0, 0.0, SegmentKind::kConstant, v, 0.0});
    return f;
}

nlohmann::json ScalingFunction::to_json() const {
    nlohmann::json j;
    j["left_extension"] = left_extension;
    j["segments"] = nlohmann::json::array();
    for (const Segment& s : segments) {
        nlohmann::json js;
        js["x0"] = s.x0;
        js["length"] = s.length;
        js["kind"] = s.kind == SegmentKind::kConstant ? "constant" : "toward";
        js["value"] = s.value;
        if (s.kind == SegmentKind::kToward) js["target"] = s.target;
        j["segments"].push_back(js);
    }
    return j;
}

ScalingFunction ScalingFunction::from_json(const nlohmann::json& j) {
    ScalingFunction f;
    f.left_extension = j.at("left_extension").get<double>();
    for (const auto& js : j.at("segments")) {
        Segment s;
        s.x0 = js.at("x0").get<double>();
        s.length = js.at("length").get<double>();
        std::string kind = js.at("kind").get<std::string>();
        if (kind == "constant") {
            s.kind = SegmentKind::kConstant;
        } else if (kind == "toward") {
            s.kind = SegmentKind::kToward;
            s.target = js.at("target").get<double>();
        } else {
            throw std::invalid_argument("unknown segment kind: " + kind);
        }
        s.value = js.at("value").get<double>();
        f.segments.push_back(s);
    }
    return f;
}

double SampledFunction::eval(double x) const {
    if (xs.empty()) throw std::invalid_argument("empty sample table");
    if (x <= xs.front()) return values.front();
    if (x >= xs.back()) return values.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs.begin());
    double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return values[i - 1] + t * (values[i] - values[i - 1]);
}

void SampledFunction::write_csv(std::ostream& os) const {
    char buf[80];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", xs[i], values[i]);
        os << buf;
    }
}

SampledFunction SampledFunction::read_csv(std::istream& is) {
    SampledFunction f;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("malformed sample row");
        f.xs.push_back(std::stod(line.substr(0, comma)));
        f.values.push_back(std::stod(line.substr(comma + 1)));
    }
    return f;
}

double class_membership_defect(const std::function<double(double)>& f, const ClassWindow& w,
                               const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("no samples");
    const std::size_t n = grid.size();
    std::vector<double> fx(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i && grid[i] <= grid[i - 1]) throw std::invalid_argument("grid must be sorted");
        fx[i] = f(grid[i]);
    }
    double defect = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double e = std::exp(-(grid[j] - grid[i]));
            double lower = w.lambda - (w.lambda - fx[i]) * e;
            double upper = w.alpha - (w.alpha - fx[i]) * e;
            defect = std::max(defect, lower - fx[j]);
            defect = std::max(defect, fx[j] - upper);
        }
    }
    return std::max(defect, 0.0);
}

double class_membership_defect(const ScalingFunction& f, const ClassWindow& w,
                               const std::vector<double>& grid) {
    return class_membership_defect([&f](double x) { return f.eval(x); }, w, grid);
}

// ---------------------------------------------------------------------------
// Minimal envelope, closed form.
//
// With w(u) = e^u (f(u) - lambda) and M(x) = max(0, sup_{u<=x} w(u)), the
// envelope is g(x) = lambda + e^-x M(x).  On intervals where M is constant
// this is a Toward(lambda) relaxation; where the sup is attained at u = x it
// is f itself.  w is monotone on every Constant/Toward segment, so M has
// closed-form crossings.
// ---------------------------------------------------------------------------

namespace {

struct EnvelopeBuilder {
    double lambda;
    std::vector<Segment> out;

    void emit_relax(double a, double b, double m) {
        if (b <= a) return;
        Segment s;
        s.x0 = a;
        s.length = b - a;
        if (m <= 0) {
            s.kind = SegmentKind::kConstant;
            s.value = lambda;
        } else {
            s.kind = SegmentKind::kToward;
            s.target = lambda;
            s.value = lambda + m * std::exp(-a);
        }
        push(s);
    }

    void emit_follow(const Segment& src, double a, double b) {
        if (b < a) return;
        Segment s;
        s.x0 = a;
        s.length = b - a;
        s.kind = src.kind;
        s.value = src.eval(a);
        s.target = src.target;
        push(s);
    }

    void push(Segment s) {
        if (!out.empty()) {
            Segment& prev = out.back();
            if (prev.kind == s.kind && same_curve(prev, s)) {
                prev.length = (s.x0 + s.length) - prev.x0;
                return;
            }
        }
        out.push_back(s);
    }

    static bool same_curve(const Segment& a, const Segment& b) {
        if (a.kind == SegmentKind::kConstant)
            return nearly_equal(a.value, b.value, 1e-12);
        if (!nearly_equal(a.target, b.target, 1e-12)) return false;
        double amp_a = (a.target - a.value) * std::exp(a.x0);
        double amp_b = (b.target - b.value) * std::exp(b.x0);
        return nearly_equal(amp_a, amp_b, 1e-9);
    }
};

// w(u) = e^u (f(u) - lambda) restricted to one segment: slope sign and the
// crossing point with a level m.
struct SegmentWeight {
    const Segment& seg;
    double lambda;

    double at(double u) const { return std::exp(u) * (seg.eval(u) - lambda); }

    // d/du sign: Constant c -> sign(c - lambda); Toward T -> sign(T - lambda).
    double slope_coeff() const {
        return (seg.kind == SegmentKind::kConstant ? seg.value : seg.target) - lambda;
    }

    // Solve w(u) = m on the segment, valid when rising and w(a) <= m.
    double crossing(double m) const {
        double coeff = slope_coeff();
        if (seg.kind == SegmentKind::kConstant) return std::log(m / coeff);
        double amp = (seg.target - seg.value) * std::exp(seg.x0);  // w(u) = coeff e^u - amp
        return std::log((m + amp) / coeff);
    }
};

}  // namespace

ScalingFunction minimal_envelope(const ScalingFunction& f, double lambda) {
    if (lambda < 0) throw std::invalid_argument("lambda must be non-negative");
    try {
        f.validate(std::numeric_limits<double>::infinity());
    } catch (const std::exception&) {
        throw std::invalid_argument("input outside class");
    }
    for (const Segment& s : f.segments) {
        if (s.value < -1e-9 || (s.kind == SegmentKind::kToward && s.target < -1e-9))
            throw std::invalid_argument("input outside class");
    }

    EnvelopeBuilder builder{lambda, {}};
    const double x_begin = f.x_begin();
    // Running sup of w over (-inf, x]; never below 0 (the u -> -inf limit).
    double m = std::max(0.0, std::exp(x_begin) * (f.left_extension - lambda));

    const std::size_t nseg = f.segments.size();
    for (std::size_t k = 0; k < nseg; ++k) {
        const Segment& seg = f.segments[k];
        const bool last = (k + 1 == nseg);
        double a = seg.x0;
        double b = seg.x0 + seg.length;
        SegmentWeight w{seg, lambda};

        bool rising = w.slope_coeff() > 0;
        if (!rising) {
            builder.emit_relax(a, b, m);
            if (last) builder.emit_relax(b, b, m);  // tail regime is the same relaxation
            continue;
        }
        double w_end = last ? std::numeric_limits<double>::infinity() : w.at(b);
        if (w_end <= m) {
            builder.emit_relax(a, b, m);
            continue;
        }
        double cross = std::max(a, w.crossing(m));
        if (!last) {
            cross = std::min(cross, b);
            builder.emit_relax(a, cross, m);
            builder.emit_follow(seg, cross, b);
            m = std::max(m, w.at(b));
        } else {
            builder.emit_relax(a, cross, m);
            builder.emit_follow(seg, cross, std::max(cross, b));
        }
    }

    ScalingFunction g;
    g.left_extension = std::max(lambda, f.left_extension);
    g.segments = std::move(builder.out);
    if (g.segments.empty()) {
        g = ScalingFunction::constant(std::max(lambda, f.left_extension));
        g.segments.front().x0 = x_begin;
    }
    return g;
}

SampledFunction minimal_envelope(const SampledFunction& f, double lambda) {
    if (f.xs.empty()) throw std::invalid_argument("empty sample table");
    SampledFunction g;
    g.xs = f.xs;
    g.values.resize(f.values.size());
    g.values[0] = std::max(f.values[0], lambda);
    for (std::size_t i = 1; i < f.xs.size(); ++i) {
        double decay = std::exp(-(f.xs[i] - f.xs[i - 1]));
        double relaxed = lambda + (g.values[i - 1] - lambda) * decay;
        g.values[i] = std::max(f.values[i], relaxed);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Pointwise extrema of piecewise functions.
// ---------------------------------------------------------------------------

namespace {

// Value C + B e^-x on an interval.
struct ExpPiece {
    double C = 0;
    double B = 0;
    double eval(double x) const { return C + B * std::exp(-x); }
};

ExpPiece piece_of(const ScalingFunction& f, double x) {
    if (f.segments.empty() || x < f.x_begin()) return ExpPiece{f.left_extension, 0.0};
    std::size_t lo = 0, hi = f.segments.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (f.segments[mid].x0 <= x) lo = mid; else hi = mid - 1;
    }
    const Segment& s = f.segments[lo];
    if (s.kind == SegmentKind::kConstant) return ExpPiece{s.value, 0.0};
    return ExpPiece{s.target, -(s.target - s.value) * std::exp(s.x0)};
}

ScalingFunction extrema_pair(const ScalingFunction& f, const ScalingFunction& g, bool sup) {
    std::vector<double> bps;
    for (const auto* fn : {&f, &g}) {
        for (const Segment& s : fn->segments) {
            bps.push_back(s.x0);
            bps.push_back(s.x0 + s.length);
        }
    }
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end(),
                          [](double a, double b) { return std::fabs(a - b) < 1e-13; }),
              bps.end());

    // Insert crossings between consecutive breakpoints (and past the last one).
    std::vector<double> knots = bps;
    for (std::size_t i = 0; i < bps.size(); ++i) {
        double p = bps[i];
        double q = (i + 1 < bps.size()) ? bps[i + 1] : std::numeric_limits<double>::infinity();
        double probe = std::isinf(q) ? p + 1.0 : 0.5 * (p + q);
        ExpPiece a = piece_of(f, probe), b = piece_of(g, probe);
        double dC = a.C - b.C, dB = a.B - b.B;
        if (std::fabs(dC) < 1e-15 || std::fabs(dB) < 1e-15) continue;
        double ratio = -dB / dC;  // e^x at the crossing
        if (ratio <= 0) continue;
        double x = std::log(ratio);
        if (x > p + 1e-12 && x < q - 1e-12) knots.push_back(x);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(),
                            [](double a, double b) { return std::fabs(a - b) < 1e-13; }),
                knots.end());

    EnvelopeBuilder builder{0.0, {}};
    for (std::size_t i = 0; i < knots.size(); ++i) {
        double p = knots[i];
        bool tail = (i + 1 == knots.size());
        double q = tail ? p : knots[i + 1];
        double probe = tail ? p + 1.0 : 0.5 * (p + q);
        ExpPiece a = piece_of(f, probe), b = piece_of(g, probe);
        bool pick_a = sup ? (a.eval(probe) >= b.eval(probe)) : (a.eval(probe) <= b.eval(probe));
        const ExpPiece& win = pick_a ? a : b;
        Segment s;
        s.x0 = p;
        s.length = q - p;
        if (win.B == 0) {
            s.kind = SegmentKind::kConstant;
            s.value = win.C;
        } else {
            s.kind = SegmentKind::kToward;
            s.target = win.C;
            s.value = win.eval(p);
        }
        builder.push(s);
    }

    ScalingFunction out;
    out.left_extension = sup ? std::max(f.left_extension, g.left_extension)
                             : std::min(f.left_extension, g.left_extension);
    out.segments = std::move(builder.out);
    if (out.segments.empty()) out = ScalingFunction::constant(out.left_extension);
    return out;
}

}  // namespace

ScalingFunction pointwise_extrema(const std::vector<ScalingFunction>& family, ExtremaMode mode) {
    if (family.empty()) throw std::invalid_argument("empty family");
    ScalingFunction acc = family.front();
    for (std::size_t i = 1; i < family.size(); ++i)
        acc = extrema_pair(acc, family[i], mode == ExtremaMode::kSup);
    return acc;
}

ScalingFunction concatenate(const std::vector<ConcatPiece>& pieces) {
    if (pieces.empty()) throw std::invalid_argument("empty concatenation");
    ScalingFunction f;
    f.left_extension = pieces.front().value;
    double x = 0;
    double prev_end = pieces.front().value;
    for (const ConcatPiece& p : pieces) {
        if (p.length < 0) throw std::invalid_argument("negative piece length");
        if (std::fabs(p.value - prev_end) > 1e-9)
            throw std::invalid_argument("discontinuous concatenation");
        Segment s;
        s.x0 = x;
        s.length = p.length;
        s.kind = p.kind;
        s.value = p.value;
        s.target = p.target;
        prev_end = s.end_value();
        x += p.length;
        if (p.length == 0) continue;
        f.segments.push_back(s);
    }
    if (f.segments.empty()) {
        f = ScalingFunction::constant(pieces.front().value);
    }
    return f;
}

PsiResult psi(const std::function<double(double)>& s_fn, double h, double r, int dim, double eps) {
    if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("scale out of range");
    if (dim < 1) throw std::invalid_argument("dim must be positive");
    if (h < -1e-12 || h > dim + 1e-9) throw std::invalid_argument("h outside [0, d]");
    double step = eps / (2.0 * dim);
    step = std::min(step, 1e-2);
    step = std::max(step, 1e-7);
    const double log_r = std::log(r);
    PsiResult best{h, 0.0};  // theta = 0 contributes the limit value h
    long long n = static_cast<long long>(std::ceil(1.0 / step));
    for (long long k = 1; k <= n; ++k) {
        double theta = std::min(1.0, k * step);
        double val = (1.0 - theta) * h + theta * s_fn(std::exp(theta * log_r));
        if (val > best.value) best = PsiResult{val, theta};
        if (theta >= 1.0) break;
    }
    return best;
}

DimInterval dim_interval(double h, double s, double t, double alpha) {
    bool alpha_inf = std::isinf(alpha);
    if (!(0 <= s && s <= t) || !(alpha_inf || t <= alpha) || h < 0 ||
        !(alpha_inf || h <= alpha))
        throw std::invalid_argument("inconsistent dimension parameters");
    DimInterval out;
    if (t <= h) {
        out.lo = out.hi = h;
        out.degenerate = true;
        return out;
    }
    out.lo = std::max(h, s);
    if (alpha_inf) {
        out.hi = s + (1.0 - s / t) * h;
    } else {
        out.hi = h + (t - h) * (alpha - h) * s / (alpha * t - h * s);
    }
    if (out.hi < out.lo) out.hi = out.lo;  // guard 1-ulp cancellation
    out.degenerate = std::fabs(out.hi - out.lo) <= 1e-13 * std::max(1.0, out.lo);
    return out;
}

bool box_dimension_exists(double h, double s, double t) {
    if (!(0 <= s && s <= t) || h < 0)
        throw std::invalid_argument("inconsistent dimension parameters");
    return t <= std::max(h, s);
}

}  // namespace boxlab
