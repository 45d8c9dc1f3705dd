#pragma once

// Covering-class calculus.
//
// Scaling functions live on the doubly-logarithmic chart x = log log(1/r)
// and take values in [0, d].  The class window (lambda, alpha) constrains
// the upper right Dini derivative to [lambda - g, alpha - g]; equivalently
// (mean value form), for every x0 and x > 0,
//
//   lambda - (lambda - g(x0)) e^-x  <=  g(x0+x)  <=  alpha - (alpha - g(x0)) e^-x.
//
// Every function built here is piecewise Constant / Toward, where a Toward
// segment relaxes exponentially toward a target: T - (T - v0) e^-(x-x0).
// That family contains all the construction functions we need and is closed
// under the minimal envelope and pointwise extrema.

#include <cmath>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace boxlab {

enum class SegmentKind { kConstant, kToward };

struct Segment {
    double x0 = 0;
    double length = 0;  // final segment of a function extends past x0+length
    SegmentKind kind = SegmentKind::kConstant;
    double value = 0;   // kConstant: level; kToward: value at x0
    double target = 0;  // kToward only

    double eval(double x) const {
        if (kind == SegmentKind::kConstant) return value;
        return target - (target - value) * std::exp(-(x - x0));
    }
    double end_value() const { return eval(x0 + length); }
};

struct ScalingFunction {
    double left_extension = 0;      // value for x below the first segment
    std::vector<Segment> segments;  // contiguous, continuous at joins

    double x_begin() const { return segments.front().x0; }
    double x_end() const { return segments.back().x0 + segments.back().length; }
    double eval(double x) const;

    // Continuity at joins (1e-12), values and targets within [0, dim].
    void validate(double dim_bound) const;

    static ScalingFunction constant(double v);
    nlohmann::json to_json() const;
    static ScalingFunction from_json(const nlohmann::json& j);
};

// Empirically measured function: dense (x, value) table, linear interpolation,
// clamped to the end values outside the sampled range.
struct SampledFunction {
    std::vector<double> xs;
    std::vector<double> values;
    double eval(double x) const;

    void write_csv(std::ostream& os) const;  // x,value rows
    static SampledFunction read_csv(std::istream& is);
};

struct ClassWindow {
    double lambda = 0;
    double alpha = 0;
    ClassWindow(double l, double a) : lambda(l), alpha(a) {
        if (!(0 <= l && l <= a)) throw std::invalid_argument("invalid class window");
    }
};

// Largest violation of the mean-value form of the window constraint over all
// ordered grid pairs; 0 (to tolerance) iff the restriction of f to the grid
// is consistent with membership.
double class_membership_defect(const std::function<double(double)>& f, const ClassWindow& w,
                               const std::vector<double>& grid);
double class_membership_defect(const ScalingFunction& f, const ClassWindow& w,
                               const std::vector<double>& grid);

// Pointwise minimal member of G(lambda, alpha) dominating f, computed in
// closed form:  g(x) = lambda + e^-x * max(0, sup_{u<=x} e^u (f(u) - lambda)).
// The weighted function e^u (f(u) - lambda) is monotone on every segment, so
// the running sup has closed-form crossing points and g is again piecewise
// Constant / Toward.
ScalingFunction minimal_envelope(const ScalingFunction& f, double lambda);

// Envelope of a sampled function on its own grid (forward propagation of the
// lower relaxation bound; exact on the grid up to interpolation error).
SampledFunction minimal_envelope(const SampledFunction& f, double lambda);

enum class ExtremaMode { kSup, kInf };
ScalingFunction pointwise_extrema(const std::vector<ScalingFunction>& family, ExtremaMode mode);

// Piece of a concatenation: a segment shape on [0, len].
struct ConcatPiece {
    SegmentKind kind = SegmentKind::kConstant;
    double value = 0;   // start value (Constant level / Toward v0)
    double target = 0;  // Toward only
    double length = 0;
};

// Splice pieces end to end starting at x = 0; f(x) = f_1(0) for x <= 0.
// Consecutive endpoint values must agree to 1e-9.
ScalingFunction concatenate(const std::vector<ConcatPiece>& pieces);

struct PsiResult {
    double value = 0;
    double theta_star = 0;
};

// psi(r) = max_{theta in [0,1]} [(1-theta) h + theta s(r^theta)], with the
// theta = 0 value defined as the limit h.  The theta grid step is chosen from
// the 2d Lipschitz modulus so the grid error is at most eps.
PsiResult psi(const std::function<double(double)>& s_fn, double h, double r, int dim,
              double eps = 1e-4);

struct DimInterval {
    double lo = 0;
    double hi = 0;
    bool degenerate = false;
};

// Interval of possible lower box dimensions given Hausdorff dimension h,
// fixed-point lower/upper exponents s <= t, and ambient bound alpha (may be
// infinity).
DimInterval dim_interval(double h, double s, double t, double alpha);

// Box dimension exists iff t <= max(h, s).
bool box_dimension_exists(double h, double s, double t);

}  // namespace boxlab
