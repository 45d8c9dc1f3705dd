#pragma once

// Test-only oracles, independent of the library paths they check.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Brute-force theta-grid maximisation of the envelope formula
//   g(x) = sup_{theta in (0,1]} ((1-theta) lambda + theta f(x - log(1/theta))).
inline double envelope_theta_grid(const std::function<double(double)>& f, double lambda, double x,
                                  double step = 1e-4) {
    double best = lambda;  // theta -> 0 limit
    for (double theta = step; theta <= 1.0 + 1e-12; theta += step) {
        double th = std::min(theta, 1.0);
        double v = (1.0 - th) * lambda + th * f(x - std::log(1.0 / th));
        if (v > best) best = v;
    }
    return best;
}

// Dynamic-programming forward propagation of the lower relaxation bound on a
// dense grid: the minimal sequence with g >= f and
// g(x_{i+1}) >= lambda - (lambda - g(x_i)) e^{-dx}.
struct DpEnvelope {
    std::vector<double> xs;
    std::vector<double> values;
};

inline DpEnvelope envelope_dp(const std::function<double(double)>& f, double lambda,
                              double x_start, double x_end, double step) {
    DpEnvelope out;
    double g = std::max(f(x_start), lambda);
    double decay = std::exp(-step);
    for (double x = x_start; x <= x_end + 0.5 * step; x += step) {
        out.xs.push_back(x);
        out.values.push_back(g);
        double relaxed = lambda + (g - lambda) * decay;
        g = std::max(f(x + step), relaxed);
    }
    return out;
}

// Middle-third Cantor construction: lower endpoints of the level-n intervals,
// as exact rationals k / 3^n.
inline std::vector<long long> cantor_lower_numerators(int depth) {
    std::vector<long long> nums{0};
    for (int k = 0; k < depth; ++k) {
        std::vector<long long> next;
        next.reserve(nums.size() * 2);
        for (long long a : nums) {
            next.push_back(3 * a);      // left third of [a, a+1]/3^k
            next.push_back(3 * a + 2);  // right third
        }
        nums = std::move(next);
    }
    return nums;  // denominators are 3^depth
}

}  // namespace oracles
