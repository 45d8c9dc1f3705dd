#pragma once

// Grid-based box counting and covering exponents.
//
// Counting uses half-open axis-aligned cells [k*r, (k+1)*r) anchored at the
// origin in place of open balls.  The grid count is within a factor 2^d of
// the open-ball covering number in either direction, so the induced
// exponent error is at most A_d / log(1/r) with A_d = d*log(2); that grid
// constant is carried on every profile.

#include <cstdint>
#include <utility>
#include <vector>

#include "boxlab/cloud.hpp"

namespace boxlab {

struct CoveringEntry {
    double r = 0;
    long long count = 0;
    double exponent = 0;  // log(count) / log(1/r)
};

struct CoveringProfile {
    int dim = 1;
    double grid_constant = 0;  // A_d
    std::vector<CoveringEntry> entries;  // r strictly decreasing
};

// A_d such that s(r) <= d - (d - s(r^theta))*theta + A_d/log(1/r) for grid counts.
inline double grid_constant(int dim) { return dim * 0.6931471805599453; }

long long count_boxes(const PointCloud& cloud, const Fixed96& r);
long long count_boxes(const PointCloud& cloud, double r);

// Same grid shifted by `offset` (componentwise, 0 <= offset < r).
long long count_boxes_offset(const PointCloud& cloud, const Fixed96& r, const Fixed96& offset);

double box_exponent(long long count, double r);

CoveringProfile covering_profile(const PointCloud& cloud, const std::vector<Fixed96>& scales);
CoveringProfile covering_profile(const PointCloud& cloud, const std::vector<double>& scales);

// Doubly-logarithmic reparametrisation (x, f(x)) with x = log log(1/r),
// f(x) = exponent at that scale.  Requires every r < 1/e.
std::vector<std::pair<double, double>> covering_class_samples(const CoveringProfile& profile);

// Repeated counting of one cloud at many scales: sort once, then each scale
// is a linear transition pass (floor division is monotone).  d = 1 only.
class SortedCounter {
  public:
    explicit SortedCounter(const PointCloud& cloud);
    long long count(const Fixed96& r) const;
    long long count(double r) const { return count(Fixed96::from_double(r)); }

  private:
    std::vector<u128> sorted_;
};

// Step evaluator induced by a profile: the count at r' is the count of the
// coarsest sampled scale <= r' (counts are constant between adjacent samples
// for the clouds we instrument).  Below the finest sample the finest count
// is reused.
class ProfileExponent {
  public:
    explicit ProfileExponent(const CoveringProfile& profile);
    double operator()(double r) const;

  private:
    std::vector<double> scales_;      // decreasing
    std::vector<long long> counts_;
};

}  // namespace boxlab
