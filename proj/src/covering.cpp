#include "boxlab/covering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace boxlab {

namespace {

void check_scale(const Fixed96& r) {
    if (r.m == 0 || r.m >= Fixed96::one_raw())
        throw std::invalid_argument("scale out of range");
}

long long count_impl(const PointCloud& cloud, const Fixed96& r, const Fixed96& offset) {
    if (cloud.empty()) throw std::invalid_argument("empty input");
    check_scale(r);
    const std::size_t n = cloud.size();
    if (cloud.dim == 1) {
        std::vector<u128> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = cell_index(cloud.coords[i], r, offset);
        std::sort(idx.begin(), idx.end());
        return static_cast<long long>(std::unique(idx.begin(), idx.end()) - idx.begin());
    }
    const int d = cloud.dim;
    std::vector<u128> idx(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
            idx[i * d + a] = cell_index(cloud.at(i, a), r, offset);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        for (int k = 0; k < d; ++k) {
            if (idx[a * d + k] != idx[b * d + k]) return idx[a * d + k] < idx[b * d + k];
        }
        return false;
    };
    auto equal = [&](std::size_t a, std::size_t b) {
        for (int k = 0; k < d; ++k)
            if (idx[a * d + k] != idx[b * d + k]) return false;
        return true;
    };
    std::sort(order.begin(), order.end(), less);
    long long count = 1;
    for (std::size_t i = 1; i < n; ++i)
        if (!equal(order[i - 1], order[i])) ++count;
    return count;
}

}  // namespace

long long count_boxes(const PointCloud& cloud, const Fixed96& r) {
    return count_impl(cloud, r, Fixed96::zero());
}

long long count_boxes(const PointCloud& cloud, double r) {
    if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("scale out of range");
    return count_impl(cloud, Fixed96::from_double(r), Fixed96::zero());
}

long long count_boxes_offset(const PointCloud& cloud, const Fixed96& r, const Fixed96& offset) {
    return count_impl(cloud, r, offset);
}

double box_exponent(long long count, double r) {
    if (count < 1) throw std::invalid_argument("count must be positive");
    if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("scale out of range");
    return std::log(static_cast<double>(count)) / std::log(1.0 / r);
}

CoveringProfile covering_profile(const PointCloud& cloud, const std::vector<Fixed96>& scales) {
    if (scales.empty()) throw std::invalid_argument("no scales");
    if (cloud.empty()) throw std::invalid_argument("empty input");
    CoveringProfile profile;
    profile.dim = cloud.dim;
    profile.grid_constant = grid_constant(cloud.dim);

    // d = 1: sort the coordinates once; floor division is monotone, so each
    // scale is a linear transition count over the sorted pass.
    std::vector<u128> sorted1d;
    if (cloud.dim == 1) {
        sorted1d.reserve(cloud.coords.size());
        for (const Fixed96& c : cloud.coords) sorted1d.push_back(c.m);
        std::sort(sorted1d.begin(), sorted1d.end());
    }

    long long prev_count = 0;
    Fixed96 prev_r = Fixed96::one();
    for (const Fixed96& r : scales) {
        check_scale(r);
        if (!(r < prev_r)) throw std::invalid_argument("scales must be strictly decreasing");
        prev_r = r;
        CoveringEntry e;
        e.r = r.to_double();
        if (cloud.dim == 1) {
            long long count = 1;
            u128 prev = sorted1d.front() / r.m;
            for (std::size_t i = 1; i < sorted1d.size(); ++i) {
                u128 idx = sorted1d[i] / r.m;
                if (idx != prev) {
                    ++count;
                    prev = idx;
                }
            }
            e.count = count;
        } else {
            e.count = count_boxes(cloud, r);
        }
        e.exponent = box_exponent(e.count, e.r);
        if (e.count < prev_count)
            throw std::runtime_error("count regression: scale list is not nested");
        prev_count = e.count;
        profile.entries.push_back(e);
    }
    return profile;
}

CoveringProfile covering_profile(const PointCloud& cloud, const std::vector<double>& scales) {
    std::vector<Fixed96> fs;
    fs.reserve(scales.size());
    for (double r : scales) {
        if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("scale out of range");
        fs.push_back(Fixed96::from_double(r));
    }
    return covering_profile(cloud, fs);
}

std::vector<std::pair<double, double>> covering_class_samples(const CoveringProfile& profile) {
    const double inv_e = std::exp(-1.0);
    std::vector<std::pair<double, double>> samples;
    samples.reserve(profile.entries.size());
    for (const auto& e : profile.entries) {
        if (!(e.r < inv_e))
            throw std::invalid_argument("scale too coarse for doubly-logarithmic chart");
        samples.emplace_back(std::log(std::log(1.0 / e.r)), e.exponent);
    }
    return samples;
}

SortedCounter::SortedCounter(const PointCloud& cloud) {
    if (cloud.empty()) throw std::invalid_argument("empty input");
    if (cloud.dim != 1) throw std::invalid_argument("sorted counting supports d = 1 only");
    sorted_.reserve(cloud.coords.size());
    for (const Fixed96& c : cloud.coords) sorted_.push_back(c.m);
    std::sort(sorted_.begin(), sorted_.end());
}

long long SortedCounter::count(const Fixed96& r) const {
    check_scale(r);
    // Gallop from cell to cell while the count stays small, then fall back to
    // a linear transition pass (cheaper when most points are isolated).
    long long count = 0;
    std::size_t i = 0;
    const std::size_t n = sorted_.size();
    while (i < n && count < 1024) {
        u128 idx = sorted_[i] / r.m;
        ++count;
        u128 boundary = (idx + 1) * r.m;  // <= 2^96 + r.m, no overflow
        i = static_cast<std::size_t>(
            std::lower_bound(sorted_.begin() + static_cast<long>(i), sorted_.end(), boundary) -
            sorted_.begin());
    }
    if (i < n) {
        u128 prev = sorted_[i] / r.m;
        ++count;
        for (++i; i < n; ++i) {
            u128 idx = sorted_[i] / r.m;
            if (idx != prev) {
                ++count;
                prev = idx;
            }
        }
    }
    return count;
}

ProfileExponent::ProfileExponent(const CoveringProfile& profile) {
    if (profile.entries.empty()) throw std::invalid_argument("empty profile");
    for (const auto& e : profile.entries) {
        scales_.push_back(e.r);
        counts_.push_back(e.count);
    }
}

double ProfileExponent::operator()(double r) const {
    if (!(r > 0.0)) throw std::invalid_argument("scale out of range");
    if (r >= 1.0) return 0.0;
    // Largest sampled scale <= r; scales_ is decreasing.
    auto it = std::lower_bound(scales_.begin(), scales_.end(), r, std::greater<double>());
    long long count;
    if (it == scales_.end()) {
        count = counts_.back();  // below the finest sample: reuse finest count
    } else {
        count = counts_[static_cast<std::size_t>(it - scales_.begin())];
    }
    return std::log(static_cast<double>(count)) / std::log(1.0 / r);
}

}  // namespace boxlab
