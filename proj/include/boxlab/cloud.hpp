#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "boxlab/fixed96.hpp"

namespace boxlab {

// Finite set of points in [0,1]^d at fixed working precision.
struct PointCloud {
    int dim = 1;
    std::vector<Fixed96> coords;  // row-major, size = dim * size()

    PointCloud() = default;
    explicit PointCloud(int d) : dim(d) {
        if (d < 1) throw std::invalid_argument("dim must be positive");
    }

    std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
    bool empty() const { return coords.empty(); }

    void push(std::span<const double> p) {
        if (static_cast<int>(p.size()) != dim)
            throw std::invalid_argument("point dimension mismatch");
        for (double c : p) coords.push_back(Fixed96::from_double(c));
    }
    void push1(double x) { push(std::span<const double>(&x, 1)); }
    void push_fixed(std::span<const Fixed96> p) {
        if (static_cast<int>(p.size()) != dim)
            throw std::invalid_argument("point dimension mismatch");
        coords.insert(coords.end(), p.begin(), p.end());
    }
    void push_fixed1(Fixed96 x) { coords.push_back(x); }

    const Fixed96& at(std::size_t point, int axis) const { return coords[point * dim + axis]; }

    // One point per row, d decimal columns.
    void write_csv(std::ostream& os) const;
    static PointCloud read_csv(std::istream& is, int dim);
};

}  // namespace boxlab
