#include "boxlab/cloud.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace boxlab {

void PointCloud::write_csv(std::ostream& os) const {
    char buf[64];
    for (std::size_t i = 0; i < size(); ++i) {
        for (int a = 0; a < dim; ++a) {
            std::snprintf(buf, sizeof buf, "%.17g", at(i, a).to_double());
            if (a) os << ',';
            os << buf;
        }
        os << '\n';
    }
}

PointCloud PointCloud::read_csv(std::istream& is, int dim) {
    PointCloud cloud(dim);
    std::string line;
    std::vector<double> p(dim);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        for (int a = 0; a < dim; ++a) {
            if (!std::getline(row, cell, ','))
                throw std::runtime_error("point dimension mismatch in CSV");
            p[a] = std::stod(cell);
        }
        cloud.push(p);
    }
    return cloud;
}

}  // namespace boxlab
