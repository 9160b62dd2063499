#ifndef DDMC_TYPES_HPP
#define DDMC_TYPES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ddmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Smooth domain of the rate functions: a hyper-rectangle [lo, hi],
/// optionally intersected with the open simplex {x_i >= 0, sum x_i <= 1}.
struct Domain {
    Vec lo;
    Vec hi;
    bool simplex = false;

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const Vec& x, double tol = 1e-12) const {
        for (int i = 0; i < x.size(); ++i) {
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        }
        if (simplex && x.sum() > 1.0 + tol) return false;
        return true;
    }

    bool interior(const Vec& x, double margin = 0.0) const {
        for (int i = 0; i < x.size(); ++i) {
            if (x[i] <= lo[i] + margin || x[i] >= hi[i] - margin) return false;
        }
        if (simplex && x.sum() >= 1.0 - margin) return false;
        return true;
    }

    /// Distance from an interior point to the nearest boundary face.
    double boundary_distance(const Vec& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < x.size(); ++i) {
            d = std::min(d, x[i] - lo[i]);
            d = std::min(d, hi[i] - x[i]);
        }
        if (simplex) d = std::min(d, (1.0 - x.sum()) / std::sqrt(double(x.size())));
        return d;
    }

    static Domain box(const Vec& lo, const Vec& hi, bool simplex = false) {
        return Domain{lo, hi, simplex};
    }
};

inline Vec make_vec(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

}  // namespace ddmc

#endif
