#ifndef TEXTKP_TPS_HPP
#define TEXTKP_TPS_HPP

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "textkp/point.hpp"

namespace textkp {

struct TpsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TpsDuplicatePoints : TpsError {
    using TpsError::TpsError;
};
struct TpsSingularSystem : TpsError {
    using TpsError::TpsError;
};

// U(r) = r^2 log(r^2), U(0) = 0.
inline double tps_kernel(double r2) {
    return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

// Thin-plate spline fitted through paired control points. Weights are
// (n kernel coefficients + affine a0, ax, ay) per output coordinate.
struct TpsTransform {
    std::vector<Point2> source_points;
    std::vector<Point2> target_points;
    Eigen::VectorXd wx, wy; // length n + 3

    Point2 apply(Point2 p) const {
        const size_t n = source_points.size();
        double x = wx[n] + wx[n + 1] * p.x + wx[n + 2] * p.y;
        double y = wy[n] + wy[n + 1] * p.x + wy[n + 2] * p.y;
        for (size_t i = 0; i < n; ++i) {
            const Point2 d = p - source_points[i];
            const double u = tps_kernel(d.x * d.x + d.y * d.y);
            x += wx[i] * u;
            y += wy[i] * u;
        }
        return {x, y};
    }
};

inline TpsTransform fit_tps(const std::vector<Point2>& source, const std::vector<Point2>& target,
                            double regularization = 0.0) {
    const size_t n = source.size();
    if (n < 3) throw TpsError("need at least 3 control points");
    if (target.size() != n) throw TpsError("source/target size mismatch");
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (dist(source[i], source[j]) < 1e-9)
                throw TpsDuplicatePoints("duplicate source control points " + std::to_string(i) +
                                         " and " + std::to_string(j));

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 3, n + 3);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            const Point2 d = source[i] - source[j];
            A(i, j) = tps_kernel(d.x * d.x + d.y * d.y);
        }
        A(i, i) += regularization;
        A(i, n) = 1.0;
        A(i, n + 1) = source[i].x;
        A(i, n + 2) = source[i].y;
        A(n, i) = 1.0;
        A(n + 1, i) = source[i].x;
        A(n + 2, i) = source[i].y;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw TpsSingularSystem("singular TPS system (collinear control points?)");

    Eigen::VectorXd bx = Eigen::VectorXd::Zero(n + 3);
    Eigen::VectorXd by = Eigen::VectorXd::Zero(n + 3);
    for (size_t i = 0; i < n; ++i) {
        bx[i] = target[i].x;
        by[i] = target[i].y;
    }
    TpsTransform t;
    t.source_points = source;
    t.target_points = target;
    t.wx = lu.solve(bx);
    t.wy = lu.solve(by);
    return t;
}

} // namespace textkp

#endif
