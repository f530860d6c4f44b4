// tps.hpp
// Thin-plate spline mapping between 2-D point sets: affine part plus
// U(r) = r^2 log(r^2) radial terms, solved from the standard
// (P+3) x (P+3) linear system with optional smoothing regularization.

#pragma once

#include <Eigen/Dense>

namespace gdiff {

struct TpsTransform {
    Eigen::MatrixXd src_points;        // P x 2 control points
    Eigen::Matrix<double, 2, 3> affine;  // maps [x, y, 1]
    Eigen::MatrixXd weights;           // P x 2 radial weights
    double lambda = 0.0;

    int num_points() const { return static_cast<int>(src_points.rows()); }
};

// Radial kernel with the removable singularity fixed: U(0) = 0.
double tps_kernel_sq(double r_squared);

// Mapping that sends src to dst exactly when lambda = 0. Throws when the
// system is singular (collinear control points).
TpsTransform solve_tps(const Eigen::MatrixXd& src, const Eigen::MatrixXd& dst, double lambda = 0.0);

// f(p) = affine . [p; 1] + sum_i w_i U(|p - src_i|)
Eigen::MatrixXd apply_tps(const TpsTransform& t, const Eigen::MatrixXd& points);

}  // namespace gdiff
