#include "gdiff/tps.hpp"

#include <cmath>
#include <stdexcept>

namespace gdiff {

double tps_kernel_sq(double r_squared) {
    return r_squared > 0.0 ? r_squared * std::log(r_squared) : 0.0;
}

TpsTransform solve_tps(const Eigen::MatrixXd& src, const Eigen::MatrixXd& dst, double lambda) {
    const int p = static_cast<int>(src.rows());
    if (p < 3) throw std::invalid_argument("solve_tps: need at least 3 control points");
    if (src.cols() != 2 || dst.rows() != p || dst.cols() != 2) {
        throw std::invalid_argument("solve_tps: src and dst must both be P x 2");
    }
    if (!src.allFinite() || !dst.allFinite()) {
        throw std::invalid_argument("solve_tps: control points must be finite");
    }
    if (lambda < 0.0) throw std::invalid_argument("solve_tps: lambda must be >= 0");

    // [ K + lambda I   P ] [w]   [dst]
    // [ P^T            0 ] [a] = [ 0 ]   with P = [1 x y]
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p + 3, p + 3);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            const double r2 = (src.row(i) - src.row(j)).squaredNorm();
            a(i, j) = tps_kernel_sq(r2);
        }
        a(i, i) += lambda;
        a(i, p) = 1.0;
        a(i, p + 1) = src(i, 0);
        a(i, p + 2) = src(i, 1);
        a(p, i) = 1.0;
        a(p + 1, i) = src(i, 0);
        a(p + 2, i) = src(i, 1);
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p + 3, 2);
    rhs.topRows(p) = dst;

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
        throw std::runtime_error(
            "solve_tps: singular system (control points collinear or coincident)");
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);

    TpsTransform t;
    t.src_points = src;
    t.weights = sol.topRows(p);
    t.lambda = lambda;
    // Rows p..p+2 of the solution are [c; ax; ay] per output coordinate.
    t.affine(0, 2) = sol(p, 0);
    t.affine(0, 0) = sol(p + 1, 0);
    t.affine(0, 1) = sol(p + 2, 0);
    t.affine(1, 2) = sol(p, 1);
    t.affine(1, 0) = sol(p + 1, 1);
    t.affine(1, 1) = sol(p + 2, 1);
    return t;
}

Eigen::MatrixXd apply_tps(const TpsTransform& t, const Eigen::MatrixXd& points) {
    if (points.cols() != 2) throw std::invalid_argument("apply_tps: points must be Q x 2");
    const int q = static_cast<int>(points.rows());
    const int p = t.num_points();
    Eigen::MatrixXd out(q, 2);
    for (int i = 0; i < q; ++i) {
        const double x = points(i, 0);
        const double y = points(i, 1);
        double ox = t.affine(0, 0) * x + t.affine(0, 1) * y + t.affine(0, 2);
        double oy = t.affine(1, 0) * x + t.affine(1, 1) * y + t.affine(1, 2);
        for (int j = 0; j < p; ++j) {
            const double u = tps_kernel_sq((points.row(i) - t.src_points.row(j)).squaredNorm());
            ox += t.weights(j, 0) * u;
            oy += t.weights(j, 1) * u;
        }
        out(i, 0) = ox;
        out(i, 1) = oy;
    }
    return out;
}

}  // namespace gdiff
