#include "shdbench/eval/projection.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "shdbench/common.hpp"

namespace shdbench::eval {

Eigen::MatrixXd project_embeddings(const Eigen::MatrixXd& embeddings, const ProjectionConfig&) {
    const auto n = embeddings.rows();
    const auto d = embeddings.cols();
    require(n >= 10, ErrCat::parameter, "projection needs at least 10 points");
    require(d >= 2, ErrCat::parameter, "projection needs at least 2 input dimensions");
    require(embeddings.allFinite(), ErrCat::data, "projection input must be finite");

    const Eigen::RowVectorXd mean = embeddings.colwise().mean();
    const Eigen::MatrixXd centered = embeddings.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    require(solver.info() == Eigen::Success, ErrCat::internal, "eigendecomposition failed");

    // Eigenvalues ascend; take the top two and fix each axis sign so the
    // largest-magnitude loading is positive.
    Eigen::MatrixXd axes(d, 2);
    axes.col(0) = solver.eigenvectors().col(d - 1);
    axes.col(1) = solver.eigenvectors().col(d - 2);
    for (int c = 0; c < 2; ++c) {
        Eigen::Index imax = 0;
        double best = 0.0;
        for (Eigen::Index i = 0; i < d; ++i)
            if (std::abs(axes(i, c)) > best) {
                best = std::abs(axes(i, c));
                imax = i;
            }
        if (axes(imax, c) < 0.0) axes.col(c) = -axes.col(c);
    }
    return centered * axes;
}

}  // namespace shdbench::eval
