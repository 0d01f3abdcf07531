#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace shdbench::eval {

struct ProjectionConfig {
    uint64_t seed = 0;  // reserved for stochastic projectors; PCA ignores it
};

/// Projects N x d embeddings to N x 2 for qualitative plots. The projector is
/// principal components over the jointly fitted input (center, top-2
/// eigenvectors, deterministic sign convention). Needs at least 10 points.
Eigen::MatrixXd project_embeddings(const Eigen::MatrixXd& embeddings,
                                   const ProjectionConfig& config = {});

}  // namespace shdbench::eval
