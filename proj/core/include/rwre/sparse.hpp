#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rwre {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, std::ptrdiff_t>;
using Triplet = Eigen::Triplet<double, std::ptrdiff_t>;

/// Direct sparse LU solve of A x = b for each column of `rhs`. Throws
/// ErrorKind::solver if the factorization fails.
Eigen::MatrixXd sparse_solve(std::size_t n, const std::vector<Triplet>& entries,
                             const Eigen::MatrixXd& rhs);

}  // namespace rwre
