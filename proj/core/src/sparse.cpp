#include "rwre/sparse.hpp"

#include <Eigen/SparseLU>

#include "rwre/error.hpp"

namespace rwre {

Eigen::MatrixXd sparse_solve(std::size_t n, const std::vector<Triplet>& entries,
                             const Eigen::MatrixXd& rhs) {
  const auto dim = static_cast<std::ptrdiff_t>(n);
  SparseMatrix a(dim, dim);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<std::ptrdiff_t>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) fail(ErrorKind::solver, "sparse LU factorization failed: " + lu.lastErrorMessage());
  Eigen::MatrixXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) fail(ErrorKind::solver, "sparse LU solve failed");
  return x;
}

}  // namespace rwre
