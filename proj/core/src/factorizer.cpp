#include "spadict/factorizer.hpp"

#include <cmath>
#include <string>

#include "spadict/errors.hpp"

namespace spadict {

namespace {

void canonicalize_signs(Matrix& basis) {
  for (Index j = 0; j < basis.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < basis.rows(); ++i) {
      const double a = std::abs(basis(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
  }
}

}  // namespace

EigenBasis EigenBasis::leading(Index r) const {
  if (r < 1 || r > rank()) throw ArgumentError("leading: rank out of range");
  return {basis.leftCols(r), eigvals.head(r)};
}

EigenBasis full_basis(const Matrix& whitened_weight) {
  const Index d1 = whitened_weight.rows();
  if (d1 == 0) throw DimensionError("top_r_basis: empty weight");
  const Matrix gram = whitened_weight * whitened_weight.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
  // Eigen returns ascending eigenvalues.
  EigenBasis out;
  out.basis = solver.eigenvectors().rowwise().reverse();
  out.eigvals = solver.eigenvalues().reverse().cwiseMax(0.0);
  canonicalize_signs(out.basis);
  return out;
}

EigenBasis top_r_basis(const Matrix& whitened_weight, Index r) {
  if (r < 1 || r > whitened_weight.rows()) {
    throw ArgumentError("top_r_basis: r = " + std::to_string(r) + " outside [1, " +
                        std::to_string(whitened_weight.rows()) + "]");
  }
  return full_basis(whitened_weight).leading(r);
}

Matrix coefficients(const EigenBasis& basis, const Matrix& whitened_weight) {
  if (basis.basis.rows() != whitened_weight.rows()) throw DimensionError("coefficients: basis rows do not match");
  return basis.basis.transpose() * whitened_weight;
}

TruncatedSvd truncated_svd_oracle(const Matrix& w, Index k) {
  const Index min_dim = std::min(w.rows(), w.cols());
  if (k < 1 || k > min_dim) throw ArgumentError("truncated_svd_oracle: k out of range");
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  TruncatedSvd out;
  out.all_sigma = svd.singularValues();
  out.u = svd.matrixU().leftCols(k);
  out.v = svd.matrixV().leftCols(k);
  out.sigma = out.all_sigma.head(k);
  out.residual = std::sqrt(out.all_sigma.tail(min_dim - k).squaredNorm());
  return out;
}

}  // namespace spadict
