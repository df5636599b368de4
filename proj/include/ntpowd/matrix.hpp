#pragma once
// Dense low-rank completion primitives. Everything here is templated on the
// scalar and written as expression-friendly free functions over Eigen types.
#include <Eigen/Dense>

#include <stdexcept>

namespace ntpowd {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MaskDegenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Moore-Penrose inverse via SVD; singular values below rel_cutoff * sigma_max
// are treated as zero. rank_out receives the effective rank when non-null.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> pseudo_inverse(
    const Eigen::MatrixBase<Derived>& a, double rel_cutoff = 1e-10,
    int* rank_out = nullptr) {
  using Scalar = typename Derived::Scalar;
  Eigen::BDCSVD<DenseMatrix<Scalar>> svd(a.derived(),
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff =
      (s.size() > 0 ? s(0) : Scalar(0)) * static_cast<Scalar>(rel_cutoff);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(s.size());
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > Scalar(0)) {
      inv(i) = Scalar(1) / s(i);
      ++rank;
    }
  }
  if (rank_out) *rank_out = rank;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Client-client block from the fully observed server block A (m x m) and the
// top-right server-client block B (m x n): C = B' A^+ B. When X = [[A,B],[B',C]]
// has the same rank as A, this reproduces C exactly.
template <typename DA, typename DB>
DenseMatrix<typename DA::Scalar> closed_form_C(const Eigen::MatrixBase<DA>& A,
                                               const Eigen::MatrixBase<DB>& B,
                                               double rel_cutoff = 1e-10,
                                               bool* rank_deficient = nullptr) {
  int rank = 0;
  auto Adag = pseudo_inverse(A, rel_cutoff, &rank);
  if (rank_deficient) *rank_deficient = rank < 4;
  return B.transpose() * Adag * B;
}

struct IhtsvdOptions {
  int rank{4};
  double tol{1e-9};
  int max_iter{10000};
};

template <typename Scalar>
struct IhtsvdResult {
  DenseMatrix<Scalar> completed;  // last truncated estimate, observed restored
  int iterations{0};
  double last_change{0};
  bool converged{false};
};

// Iterative hard-threshold SVD: truncate to rank k, restore observed entries,
// repeat until the truncated estimate's relative Frobenius change passes tol.
// Missing entries start at the mean observed off-diagonal value.
template <typename Scalar>
IhtsvdResult<Scalar> ihtsvd_complete(const DenseMatrix<Scalar>& x,
                                     const MaskMatrix& mask,
                                     const IhtsvdOptions& opts = {}) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols())
    throw std::invalid_argument("matrix/mask shape mismatch");
  if (opts.rank < 1) throw std::invalid_argument("rank must be >= 1");

  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    if (!mask.row(i).any()) throw MaskDegenerate("row with no observed entry");
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    if (!mask.col(j).any()) throw MaskDegenerate("column with no observed entry");

  Scalar sum = 0;
  long count = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (i != j && mask(i, j)) {
        sum += x(i, j);
        ++count;
      }
    }
  }
  const Scalar init = count > 0 ? sum / static_cast<Scalar>(count) : Scalar(0);

  DenseMatrix<Scalar> w = mask.select(x, DenseMatrix<Scalar>::Constant(
                                             x.rows(), x.cols(), init));
  IhtsvdResult<Scalar> result;
  DenseMatrix<Scalar> prev;
  const auto k = static_cast<Eigen::Index>(opts.rank);

  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::BDCSVD<DenseMatrix<Scalar>> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto kk = std::min<Eigen::Index>(k, svd.singularValues().size());
    DenseMatrix<Scalar> t = svd.matrixU().leftCols(kk) *
                            svd.singularValues().head(kk).asDiagonal() *
                            svd.matrixV().leftCols(kk).transpose();
    if (!t.allFinite()) throw NonFinite("ihtsvd estimate is not finite");
    result.iterations = it;
    if (prev.size() > 0) {
      const double den = prev.norm();
      result.last_change = den > 0 ? (t - prev).norm() / den : 0.0;
      if (result.last_change < opts.tol) {
        result.converged = true;
        result.completed = mask.select(x, t);
        return result;
      }
    }
    prev = t;
    w = mask.select(x, t);
  }
  result.completed = mask.select(x, prev);
  return result;
}

// Elementwise helpers the squared-completion mode is built from.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> elementwise_square(
    const Eigen::MatrixBase<Derived>& x) {
  return x.array().square().matrix();
}

template <typename Derived>
DenseMatrix<typename Derived::Scalar> elementwise_sqrt_clamped(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.array().max(Scalar(0)).sqrt().matrix();
}

}  // namespace ntpowd
