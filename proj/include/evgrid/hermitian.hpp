#pragma once

// Hermitian matrices hosted in real-symmetric PSD blocks via the embedding
//   W = P + jQ  ->  X = [[P, -Q], [Q, P]],
// which is PSD iff W is, with every eigenvalue of W doubled in X.

#include "evgrid/conic.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <stdexcept>

namespace evgrid::hermitian {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline bool is_hermitian(const MatrixXcd& w, double tol = 1e-10) {
  return w.rows() == w.cols() &&
         (w - w.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, w.cwiseAbs().maxCoeff());
}

inline MatrixXd expand(const MatrixXcd& w) {
  if (!is_hermitian(w)) throw std::invalid_argument("expand: matrix is not Hermitian");
  const Eigen::Index n = w.rows();
  MatrixXd x(2 * n, 2 * n);
  x.topLeftCorner(n, n) = w.real();
  x.bottomRightCorner(n, n) = w.real();
  x.bottomLeftCorner(n, n) = w.imag();
  x.topRightCorner(n, n) = -w.imag();
  return x;
}

// Projects a real-symmetric 2n x 2n matrix back onto the embedded structure
// and returns the Hermitian n x n matrix. Exact inverse of expand on its range.
inline MatrixXcd collapse(const MatrixXd& x) {
  if (x.rows() != x.cols() || x.rows() % 2 != 0)
    throw std::invalid_argument("collapse: expected even-order square matrix");
  const Eigen::Index n = x.rows() / 2;
  const MatrixXd p = 0.5 * (x.topLeftCorner(n, n) + x.bottomRightCorner(n, n));
  const MatrixXd q = 0.5 * (x.bottomLeftCorner(n, n) - x.topRightCorner(n, n));
  MatrixXcd w = 0.5 * (p + p.transpose()).cast<std::complex<double>>();
  w += std::complex<double>(0, 0.5) * (q - q.transpose()).cast<std::complex<double>>();
  return w;
}

inline std::pair<double, VectorXcd> max_eigpair(const MatrixXcd& w) {
  if (!is_hermitian(w)) throw std::invalid_argument("max_eigpair: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(w);
  const Eigen::Index last = w.rows() - 1;
  VectorXcd v = es.eigenvectors().col(last);
  v /= v.norm();
  return {es.eigenvalues()[last], v};
}

// Index bookkeeping for a Hermitian variable living inside a PSD block of a
// ConicProblem. Constraint coefficients are split across both copies so the
// optimal embedded matrix can always be taken structured.
class HermitianEmbedding {
 public:
  HermitianEmbedding(int complex_order, int psd_block)
      : n_(complex_order), block_(psd_block) {
    if (complex_order < 1) throw std::invalid_argument("complex order must be >= 1");
  }

  int complex_order() const { return n_; }
  int real_order() const { return 2 * n_; }
  int block() const { return block_; }

  // coefficient c on Re W_km (k==m allowed)
  void add_re(conic::ConicProblem& pr, int row, int k, int m, double c) const {
    pr.add_psd_term(row, block_, k, m, 0.5 * c);
    pr.add_psd_term(row, block_, k + n_, m + n_, 0.5 * c);
  }
  // coefficient c on Im W_km (k != m)
  void add_im(conic::ConicProblem& pr, int row, int k, int m, double c) const {
    pr.add_psd_term(row, block_, k + n_, m, 0.5 * c);
    pr.add_psd_term(row, block_, k, m + n_, -0.5 * c);
  }
  void add_re_obj(conic::ConicProblem& pr, int k, int m, double c) const {
    pr.add_obj_psd(block_, k, m, 0.5 * c);
    pr.add_obj_psd(block_, k + n_, m + n_, 0.5 * c);
  }
  void add_im_obj(conic::ConicProblem& pr, int k, int m, double c) const {
    pr.add_obj_psd(block_, k + n_, m, 0.5 * c);
    pr.add_obj_psd(block_, k, m + n_, -0.5 * c);
  }

  MatrixXcd value(const conic::ConicProblem& pr, const conic::ConicProblem::Solution& sol) const {
    return collapse(pr.psd_matrix(sol, block_));
  }

 private:
  int n_;
  int block_;
};

}  // namespace evgrid::hermitian
