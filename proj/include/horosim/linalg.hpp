#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace horosim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Dense storage below this many rows, coordinate-sparse at or above it.
inline constexpr int kDenseLimit = 4096;

enum class Storage { Auto, Dense, Sparse };

// Symmetric operator with interchangeable dense/sparse backing.  Both
// backends honor the same quadratic-form / apply contract; the dense matrix
// can always be materialized (used by the small-system Hessian machinery).
class SymmetricOperator {
 public:
  SymmetricOperator() = default;
  explicit SymmetricOperator(Matrix m) : store_(std::move(m)) {}
  explicit SymmetricOperator(SparseMatrix m) : store_(std::move(m)) {}

  static SymmetricOperator from_triplets(int n, const std::vector<Eigen::Triplet<double>>& trips,
                                         Storage storage = Storage::Auto) {
    const bool sparse = storage == Storage::Sparse || (storage == Storage::Auto && n >= kDenseLimit);
    if (sparse) {
      SparseMatrix m(n, n);
      m.setFromTriplets(trips.begin(), trips.end());
      return SymmetricOperator(std::move(m));
    }
    Matrix m = Matrix::Zero(n, n);
    for (const auto& t : trips) m(t.row(), t.col()) += t.value();
    return SymmetricOperator(std::move(m));
  }

  int n() const {
    if (is_sparse()) return static_cast<int>(std::get<SparseMatrix>(store_).rows());
    return static_cast<int>(std::get<Matrix>(store_).rows());
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(store_); }

  Vector apply(const Vector& v) const {
    if (is_sparse()) return std::get<SparseMatrix>(store_) * v;
    return std::get<Matrix>(store_) * v;
  }
  double quadratic_form(const Vector& v) const { return v.dot(apply(v)); }

  Matrix dense() const {
    if (is_sparse()) return Matrix(std::get<SparseMatrix>(store_));
    return std::get<Matrix>(store_);
  }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(store_); }

 private:
  std::variant<Matrix, SparseMatrix> store_;
};

// Fixed orthonormal basis of the zero-sum subspace {v : sum v_i = 0}: column
// k (k = 1..n-1) is the Helmert vector with entries 1/sqrt(k(k+1)) on the
// first k sites, -k/sqrt(k(k+1)) on site k, zero after.  Every projected
// determinant and constrained draw uses this basis, so results are
// reproducible bit-for-bit for a given seed.
inline Matrix helmert_basis(int n) {
  if (n < 2) throw std::invalid_argument("helmert_basis: need n >= 2");
  Matrix q = Matrix::Zero(n, n - 1);
  for (int k = 1; k < n; ++k) {
    const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) q(i, k - 1) = 1.0 / norm;
    q(k, k - 1) = -static_cast<double>(k) / norm;
  }
  return q;
}

// log det of a symmetric positive definite matrix via Cholesky.
inline double logdet_spd(const Matrix& m, const std::string& what = "matrix") {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("logdet_spd: Cholesky failed, " + what + " not positive definite");
  double ld = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < m.rows(); ++i) ld += std::log(l(i, i));
  return 2.0 * ld;
}

inline double logdet_spd(const SparseMatrix& m, const std::string& what = "matrix") {
  Eigen::SimplicialLLT<SparseMatrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("logdet_spd: sparse Cholesky failed, " + what + " not positive definite");
  double ld = 0.0;
  const SparseMatrix l = llt.matrixL();
  for (int i = 0; i < m.rows(); ++i) ld += std::log(l.coeff(i, i));
  return 2.0 * ld;
}

// log det of M restricted to the zero-sum subspace, for symmetric PSD M whose
// kernel is exactly the constants.  Dense route: Helmert-projected Cholesky.
// Sparse route: the cofactor identity det(M|zero-sum) = n * det(M with row
// and column 0 deleted), which preserves sparsity.
inline double logdet_projected(const SymmetricOperator& op, const std::string& what = "operator") {
  const int n = op.n();
  if (n < 2) throw std::invalid_argument("logdet_projected: need n >= 2");
  if (!op.is_sparse()) {
    const Matrix q = helmert_basis(n);
    const Matrix proj = q.transpose() * op.dense() * q;
    return logdet_spd(proj, what + " (projected)");
  }
  const SparseMatrix& m = op.sparse();
  SparseMatrix red(n - 1, n - 1);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      if (it.row() > 0 && it.col() > 0)
        trips.emplace_back(static_cast<int>(it.row()) - 1, static_cast<int>(it.col()) - 1, it.value());
  red.setFromTriplets(trips.begin(), trips.end());
  return std::log(static_cast<double>(n)) + logdet_spd(red, what + " (anchored)");
}

// Smallest eigenvalue of a symmetric matrix.  Dense solver at desk scale,
// shifted inverse iteration above it.
inline double smallest_eigenvalue(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (n <= 512) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("smallest_eigenvalue: solver failed");
    return es.eigenvalues()(0);
  }
  // Gershgorin lower bound gives a shift that makes m - shift strictly PD.
  double lo = std::numeric_limits<double>::max();
  for (int i = 0; i < n; ++i) {
    double r = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) r += std::abs(m(i, j));
    lo = std::min(lo, m(i, i) - r);
  }
  const double shift = lo - 1.0;
  Eigen::LDLT<Matrix> fac(m - shift * Matrix::Identity(n, n));
  Vector v(n);  // deterministic dither so no eigenvector is missed
  for (int i = 0; i < n; ++i) v(i) = 1.0 + 0.01 * std::sin(1.7 * i + 0.3);
  v.normalize();
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector w = fac.solve(v);
    const double norm = w.norm();
    if (!(norm > 0.0)) break;
    w /= norm;
    const double mu_new = w.dot(m * w);
    if (std::abs(mu_new - mu) < 1e-12 * (1.0 + std::abs(mu_new)) && it > 3) {
      mu = mu_new;
      break;
    }
    mu = mu_new;
    v = w;
  }
  return mu;
}

}  // namespace horosim
