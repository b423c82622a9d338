#pragma once

// Dense complex linear algebra for the small Hermitian problems that appear
// in per-bin filter updates (matrices up to a few tens of rows).

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace tidanse {

using cplx = std::complex<double>;

/// Row-major dense complex matrix with value semantics.
class ComplexMat {
 public:
  ComplexMat() = default;
  ComplexMat(std::size_t rows, std::size_t cols);
  ComplexMat(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static ComplexMat identity(std::size_t n);
  static ComplexMat column(std::span<const cplx> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return entries_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<cplx> entries() noexcept { return entries_; }
  std::span<const cplx> entries() const noexcept { return entries_; }

  ComplexMat adjoint() const;
  ComplexMat transpose() const;
  ComplexMat block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const ComplexMat& src);
  /// Copies of the listed rows, in order.
  ComplexMat select_rows(std::span<const std::size_t> rows) const;

  double frobenius_norm() const;
  cplx trace() const;

  ComplexMat& operator+=(const ComplexMat& rhs);
  ComplexMat& operator-=(const ComplexMat& rhs);
  ComplexMat& operator*=(cplx s);

  friend bool operator==(const ComplexMat&, const ComplexMat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> entries_;
};

ComplexMat operator+(ComplexMat a, const ComplexMat& b);
ComplexMat operator-(ComplexMat a, const ComplexMat& b);
ComplexMat operator*(const ComplexMat& a, const ComplexMat& b);
ComplexMat operator*(cplx s, ComplexMat a);

/// a^H * b without forming the adjoint.
ComplexMat adjoint_times(const ComplexMat& a, const ComplexMat& b);
/// c^H * r * c, the congruence used to map centralized SCMs onto observations.
ComplexMat congruence(const ComplexMat& c, const ComplexMat& r);

ComplexMat hstack(std::span<const ComplexMat> blocks);
ComplexMat vstack(std::span<const ComplexMat> blocks);
ComplexMat diagonal(std::span<const double> values);

/// ||A - A^H||_F <= rel_tol * max(1, ||A||_F).
bool is_hermitian(const ComplexMat& a, double rel_tol = 1e-12);
/// Average of A and A^H; removes round-off asymmetry.
ComplexMat hermitian_part(const ComplexMat& a);

/// Lower Cholesky factor L with a = L L^H. Throws NotPositiveDefinite when a
/// pivot drops to or below 1e-13 * trace(a) / m.
ComplexMat cholesky(const ComplexMat& a);

/// Solves a X = b for Hermitian positive-definite a.
ComplexMat hermitian_solve(const ComplexMat& a, const ComplexMat& b);

struct HermitianEig {
  std::vector<double> values;  // descending
  ComplexMat vectors;          // unitary, columns match values
};

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
HermitianEig hermitian_eig(const ComplexMat& a);

struct GevdResult {
  /// Q with ryy = Q diag(sigmas) Q^H and rnn = Q Q^H.
  ComplexMat qmat;
  /// Generalized eigenvalues, non-increasing.
  std::vector<double> sigmas;
  /// Q^{-H}; its columns are the generalized eigenvectors.
  ComplexMat eigvecs;
};

/// Generalized eigendecomposition of the Hermitian-definite pencil {ryy, rnn}.
GevdResult gevd(const ComplexMat& ryy, const ComplexMat& rnn);

/// General inverse by LU with partial pivoting; throws Singular.
ComplexMat inverse(const ComplexMat& t);
cplx determinant(const ComplexMat& t);

/// (t^H)^{-1}. Singular if |det t| < 1e-14 * ||t||_F^n.
ComplexMat inv_hermitian_transpose(const ComplexMat& t);

/// ||t||_F * ||t^{-1}||_F, or +inf when t is numerically singular.
double condition_number(const ComplexMat& t);

}  // namespace tidanse
