#include "tidanse/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tidanse/error.hpp"

namespace tidanse {

namespace {

constexpr double kPivotRelTol = 1e-13;
constexpr double kJacobiRelTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;
constexpr double kSingularRelTol = 1e-14;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

std::string shape(const ComplexMat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Solves L X = B in place for lower-triangular L.
void forward_substitute(const ComplexMat& l, ComplexMat& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx acc = b(i, c);
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * b(k, c);
      b(i, c) = acc / l(i, i);
    }
  }
}

// Solves L^H X = B in place for lower-triangular L.
void backward_substitute_adjoint(const ComplexMat& l, ComplexMat& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      cplx acc = b(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) acc -= std::conj(l(k, ii)) * b(k, c);
      b(ii, c) = acc / std::conj(l(ii, ii));
    }
  }
}

ComplexMat cholesky_solve(const ComplexMat& l, ComplexMat b) {
  forward_substitute(l, b);
  backward_substitute_adjoint(l, b);
  return b;
}

struct LuFactors {
  ComplexMat lu;
  std::vector<std::size_t> perm;
  int sign = 1;
  bool singular = false;
};

LuFactors lu_factor(const ComplexMat& a) {
  LuFactors f{a, std::vector<std::size_t>(a.rows()), 1, false};
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  const std::size_t n = a.rows();
  ComplexMat& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        piv = i;
      }
    }
    if (best == 0.0) {
      f.singular = true;
      return f;
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      m(i, k) /= m(k, k);
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= m(i, k) * m(k, j);
    }
  }
  return f;
}

}  // namespace

ComplexMat::ComplexMat(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, cplx{0.0, 0.0}) {}

ComplexMat::ComplexMat(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  require(entries_.size() == rows_ * cols_, "entry count does not match shape");
}

ComplexMat ComplexMat::identity(std::size_t n) {
  ComplexMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMat ComplexMat::column(std::span<const cplx> values) {
  return ComplexMat(values.size(), 1, std::vector<cplx>(values.begin(), values.end()));
}

ComplexMat ComplexMat::adjoint() const {
  ComplexMat out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

ComplexMat ComplexMat::transpose() const {
  ComplexMat out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

ComplexMat ComplexMat::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  require(r0 + nr <= rows_ && c0 + nc <= cols_, "block out of range");
  ComplexMat out(nr, nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
  return out;
}

void ComplexMat::set_block(std::size_t r0, std::size_t c0, const ComplexMat& src) {
  require(r0 + src.rows() <= rows_ && c0 + src.cols() <= cols_, "set_block out of range");
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) (*this)(r0 + r, c0 + c) = src(r, c);
}

ComplexMat ComplexMat::select_rows(std::span<const std::size_t> rows) const {
  ComplexMat out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < rows_, "row index out of range");
    for (std::size_t c = 0; c < cols_; ++c) out(i, c) = (*this)(rows[i], c);
  }
  return out;
}

double ComplexMat::frobenius_norm() const {
  double acc = 0.0;
  for (const auto& v : entries_) acc += std::norm(v);
  return std::sqrt(acc);
}

cplx ComplexMat::trace() const {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) acc += (*this)(i, i);
  return acc;
}

ComplexMat& ComplexMat::operator+=(const ComplexMat& rhs) {
  require(rows_ == rhs.rows_ && cols_ == rhs.cols_, "operator+= shape mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += rhs.entries_[i];
  return *this;
}

ComplexMat& ComplexMat::operator-=(const ComplexMat& rhs) {
  require(rows_ == rhs.rows_ && cols_ == rhs.cols_, "operator-= shape mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= rhs.entries_[i];
  return *this;
}

ComplexMat& ComplexMat::operator*=(cplx s) {
  for (auto& v : entries_) v *= s;
  return *this;
}

ComplexMat operator+(ComplexMat a, const ComplexMat& b) { return a += b; }
ComplexMat operator-(ComplexMat a, const ComplexMat& b) { return a -= b; }
ComplexMat operator*(cplx s, ComplexMat a) { return a *= s; }

ComplexMat operator*(const ComplexMat& a, const ComplexMat& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorCode::DimensionMismatch, "product " + shape(a) + " * " + shape(b));
  ComplexMat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

ComplexMat adjoint_times(const ComplexMat& a, const ComplexMat& b) {
  if (a.rows() != b.rows())
    throw Error(ErrorCode::DimensionMismatch, "adjoint product " + shape(a) + "^H * " + shape(b));
  ComplexMat out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const cplx aki = std::conj(a(k, i));
      if (aki == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

ComplexMat congruence(const ComplexMat& c, const ComplexMat& r) {
  return hermitian_part(adjoint_times(c, r * c));
}

ComplexMat hstack(std::span<const ComplexMat> blocks) {
  if (blocks.empty()) return {};
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    require(b.rows() == blocks.front().rows(), "hstack row mismatch");
    cols += b.cols();
  }
  ComplexMat out(blocks.front().rows(), cols);
  std::size_t c0 = 0;
  for (const auto& b : blocks) {
    out.set_block(0, c0, b);
    c0 += b.cols();
  }
  return out;
}

ComplexMat vstack(std::span<const ComplexMat> blocks) {
  if (blocks.empty()) return {};
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    require(b.cols() == blocks.front().cols(), "vstack column mismatch");
    rows += b.rows();
  }
  ComplexMat out(rows, blocks.front().cols());
  std::size_t r0 = 0;
  for (const auto& b : blocks) {
    out.set_block(r0, 0, b);
    r0 += b.rows();
  }
  return out;
}

ComplexMat diagonal(std::span<const double> values) {
  ComplexMat out(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
  return out;
}

bool is_hermitian(const ComplexMat& a, double rel_tol) {
  if (!a.is_square()) return false;
  double diff = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) diff += std::norm(a(i, j) - std::conj(a(j, i)));
  return std::sqrt(diff) <= rel_tol * std::max(1.0, a.frobenius_norm());
}

ComplexMat hermitian_part(const ComplexMat& a) {
  require(a.is_square(), "hermitian_part needs a square matrix");
  ComplexMat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out(i, i) = a(i, i).real();
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const cplx v = 0.5 * (a(i, j) + std::conj(a(j, i)));
      out(i, j) = v;
      out(j, i) = std::conj(v);
    }
  }
  return out;
}

ComplexMat cholesky(const ComplexMat& a) {
  if (!a.is_square()) throw Error(ErrorCode::DimensionMismatch, "cholesky of " + shape(a));
  const std::size_t n = a.rows();
  ComplexMat l(n, n);
  if (n == 0) return l;
  const double tr = a.trace().real();
  if (!(tr > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "non-positive trace");
  const double threshold = kPivotRelTol * tr / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > threshold))
      throw Error(ErrorCode::NotPositiveDefinite, "pivot " + std::to_string(j) + " = " + std::to_string(d));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * std::conj(l(j, k));
      l(i, j) = acc / ljj;
    }
  }
  return l;
}

ComplexMat hermitian_solve(const ComplexMat& a, const ComplexMat& b) {
  if (!a.is_square() || b.rows() != a.rows())
    throw Error(ErrorCode::DimensionMismatch, "hermitian_solve " + shape(a) + " \\ " + shape(b));
  if (!is_hermitian(a, 1e-10)) throw Error(ErrorCode::NotPositiveDefinite, "matrix is not Hermitian");
  const ComplexMat l = cholesky(a);
  ComplexMat x = cholesky_solve(l, b);

  // One refinement step with the residual accumulated in extended precision.
  using lcplx = std::complex<long double>;
  ComplexMat r(b.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      lcplx acc(b(i, j).real(), b(i, j).imag());
      for (std::size_t k = 0; k < a.cols(); ++k)
        acc -= lcplx(a(i, k).real(), a(i, k).imag()) * lcplx(x(k, j).real(), x(k, j).imag());
      r(i, j) = cplx(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
    }
  x += cholesky_solve(l, r);
  return x;
}

HermitianEig hermitian_eig(const ComplexMat& a_in) {
  if (!a_in.is_square()) throw Error(ErrorCode::DimensionMismatch, "hermitian_eig of " + shape(a_in));
  const std::size_t n = a_in.rows();
  ComplexMat a = hermitian_part(a_in);
  ComplexMat v = ComplexMat::identity(n);
  const double scale = a.frobenius_norm();

  auto off_norm = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) acc += std::norm(a(i, j));
    return std::sqrt(acc);
  };

  bool converged = scale == 0.0 || off_norm() < kJacobiRelTol * scale;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        const cplx phase = apq / mag;
        const double theta = 0.5 * std::atan2(2.0 * mag, a(q, q).real() - a(p, p).real());
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
        const cplx gpp = c;
        const cplx gpq = s;
        const cplx gqp = -s * std::conj(phase);
        const cplx gqq = c * std::conj(phase);
        for (std::size_t r = 0; r < n; ++r) {
          const cplx arp = a(r, p);
          const cplx arq = a(r, q);
          a(r, p) = arp * gpp + arq * gqp;
          a(r, q) = arp * gpq + arq * gqq;
          const cplx vrp = v(r, p);
          const cplx vrq = v(r, q);
          v(r, p) = vrp * gpp + vrq * gqp;
          v(r, q) = vrp * gpq + vrq * gqq;
        }
        for (std::size_t col = 0; col < n; ++col) {
          const cplx apc = a(p, col);
          const cplx aqc = a(q, col);
          a(p, col) = std::conj(gpp) * apc + std::conj(gqp) * aqc;
          a(q, col) = std::conj(gpq) * apc + std::conj(gqq) * aqc;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
    converged = off_norm() < kJacobiRelTol * scale;
  }
  if (!converged) throw Error(ErrorCode::NoConvergence, "Jacobi sweeps exhausted");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x).real() > a(y, y).real(); });
  HermitianEig out{std::vector<double>(n), ComplexMat(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]).real();
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = v(r, order[j]);
  }
  return out;
}

GevdResult gevd(const ComplexMat& ryy, const ComplexMat& rnn) {
  if (!ryy.is_square() || !rnn.is_square() || ryy.rows() != rnn.rows())
    throw Error(ErrorCode::DimensionMismatch, "gevd pencil " + shape(ryy) + ", " + shape(rnn));
  const ComplexMat l = cholesky(hermitian_part(rnn));
  // whitened = L^{-1} ryy L^{-H}
  ComplexMat y = hermitian_part(ryy);
  forward_substitute(l, y);
  ComplexMat whitened = y.adjoint();
  forward_substitute(l, whitened);
  HermitianEig eig = hermitian_eig(whitened);

  GevdResult out;
  out.sigmas = std::move(eig.values);
  out.qmat = l * eig.vectors;
  out.eigvecs = eig.vectors;
  backward_substitute_adjoint(l, out.eigvecs);
  return out;
}

ComplexMat inverse(const ComplexMat& t) {
  if (!t.is_square()) throw Error(ErrorCode::DimensionMismatch, "inverse of " + shape(t));
  const std::size_t n = t.rows();
  const LuFactors f = lu_factor(t);
  if (f.singular) throw Error(ErrorCode::Singular, "zero pivot in LU");
  ComplexMat inv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<cplx> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      cplx acc = (f.perm[i] == c) ? cplx{1.0} : cplx{};
      for (std::size_t k = 0; k < i; ++k) acc -= f.lu(i, k) * x[k];
      x[i] = acc;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      cplx acc = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) acc -= f.lu(ii, k) * x[k];
      x[ii] = acc / f.lu(ii, ii);
    }
    for (std::size_t r = 0; r < n; ++r) inv(r, c) = x[r];
  }
  return inv;
}

cplx determinant(const ComplexMat& t) {
  if (!t.is_square()) throw Error(ErrorCode::DimensionMismatch, "determinant of " + shape(t));
  const LuFactors f = lu_factor(t);
  if (f.singular) return 0.0;
  cplx det = static_cast<double>(f.sign);
  for (std::size_t i = 0; i < t.rows(); ++i) det *= f.lu(i, i);
  return det;
}

ComplexMat inv_hermitian_transpose(const ComplexMat& t) {
  if (!t.is_square()) throw Error(ErrorCode::DimensionMismatch, "inv_hermitian_transpose of " + shape(t));
  const double norm = t.frobenius_norm();
  const double floor = kSingularRelTol * std::pow(norm, static_cast<double>(t.rows()));
  if (norm == 0.0 || std::abs(determinant(t)) < floor)
    throw Error(ErrorCode::Singular, "matrix is numerically singular");
  return inverse(t.adjoint());
}

double condition_number(const ComplexMat& t) {
  try {
    return t.frobenius_norm() * inverse(t).frobenius_norm();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace tidanse
