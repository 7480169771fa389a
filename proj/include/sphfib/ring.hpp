#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphfib {

using Integer = boost::multiprecision::cpp_int;

Integer gcd(const Integer& a, const Integer& b);
Integer lcm(const Integer& a, const Integer& b);

// Finite set of primes S defining the coefficient ring Z[1/S].
// Elements are verified prime on construction (trial division).
class PrimeSet {
 public:
  PrimeSet() = default;
  explicit PrimeSet(std::vector<Integer> primes);
  PrimeSet(std::initializer_list<long long> primes);

  bool contains(const Integer& p) const;
  const std::vector<Integer>& primes() const { return primes_; }
  bool empty() const { return primes_.empty(); }

  // Divides all factors supported on S out of |x|. strip(0) = 0.
  Integer strip(Integer x) const;
  // x is a unit of Z[1/S]: x != 0 and every prime factor of x lies in S.
  bool is_s_unit(const Integer& x) const;

  bool operator==(const PrimeSet& o) const { return primes_ == o.primes_; }
  bool operator!=(const PrimeSet& o) const { return !(*this == o); }

  std::string str() const;

 private:
  std::vector<Integer> primes_;  // strictly ascending
};

bool is_prime(const Integer& p);

// Element of Z[1/S] in lowest terms, denominator >= 1 and supported on S.
class LocalScalar {
 public:
  LocalScalar() : num_(0), den_(1) {}
  LocalScalar(Integer n, PrimeSet s) : num_(std::move(n)), den_(1), primes_(std::move(s)) {}
  LocalScalar(long long n, PrimeSet s) : num_(n), den_(1), primes_(std::move(s)) {}
  // Throws std::invalid_argument if the reduced denominator is not S-supported.
  LocalScalar(Integer num, Integer den, PrimeSet s);

  static std::optional<LocalScalar> make(Integer num, Integer den, const PrimeSet& s);

  const Integer& numerator() const { return num_; }
  const Integer& denominator() const { return den_; }
  const PrimeSet& primes() const { return primes_; }

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }
  // Unit of Z[1/S]: nonzero and numerator supported on S.
  bool is_unit() const;

  LocalScalar operator-() const;
  LocalScalar operator+(const LocalScalar& o) const;
  LocalScalar operator-(const LocalScalar& o) const;
  LocalScalar operator*(const LocalScalar& o) const;
  LocalScalar& operator+=(const LocalScalar& o) { return *this = *this + o; }
  LocalScalar& operator-=(const LocalScalar& o) { return *this = *this - o; }
  LocalScalar& operator*=(const LocalScalar& o) { return *this = *this * o; }
  // Exact division; absent when the quotient leaves Z[1/S] or o = 0.
  std::optional<LocalScalar> div(const LocalScalar& o) const;

  bool operator==(const LocalScalar& o) const;
  bool operator!=(const LocalScalar& o) const { return !(*this == o); }
  bool operator<(const LocalScalar& o) const;  // order on the underlying rationals

  std::string str() const;

 private:
  Integer num_, den_;
  PrimeSet primes_;
  void normalize();
};

// Dense matrix with exact integer entries, row major.
class IntMatrix {
 public:
  IntMatrix() : rows_(0), cols_(0) {}
  IntMatrix(std::size_t r, std::size_t c) : rows_(r), cols_(c), e_(r * c, Integer(0)) {}
  IntMatrix(std::initializer_list<std::initializer_list<long long>> rows);

  static IntMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Integer& at(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
  const Integer& at(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }

  IntMatrix transpose() const;
  IntMatrix operator*(const IntMatrix& o) const;
  IntMatrix operator+(const IntMatrix& o) const;
  IntMatrix operator-(const IntMatrix& o) const;
  bool operator==(const IntMatrix& o) const;
  bool operator!=(const IntMatrix& o) const { return !(*this == o); }

  bool is_square() const { return rows_ == cols_; }
  bool is_symmetric() const;
  bool is_diagonal() const;

  // Exact determinant (fraction-free Bareiss elimination).
  Integer det() const;

  std::vector<Integer> col(std::size_t j) const;
  std::vector<Integer> row(std::size_t i) const;
  IntMatrix submatrix(std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) const;

  std::string str() const;

 private:
  std::size_t rows_, cols_;
  std::vector<Integer> e_;
};

using IntVec = std::vector<Integer>;

IntVec mat_vec(const IntMatrix& A, const IntVec& x);
Integer dot(const IntVec& a, const IntVec& b);
Integer vec_gcd(const IntVec& v);

// U*A*V = D with U, V unimodular and D diagonal, d1 | d2 | ..., di >= 0.
// Uinv, Vinv are the exact inverses of U and V (also unimodular).
struct SmithResult {
  IntMatrix U, D, V, Uinv, Vinv;
  std::size_t rank() const;  // number of nonzero diagonal entries
};

SmithResult smith_normal_form(const IntMatrix& A);

// Exact inverse of a matrix with det = +-1; absent otherwise.
std::optional<IntMatrix> unimodular_inverse(const IntMatrix& A);

// Solve A x = b over Z[1/S]. Solvability is decided by clearing denominators
// and reducing to an integer system through the Smith normal form, dividing
// S-supported factors out of the diagonal constraints.
std::optional<std::vector<LocalScalar>> solve_linear(const IntMatrix& A, const IntVec& b,
                                                     const PrimeSet& s);

// Same, for a system whose entries already live in Z[1/S].
struct LocalMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<LocalScalar> e;  // row major
  PrimeSet primes;
  LocalScalar& at(std::size_t i, std::size_t j) { return e[i * cols + j]; }
  const LocalScalar& at(std::size_t i, std::size_t j) const { return e[i * cols + j]; }
};

std::optional<std::vector<LocalScalar>> solve_linear(const LocalMatrix& A,
                                                     const std::vector<LocalScalar>& b);

}  // namespace sphfib
