#include "sphfib/ring.hpp"

#include <algorithm>
#include <sstream>

namespace sphfib {

Integer gcd(const Integer& a, const Integer& b) { return boost::multiprecision::gcd(a, b); }
Integer lcm(const Integer& a, const Integer& b) { return boost::multiprecision::lcm(a, b); }

namespace {
Integer isqrt(const Integer& n) { return boost::multiprecision::sqrt(n); }
}  // namespace

bool is_prime(const Integer& p) {
  if (p < 2) return false;
  if (p < 4) return true;
  if (p % 2 == 0) return false;
  // Primes used by the pipelines are tiny; guard against absurd inputs
  // rather than pulling in a probabilistic test.
  if (p > Integer(1000000000000LL))
    throw std::invalid_argument("prime candidate too large for trial division: " + p.str());
  Integer r = isqrt(p);
  for (Integer d = 3; d <= r; d += 2)
    if (p % d == 0) return false;
  return true;
}

PrimeSet::PrimeSet(std::vector<Integer> primes) : primes_(std::move(primes)) {
  std::sort(primes_.begin(), primes_.end());
  primes_.erase(std::unique(primes_.begin(), primes_.end()), primes_.end());
  for (const Integer& p : primes_)
    if (!is_prime(p)) throw std::invalid_argument("not a prime: " + p.str());
}

PrimeSet::PrimeSet(std::initializer_list<long long> primes) {
  std::vector<Integer> v;
  v.reserve(primes.size());
  for (long long p : primes) v.emplace_back(p);
  *this = PrimeSet(std::move(v));
}

bool PrimeSet::contains(const Integer& p) const {
  return std::binary_search(primes_.begin(), primes_.end(), p);
}

Integer PrimeSet::strip(Integer x) const {
  if (x == 0) return x;
  if (x < 0) x = -x;
  for (const Integer& p : primes_)
    while (x % p == 0) x /= p;
  return x;
}

bool PrimeSet::is_s_unit(const Integer& x) const { return x != 0 && strip(x) == 1; }

std::string PrimeSet::str() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < primes_.size(); ++i) os << (i ? "," : "") << primes_[i];
  os << "}";
  return os.str();
}

LocalScalar::LocalScalar(Integer num, Integer den, PrimeSet s)
    : num_(std::move(num)), den_(std::move(den)), primes_(std::move(s)) {
  if (den_ == 0) throw std::invalid_argument("zero denominator");
  normalize();
  if (!primes_.is_s_unit(den_) && den_ != 1)
    throw std::invalid_argument("denominator " + den_.str() + " not supported on " +
                                primes_.str());
}

std::optional<LocalScalar> LocalScalar::make(Integer num, Integer den, const PrimeSet& s) {
  if (den == 0) return std::nullopt;
  Integer g = gcd(num, den);
  if (g != 0) {
    num /= g;
    den /= g;
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (den != 1 && !s.is_s_unit(den)) return std::nullopt;
  LocalScalar r;
  r.num_ = std::move(num);
  r.den_ = std::move(den);
  r.primes_ = s;
  return r;
}

void LocalScalar::normalize() {
  if (num_ == 0) {
    den_ = 1;
    return;
  }
  Integer g = gcd(num_, den_);
  num_ /= g;
  den_ /= g;
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
}

bool LocalScalar::is_unit() const { return primes_.is_s_unit(num_); }

namespace {
const PrimeSet& pick_primes(const LocalScalar& a, const LocalScalar& b) {
  // Exact zeros are ambient-agnostic; otherwise the sets must agree.
  if (a.is_zero() && a.primes().empty()) return b.primes();
  if (b.is_zero() && b.primes().empty()) return a.primes();
  if (a.primes() != b.primes())
    throw std::invalid_argument("mixed prime sets: " + a.primes().str() + " vs " +
                                b.primes().str());
  return a.primes();
}
}  // namespace

LocalScalar LocalScalar::operator-() const {
  LocalScalar r = *this;
  r.num_ = -r.num_;
  return r;
}

LocalScalar LocalScalar::operator+(const LocalScalar& o) const {
  const PrimeSet& s = pick_primes(*this, o);
  return LocalScalar(num_ * o.den_ + o.num_ * den_, den_ * o.den_, s);
}

LocalScalar LocalScalar::operator-(const LocalScalar& o) const { return *this + (-o); }

LocalScalar LocalScalar::operator*(const LocalScalar& o) const {
  const PrimeSet& s = pick_primes(*this, o);
  return LocalScalar(num_ * o.num_, den_ * o.den_, s);
}

std::optional<LocalScalar> LocalScalar::div(const LocalScalar& o) const {
  if (o.is_zero()) return std::nullopt;
  const PrimeSet& s = pick_primes(*this, o);
  return make(num_ * o.den_, den_ * o.num_, s);
}

bool LocalScalar::operator==(const LocalScalar& o) const {
  return num_ == o.num_ && den_ == o.den_;
}

bool LocalScalar::operator<(const LocalScalar& o) const {
  return num_ * o.den_ < o.num_ * den_;
}

std::string LocalScalar::str() const {
  if (den_ == 1) return num_.str();
  return num_.str() + "/" + den_.str();
}

IntMatrix::IntMatrix(std::initializer_list<std::initializer_list<long long>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  e_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix literal");
    for (long long v : r) e_.emplace_back(v);
  }
}

IntMatrix IntMatrix::identity(std::size_t n) {
  IntMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

IntMatrix IntMatrix::transpose() const {
  IntMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t.at(j, i) = at(i, j);
  return t;
}

IntMatrix IntMatrix::operator*(const IntMatrix& o) const {
  if (cols_ != o.rows_) throw std::invalid_argument("matrix product shape mismatch");
  IntMatrix r(rows_, o.cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols_; ++k) {
      const Integer& a = at(i, k);
      if (a == 0) continue;
      for (std::size_t j = 0; j < o.cols_; ++j) r.at(i, j) += a * o.at(k, j);
    }
  return r;
}

IntMatrix IntMatrix::operator+(const IntMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch");
  IntMatrix r = *this;
  for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] += o.e_[i];
  return r;
}

IntMatrix IntMatrix::operator-(const IntMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch");
  IntMatrix r = *this;
  for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] -= o.e_[i];
  return r;
}

bool IntMatrix::operator==(const IntMatrix& o) const {
  return rows_ == o.rows_ && cols_ == o.cols_ && e_ == o.e_;
}

bool IntMatrix::is_symmetric() const {
  if (!is_square()) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j)
      if (at(i, j) != at(j, i)) return false;
  return true;
}

bool IntMatrix::is_diagonal() const {
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j)
      if (i != j && at(i, j) != 0) return false;
  return true;
}

Integer IntMatrix::det() const {
  if (!is_square()) throw std::invalid_argument("determinant of non-square matrix");
  std::size_t n = rows_;
  if (n == 0) return 1;
  IntMatrix a = *this;
  Integer prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a.at(k, k) == 0) {
      std::size_t p = k + 1;
      while (p < n && a.at(p, k) == 0) ++p;
      if (p == n) return 0;
      for (std::size_t j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(p, j));
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        a.at(i, j) = (a.at(i, j) * a.at(k, k) - a.at(i, k) * a.at(k, j)) / prev;
    prev = a.at(k, k);
  }
  return sign > 0 ? a.at(n - 1, n - 1) : -a.at(n - 1, n - 1);
}

std::vector<Integer> IntMatrix::col(std::size_t j) const {
  std::vector<Integer> v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = at(i, j);
  return v;
}

std::vector<Integer> IntMatrix::row(std::size_t i) const {
  std::vector<Integer> v(cols_);
  for (std::size_t j = 0; j < cols_; ++j) v[j] = at(i, j);
  return v;
}

IntMatrix IntMatrix::submatrix(std::size_t r0, std::size_t c0, std::size_t r1,
                               std::size_t c1) const {
  IntMatrix m(r1 - r0, c1 - c0);
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) m.at(i - r0, j - c0) = at(i, j);
  return m;
}

std::string IntMatrix::str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < rows_; ++i) {
    os << (i ? ", [" : "[");
    for (std::size_t j = 0; j < cols_; ++j) os << (j ? "," : "") << at(i, j);
    os << "]";
  }
  os << "]";
  return os.str();
}

IntVec mat_vec(const IntMatrix& A, const IntVec& x) {
  if (A.cols() != x.size()) throw std::invalid_argument("mat_vec shape mismatch");
  IntVec y(A.rows(), Integer(0));
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) y[i] += A.at(i, j) * x[j];
  return y;
}

Integer dot(const IntVec& a, const IntVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot shape mismatch");
  Integer s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Integer vec_gcd(const IntVec& v) {
  Integer g = 0;
  for (const Integer& x : v) g = gcd(g, x);
  return g;
}

std::size_t SmithResult::rank() const {
  std::size_t r = 0;
  std::size_t n = std::min(D.rows(), D.cols());
  for (std::size_t i = 0; i < n; ++i)
    if (D.at(i, i) != 0) ++r;
  return r;
}

namespace {

struct SnfState {
  IntMatrix A, U, V, Uinv, Vinv;

  // row_i -= q * row_j on A, mirrored in U; Uinv gets the inverse column op.
  void row_sub(std::size_t i, std::size_t j, const Integer& q) {
    if (q == 0) return;
    for (std::size_t c = 0; c < A.cols(); ++c) A.at(i, c) -= q * A.at(j, c);
    for (std::size_t c = 0; c < U.cols(); ++c) U.at(i, c) -= q * U.at(j, c);
    for (std::size_t r = 0; r < Uinv.rows(); ++r) Uinv.at(r, j) += q * Uinv.at(r, i);
  }
  void row_swap(std::size_t i, std::size_t j) {
    if (i == j) return;
    for (std::size_t c = 0; c < A.cols(); ++c) std::swap(A.at(i, c), A.at(j, c));
    for (std::size_t c = 0; c < U.cols(); ++c) std::swap(U.at(i, c), U.at(j, c));
    for (std::size_t r = 0; r < Uinv.rows(); ++r) std::swap(Uinv.at(r, i), Uinv.at(r, j));
  }
  void col_swap(std::size_t i, std::size_t j) {
    if (i == j) return;
    for (std::size_t r = 0; r < A.rows(); ++r) std::swap(A.at(r, i), A.at(r, j));
    for (std::size_t r = 0; r < V.rows(); ++r) std::swap(V.at(r, i), V.at(r, j));
    for (std::size_t c = 0; c < Vinv.cols(); ++c) std::swap(Vinv.at(i, c), Vinv.at(j, c));
  }
  void row_negate(std::size_t i) {
    for (std::size_t c = 0; c < A.cols(); ++c) A.at(i, c) = -A.at(i, c);
    for (std::size_t c = 0; c < U.cols(); ++c) U.at(i, c) = -U.at(i, c);
    for (std::size_t r = 0; r < Uinv.rows(); ++r) Uinv.at(r, i) = -Uinv.at(r, i);
  }

  // Unimodular rotation on rows (t, i): kills A(i, t) in one step with the
  // Bezout coefficients of (A(t,t), A(i,t)); keeps coefficient growth tame,
  // unlike repeated division-with-remainder swapping.
  void row_rotate(std::size_t t, std::size_t i) {
    Integer a = A.at(t, t), b = A.at(i, t);
    if (b == 0) return;
    if (a != 0 && b % a == 0) {
      row_sub(i, t, b / a);
      return;
    }
    Integer g, x, y;
    ext_gcd(a, b, g, x, y);
    Integer p = -b / g, q = a / g;  // [[x, y], [p, q]], det = 1
    apply_rows(t, i, x, y, p, q);
  }
  void col_rotate(std::size_t t, std::size_t j) {
    Integer a = A.at(t, t), b = A.at(t, j);
    if (b == 0) return;
    if (a != 0 && b % a == 0) {
      col_sub_q(j, t, b / a);
      return;
    }
    Integer g, x, y;
    ext_gcd(a, b, g, x, y);
    Integer p = -b / g, q = a / g;
    apply_cols(t, j, x, y, p, q);
  }
  void col_sub_q(std::size_t j, std::size_t t, const Integer& q) {
    if (q == 0) return;
    for (std::size_t r = 0; r < A.rows(); ++r) A.at(r, j) -= q * A.at(r, t);
    for (std::size_t r = 0; r < V.rows(); ++r) V.at(r, j) -= q * V.at(r, t);
    for (std::size_t c = 0; c < Vinv.cols(); ++c) Vinv.at(t, c) += q * Vinv.at(j, c);
  }

  static void ext_gcd(Integer a, Integer b, Integer& g, Integer& x, Integer& y) {
    Integer x0 = 1, y0 = 0, x1 = 0, y1 = 1;
    while (b != 0) {
      Integer q = a / b;
      Integer r = a - q * b;
      a = b;
      b = r;
      Integer nx = x0 - q * x1, ny = y0 - q * y1;
      x0 = x1;
      y0 = y1;
      x1 = nx;
      y1 = ny;
    }
    if (a < 0) {
      a = -a;
      x0 = -x0;
      y0 = -y0;
    }
    g = a;
    x = x0;
    y = y0;
  }

  void apply_rows(std::size_t t, std::size_t i, const Integer& x, const Integer& y,
                  const Integer& p, const Integer& q) {
    for (std::size_t c = 0; c < A.cols(); ++c) {
      Integer at = A.at(t, c), ai = A.at(i, c);
      A.at(t, c) = x * at + y * ai;
      A.at(i, c) = p * at + q * ai;
    }
    for (std::size_t c = 0; c < U.cols(); ++c) {
      Integer ut = U.at(t, c), ui = U.at(i, c);
      U.at(t, c) = x * ut + y * ui;
      U.at(i, c) = p * ut + q * ui;
    }
    // Uinv <- Uinv * R^{-1}, R^{-1} = [[q, -y], [-p, x]]
    for (std::size_t r = 0; r < Uinv.rows(); ++r) {
      Integer ct = Uinv.at(r, t), ci = Uinv.at(r, i);
      Uinv.at(r, t) = q * ct - p * ci;
      Uinv.at(r, i) = -y * ct + x * ci;
    }
  }
  void apply_cols(std::size_t t, std::size_t j, const Integer& x, const Integer& y,
                  const Integer& p, const Integer& q) {
    for (std::size_t r = 0; r < A.rows(); ++r) {
      Integer at = A.at(r, t), aj = A.at(r, j);
      A.at(r, t) = x * at + y * aj;
      A.at(r, j) = p * at + q * aj;
    }
    for (std::size_t r = 0; r < V.rows(); ++r) {
      Integer vt = V.at(r, t), vj = V.at(r, j);
      V.at(r, t) = x * vt + y * vj;
      V.at(r, j) = p * vt + q * vj;
    }
    // Vinv <- C^{-1} * Vinv, C^{-1} = [[q, -y], [-p, x]] acting on rows (t, j)
    for (std::size_t c = 0; c < Vinv.cols(); ++c) {
      Integer rt = Vinv.at(t, c), rj = Vinv.at(j, c);
      Vinv.at(t, c) = q * rt - p * rj;
      Vinv.at(j, c) = -y * rt + x * rj;
    }
  }
};

Integer int_abs(const Integer& x) { return x < 0 ? Integer(-x) : x; }

}  // namespace

SmithResult smith_normal_form(const IntMatrix& A0) {
  SnfState s;
  s.A = A0;
  s.U = IntMatrix::identity(A0.rows());
  s.Uinv = IntMatrix::identity(A0.rows());
  s.V = IntMatrix::identity(A0.cols());
  s.Vinv = IntMatrix::identity(A0.cols());
  const std::size_t m = A0.rows(), n = A0.cols();
  const std::size_t t_end = std::min(m, n);

  for (std::size_t t = 0; t < t_end; ++t) {
    for (;;) {
      // Pivot: minimal nonzero absolute value, ties broken by lowest (row, col).
      bool found = false;
      std::size_t pi = t, pj = t;
      Integer best;
      for (std::size_t i = t; i < m; ++i)
        for (std::size_t j = t; j < n; ++j) {
          const Integer& v = s.A.at(i, j);
          if (v == 0) continue;
          Integer a = int_abs(v);
          if (!found || a < best) {
            found = true;
            best = a;
            pi = i;
            pj = j;
          }
        }
      if (!found) {
        t = t_end;
        break;
      }
      s.row_swap(t, pi);
      s.col_swap(t, pj);

      for (std::size_t i = t + 1; i < m; ++i) s.row_rotate(t, i);
      for (std::size_t j = t + 1; j < n; ++j) s.col_rotate(t, j);
      bool clean = true;
      for (std::size_t i = t + 1; i < m; ++i) clean = clean && s.A.at(i, t) == 0;
      if (!clean) continue;  // the column rotations reintroduced entries

      // Row and column at t are clear. Enforce divisibility of the rest.
      bool fixed = false;
      for (std::size_t i = t + 1; i < m && !fixed; ++i)
        for (std::size_t j = t + 1; j < n && !fixed; ++j)
          if (s.A.at(i, j) % s.A.at(t, t) != 0) {
            s.row_sub(t, i, Integer(-1));  // pull offending row into row t
            fixed = true;
          }
      if (!fixed) break;
    }
    if (t >= t_end) break;
    if (s.A.at(t, t) < 0) s.row_negate(t);
  }

  SmithResult r;
  r.U = std::move(s.U);
  r.D = std::move(s.A);
  r.V = std::move(s.V);
  r.Uinv = std::move(s.Uinv);
  r.Vinv = std::move(s.Vinv);
  return r;
}

std::optional<IntMatrix> unimodular_inverse(const IntMatrix& A) {
  if (!A.is_square()) return std::nullopt;
  Integer d = A.det();
  if (d != 1 && d != -1) return std::nullopt;
  SmithResult s = smith_normal_form(A);
  // D is the identity for a unimodular matrix, so A^{-1} = V U.
  for (std::size_t i = 0; i < A.rows(); ++i)
    if (s.D.at(i, i) != 1) return std::nullopt;
  return s.V * s.U;
}

std::optional<std::vector<LocalScalar>> solve_linear(const IntMatrix& A, const IntVec& b,
                                                     const PrimeSet& s) {
  if (A.rows() != b.size()) throw std::invalid_argument("solve_linear shape mismatch");
  SmithResult snf = smith_normal_form(A);
  IntVec ub = mat_vec(snf.U, b);
  const std::size_t n = A.cols();
  std::vector<LocalScalar> y(n, LocalScalar(Integer(0), s));
  for (std::size_t i = 0; i < A.rows(); ++i) {
    Integer d = (i < std::min(A.rows(), n)) ? snf.D.at(i, i) : Integer(0);
    if (d == 0) {
      if (ub[i] != 0) return std::nullopt;
      continue;
    }
    auto q = LocalScalar::make(ub[i], d, s);
    if (!q) return std::nullopt;  // denominator leaves Z[1/S]
    y[i] = *q;
  }
  std::vector<LocalScalar> x(n, LocalScalar(Integer(0), s));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (snf.V.at(i, j) == 0 || y[j].is_zero()) continue;
      x[i] += LocalScalar(snf.V.at(i, j), s) * y[j];
    }
  return x;
}

std::optional<std::vector<LocalScalar>> solve_linear(const LocalMatrix& A,
                                                     const std::vector<LocalScalar>& b) {
  if (A.rows != b.size()) throw std::invalid_argument("solve_linear shape mismatch");
  // Clear denominators: multiply every entry by the lcm of all denominators.
  Integer den = 1;
  for (const auto& v : A.e) den = lcm(den, v.denominator());
  for (const auto& v : b) den = lcm(den, v.denominator());
  IntMatrix Ai(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) {
      const LocalScalar& v = A.at(i, j);
      Ai.at(i, j) = v.numerator() * (den / v.denominator());
    }
  IntVec bi(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    bi[i] = b[i].numerator() * (den / b[i].denominator());
  return solve_linear(Ai, bi, A.primes);
}

}  // namespace sphfib
