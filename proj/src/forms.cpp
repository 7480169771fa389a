#include "sphfib/forms.hpp"

#include <algorithm>

namespace sphfib {

SymForm::SymForm(IntMatrix m) : m_(std::move(m)) {
  if (!m_.is_symmetric()) throw std::invalid_argument("form matrix must be symmetric");
}

bool SymForm::is_unimodular() const {
  Integer d = m_.det();
  return d == 1 || d == -1;
}

bool SymForm::is_even() const {
  for (std::size_t i = 0; i < m_.rows(); ++i)
    if (m_.at(i, i) % 2 != 0) return false;
  return true;
}

Integer SymForm::eval(const IntVec& x, const IntVec& y) const {
  if (x.size() != m_.rows() || y.size() != m_.rows())
    throw std::invalid_argument("form evaluation shape mismatch");
  Integer s = 0;
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    if (x[i] == 0) continue;
    for (std::size_t j = 0; j < m_.cols(); ++j) s += x[i] * m_.at(i, j) * y[j];
  }
  return s;
}

SymForm SymForm::transformed(const IntMatrix& P) const {
  return SymForm(P.transpose() * m_ * P);
}

BasisChange::BasisChange(IntMatrix m) : m_(std::move(m)) {
  Integer d = m_.det();
  if (d != 1 && d != -1) throw std::invalid_argument("basis change must be unimodular");
}

BasisChange BasisChange::inverse() const { return BasisChange(*unimodular_inverse(m_)); }

namespace {

Integer mod_reduce(Integer x, const Integer& p) {
  x %= p;
  if (x < 0) x += p;
  return x;
}

Integer mod_inverse(const Integer& a, const Integer& p) {
  // p prime, a != 0 mod p; extended Euclid.
  Integer t = 0, newt = 1, r = p, newr = mod_reduce(a, p);
  while (newr != 0) {
    Integer q = r / newr;
    Integer tmp = t - q * newt;
    t = newt;
    newt = tmp;
    tmp = r - q * newr;
    r = newr;
    newr = tmp;
  }
  if (r != 1) throw std::logic_error("mod_inverse of non-unit");
  return mod_reduce(t, p);
}

// Representative of x mod m in (-m/2, m/2].
Integer centered(Integer x, long long m) {
  Integer mm = m;
  x = mod_reduce(x, mm);
  if (2 * x > mm) x -= mm;
  return x;
}

bool is_primitive(const IntVec& v) { return vec_gcd(v) == 1; }

// After finding a residue solution, lift to a primitive integer vector.
// Shifting any coordinate by the modulus leaves q(v) mod m unchanged
// (m | 2m and m | m^2 terms), so a few shifts repair the gcd.
std::optional<IntVec> primitive_lift(IntVec v, long long m, const SymForm& g, int target) {
  for (auto& c : v) c = centered(c, m);
  if (is_primitive(v)) return v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int t = 1; t <= 4; ++t) {
      IntVec w = v;
      w[i] += Integer(m) * t;
      if (is_primitive(w) && g.q(w) % target == 0) return w;
    }
  }
  return std::nullopt;
}

// Nonzero y over F_3 with sum d_i y_i^2 = 0, given diagonal entries d_i in {0,1,2}.
std::optional<IntVec> f3_isotropic(const std::vector<Integer>& d) {
  const std::size_t k = d.size();
  IntVec y(k, Integer(0));
  for (std::size_t i = 0; i < k; ++i)
    if (d[i] == 0) {
      y[i] = 1;
      return y;
    }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (d[i] != d[j]) {  // 1 + 2 = 0 mod 3
        y[i] = 1;
        y[j] = 1;
        return y;
      }
  if (k >= 3) {  // all equal: d(1+1+1) = 0 mod 3
    y[0] = y[1] = y[2] = 1;
    return y;
  }
  return std::nullopt;
}

std::optional<IntVec> mod3_path(const SymForm& g) {
  ModDiagResult dg = diagonalize_mod_p(g, 3);
  auto y = f3_isotropic(dg.diag);
  if (!y) return std::nullopt;
  IntVec x = mat_vec(dg.P, *y);
  return primitive_lift(std::move(x), 3, g, 3);
}

std::optional<IntVec> mod8_path(const SymForm& g) {
  const std::size_t k = g.rank();
  const std::size_t support = std::min<std::size_t>(k, 6);
  // q mod 8 with small integers for speed.
  std::vector<long long> gm(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      gm[i * k + j] = mod_reduce(g.matrix().at(i, j), 8).convert_to<long long>();
  std::vector<long long> y(support, 0);
  for (;;) {
    // advance odometer
    std::size_t pos = 0;
    while (pos < support && ++y[pos] == 8) y[pos++] = 0;
    if (pos == support) break;
    bool has_odd = false;
    for (long long c : y) has_odd |= (c % 2 == 1);
    if (!has_odd) continue;
    long long q = 0;
    for (std::size_t i = 0; i < support; ++i) {
      if (y[i] == 0) continue;
      for (std::size_t j = 0; j < support; ++j) q += y[i] * gm[i * k + j] * y[j];
    }
    if (q % 8 != 0) continue;
    IntVec v(k, Integer(0));
    for (std::size_t i = 0; i < support; ++i) v[i] = y[i];
    if (auto lifted = primitive_lift(std::move(v), 8, g, 8)) return lifted;
  }
  return std::nullopt;
}

std::optional<IntVec> mod24_path(const SymForm& g) {
  auto v3 = mod3_path(g);
  auto v8 = mod8_path(g);
  if (!v3 || !v8) return std::nullopt;
  const std::size_t k = g.rank();
  IntVec v(k);
  for (std::size_t i = 0; i < k; ++i) {
    // CRT: v = v3 mod 3, v = v8 mod 8.
    Integer a3 = mod_reduce((*v3)[i], 3), a8 = mod_reduce((*v8)[i], 8);
    Integer x = a8;
    while (mod_reduce(x, 3) != a3) x += 8;
    v[i] = x;
  }
  return primitive_lift(std::move(v), 24, g, 24);
}

}  // namespace

bool next_bounded_vector(IntVec& v, long long bound) {
  // Odometer over {-bound..bound}^k, skipping nothing; caller filters.
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < bound) {
      v[i] += 1;
      return true;
    }
    v[i] = -bound;
  }
  return false;
}

PrimitiveVectorResult find_primitive_divisible(const SymForm& g, int m,
                                               const PrimitiveSearchOptions& opt) {
  if (m != 3 && m != 8 && m != 24) throw std::invalid_argument("m must be 3, 8 or 24");
  const std::size_t k = g.rank();
  if ((m == 3 && k < 3) || (m == 8 && k < 5) || (m == 24 && k < 5))
    throw std::invalid_argument("form rank below threshold for divisibility search");

  std::optional<IntVec> v;
  if (m == 3) v = mod3_path(g);
  else if (m == 8) v = mod8_path(g);
  else v = mod24_path(g);
  if (v) {
    if (g.q(*v) % m != 0 || !is_primitive(*v))
      throw std::logic_error("residue lift produced an invalid vector");
    return {std::move(*v), PrimitiveSearchPath::mod_p_lift};
  }

  IntVec x(k, Integer(-opt.bound));
  do {
    bool zero = std::all_of(x.begin(), x.end(), [](const Integer& c) { return c == 0; });
    if (zero || !is_primitive(x)) continue;
    if (g.q(x) % m == 0) return {x, PrimitiveSearchPath::bounded_search};
  } while (next_bounded_vector(x, opt.bound));
  throw SearchExhausted("no primitive vector with " + std::to_string(m) +
                            " | <v,v> within coordinate bound " + std::to_string(opt.bound),
                        opt.bound);
}

BasisChange extend_to_basis(const IntVec& v) {
  if (v.empty()) throw std::invalid_argument("empty vector");
  if (vec_gcd(v) != 1) throw std::invalid_argument("vector is not primitive");
  const std::size_t k = v.size();
  IntMatrix col(k, 1);
  for (std::size_t i = 0; i < k; ++i) col.at(i, 0) = v[i];
  SmithResult s = smith_normal_form(col);
  // U v V = e1 with V = [s1], s1 = +-1, so the first column of Uinv is s1 * v.
  IntMatrix B = s.Uinv;
  Integer s1 = s.V.at(0, 0);
  if (s1 == -1)
    for (std::size_t i = 0; i < k; ++i) B.at(i, 0) = -B.at(i, 0);
  // Rotate columns so v lands last.
  IntMatrix C(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 1; j < k; ++j) C.at(i, j - 1) = B.at(i, j);
    C.at(i, k - 1) = B.at(i, 0);
  }
  return BasisChange(std::move(C));
}

ModDiagResult diagonalize_mod_p(const SymForm& g, const Integer& p) {
  if (p < 3 || p % 2 == 0 || !is_prime(p))
    throw std::invalid_argument("diagonalization prime must be odd");
  const std::size_t n = g.rank();
  IntMatrix A = g.matrix();
  IntMatrix P = IntMatrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) A.at(i, j) = mod_reduce(A.at(i, j), p);

  auto col_add = [&](std::size_t dst, std::size_t src, const Integer& f) {
    // column_dst += f * column_src, and symmetrically on rows; track P columns.
    for (std::size_t r = 0; r < n; ++r)
      A.at(r, dst) = mod_reduce(A.at(r, dst) + f * A.at(r, src), p);
    for (std::size_t c = 0; c < n; ++c)
      A.at(dst, c) = mod_reduce(A.at(dst, c) + f * A.at(src, c), p);
    for (std::size_t r = 0; r < n; ++r)
      P.at(r, dst) = mod_reduce(P.at(r, dst) + f * P.at(r, src), p);
  };
  auto col_swap = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    for (std::size_t r = 0; r < n; ++r) std::swap(A.at(r, a), A.at(r, b));
    for (std::size_t c = 0; c < n; ++c) std::swap(A.at(a, c), A.at(b, c));
    for (std::size_t r = 0; r < n; ++r) std::swap(P.at(r, a), P.at(r, b));
  };

  for (std::size_t t = 0; t < n; ++t) {
    if (A.at(t, t) == 0) {
      std::size_t s = t + 1;
      while (s < n && A.at(s, s) == 0) ++s;
      if (s < n) {
        col_swap(t, s);
      } else {
        // all remaining diagonal zero; find off-diagonal entry
        bool found = false;
        for (std::size_t i = t; i < n && !found; ++i)
          for (std::size_t j = i + 1; j < n && !found; ++j)
            if (A.at(i, j) != 0) {
              col_add(i, j, 1);  // makes A(i,i) = 2 A(i,j) != 0 (p odd)
              col_swap(t, i);
              found = true;
            }
        if (!found) break;  // rest is zero
      }
    }
    Integer inv = mod_inverse(A.at(t, t), p);
    for (std::size_t i = t + 1; i < n; ++i) {
      if (A.at(t, i) == 0) continue;
      col_add(i, t, mod_reduce(-A.at(t, i) * inv, p));
    }
  }
  ModDiagResult r;
  r.P = std::move(P);
  r.diag.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.diag[i] = A.at(i, i);
  return r;
}

CharacteristicBasis characteristic_basis(const SymForm& g) {
  if (!g.is_unimodular()) throw std::invalid_argument("characteristic basis needs a unimodular form");
  const std::size_t n = g.rank();
  // Solve g w = diag(g) mod 2 by elimination over F_2.
  std::vector<std::vector<int>> a(n, std::vector<int>(n + 1, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = static_cast<int>(mod_reduce(g.matrix().at(i, j), 2).convert_to<int>());
    a[i][n] = static_cast<int>(mod_reduce(g.matrix().at(i, i), 2).convert_to<int>());
  }
  std::size_t row = 0;
  std::vector<std::size_t> pivot_col;
  for (std::size_t c = 0; c < n && row < n; ++c) {
    std::size_t p = row;
    while (p < n && a[p][c] == 0) ++p;
    if (p == n) continue;
    std::swap(a[p], a[row]);
    for (std::size_t i = 0; i < n; ++i)
      if (i != row && a[i][c])
        for (std::size_t j = 0; j <= n; ++j) a[i][j] ^= a[row][j];
    pivot_col.push_back(c);
    ++row;
  }
  IntVec w(n, Integer(0));
  for (std::size_t r = 0; r < pivot_col.size(); ++r) w[pivot_col[r]] = a[r][n];

  CharacteristicBasis out{BasisChange(IntMatrix::identity(n)), false, w};
  bool zero = std::all_of(w.begin(), w.end(), [](const Integer& c) { return c == 0; });
  if (zero) {
    out.even_form = true;  // <x,x> even for all x; w = 0 works
    return out;
  }
  out.change = extend_to_basis(w);
  // Sanity: in the new coordinates, column k of the form is congruent to the
  // diagonal mod 2.
  SymForm t = g.transformed(out.change.matrix());
  for (std::size_t i = 0; i < n; ++i)
    if ((t.matrix().at(i, n - 1) - t.matrix().at(i, i)) % 2 != 0)
      throw std::logic_error("characteristic basis construction failed");
  return out;
}

}  // namespace sphfib
