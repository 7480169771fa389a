#include "sphfib/tensorlie.hpp"

#include <algorithm>
#include <sstream>

namespace sphfib {

GradedBasis::GradedBasis(std::vector<std::string> names, std::vector<int> degrees)
    : names_(std::move(names)), degrees_(std::move(degrees)) {
  if (names_.size() != degrees_.size())
    throw std::invalid_argument("basis names/degrees size mismatch");
  for (int d : degrees_)
    if (d < 1) throw std::invalid_argument("generator degree must be >= 1");
  std::vector<std::string> sorted = names_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("duplicate generator name");
}

GradedBasis GradedBasis::uniform(std::size_t k, int degree, const std::string& prefix) {
  std::vector<std::string> names;
  std::vector<int> degs;
  for (std::size_t i = 0; i < k; ++i) {
    names.push_back(prefix + std::to_string(i + 1));
    degs.push_back(degree);
  }
  return GradedBasis(std::move(names), std::move(degs));
}

bool GradedBasis::single_degree() const {
  for (std::size_t i = 1; i < degrees_.size(); ++i)
    if (degrees_[i] != degrees_[0]) return false;
  return true;
}

TensorElement TensorElement::generator(const GradedBasis& b, std::size_t i,
                                       const PrimeSet& s) {
  TensorElement e(b, s);
  e.add_term({static_cast<int>(i)}, LocalScalar(Integer(1), s));
  return e;
}

TensorElement TensorElement::monomial(const GradedBasis& b, const Word& w,
                                      const LocalScalar& c, const PrimeSet& s) {
  TensorElement e(b, s);
  e.add_term(w, c);
  return e;
}

int TensorElement::word_degree(const Word& w) const {
  int d = 0;
  for (int i : w) d += basis_.degree(static_cast<std::size_t>(i));
  return d;
}

void TensorElement::add_term(const Word& w, const LocalScalar& c) {
  if (c.is_zero()) return;
  for (int i : w)
    if (i < 0 || static_cast<std::size_t>(i) >= basis_.size())
      throw std::invalid_argument("word index out of range");
  WordKey key{word_degree(w), w};
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(std::move(key), c);
  } else {
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

LocalScalar TensorElement::coeff(const Word& w) const {
  WordKey key{word_degree(w), w};
  auto it = terms_.find(key);
  return it == terms_.end() ? LocalScalar(Integer(0), primes_) : it->second;
}

bool TensorElement::is_homogeneous() const {
  if (terms_.empty()) return true;
  int d = terms_.begin()->first.degree;
  return terms_.rbegin()->first.degree == d;
}

int TensorElement::degree() const {
  if (terms_.empty()) throw std::logic_error("degree of zero element");
  if (!is_homogeneous()) throw std::logic_error("degree of non-homogeneous element");
  return terms_.begin()->first.degree;
}

void TensorElement::check_compatible(const TensorElement& o) const {
  if (basis_ != o.basis_) throw std::invalid_argument("mismatched ambient bases");
  if (primes_ != o.primes_) throw std::invalid_argument("mismatched prime sets");
}

TensorElement TensorElement::operator+(const TensorElement& o) const {
  check_compatible(o);
  TensorElement r = *this;
  for (const auto& [k, c] : o.terms_) r.add_term(k.w, c);
  return r;
}

TensorElement TensorElement::operator-() const {
  TensorElement r(basis_, primes_);
  for (const auto& [k, c] : terms_) r.terms_.emplace(k, -c);
  return r;
}

TensorElement TensorElement::operator-(const TensorElement& o) const {
  return *this + (-o);
}

TensorElement TensorElement::operator*(const TensorElement& o) const {
  check_compatible(o);
  TensorElement r(basis_, primes_);
  for (const auto& [ka, ca] : terms_)
    for (const auto& [kb, cb] : o.terms_) {
      Word w = ka.w;
      w.insert(w.end(), kb.w.begin(), kb.w.end());
      r.add_term(w, ca * cb);
    }
  return r;
}

TensorElement TensorElement::scaled(const LocalScalar& c) const {
  TensorElement r(basis_, primes_);
  if (c.is_zero()) return r;
  for (const auto& [k, v] : terms_) r.terms_.emplace(k, v * c);
  return r;
}

bool TensorElement::operator==(const TensorElement& o) const {
  return basis_ == o.basis_ && terms_ == o.terms_;
}

std::string TensorElement::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, c] : terms_) {
    os << (first ? "" : " + ") << "(" << c.str() << ")";
    if (k.w.empty()) {
      os << "*1";
    } else {
      for (int i : k.w) os << "*" << basis_.name(static_cast<std::size_t>(i));
    }
    first = false;
  }
  return os.str();
}

TensorElement bracket(const TensorElement& a, const TensorElement& b) {
  if (a.basis() != b.basis()) throw std::invalid_argument("mismatched ambient bases");
  TensorElement r(a.basis(), a.primes());
  for (const auto& [ka, ca] : a.terms())
    for (const auto& [kb, cb] : b.terms()) {
      LocalScalar c = ca * cb;
      Word uv = ka.w;
      uv.insert(uv.end(), kb.w.begin(), kb.w.end());
      r.add_term(uv, c);
      Word vu = kb.w;
      vu.insert(vu.end(), ka.w.begin(), ka.w.end());
      bool neg = (static_cast<long long>(ka.degree) * kb.degree) % 2 == 0;
      r.add_term(vu, neg ? -c : c);  // -(-1)^{|u||v|}
    }
  return r;
}

TensorElement square(const TensorElement& a) {
  if (a.is_zero()) return a;
  if (!a.is_homogeneous() || a.degree() % 2 == 0)
    throw std::invalid_argument("square requires a homogeneous element of odd degree");
  return a * a;
}

QuadraticRelation make_quadratic_relation(const IntMatrix& g, const GradedBasis& b,
                                          const PrimeSet& s) {
  if (!g.is_symmetric()) throw std::invalid_argument("form must be symmetric");
  if (g.rows() != b.size()) throw std::invalid_argument("form rank != basis size");
  TensorElement L(b, s);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      L.add_term({static_cast<int>(i), static_cast<int>(j)}, LocalScalar(g.at(i, j), s));
  return QuadraticRelation{std::move(L), g};
}

std::vector<TensorElement> construct_w(const IntMatrix& g, const GradedBasis& b,
                                       const PrimeSet& s) {
  if (!g.is_symmetric()) throw std::invalid_argument("form must be symmetric");
  const std::size_t k = b.size();
  if (g.rows() != k) throw std::invalid_argument("form rank != basis size");
  if (k < 2) throw std::invalid_argument("construct_w requires k >= 2");
  if (!b.single_degree() || b.degree(0) % 2 == 0)
    throw std::invalid_argument("basis must be concentrated in a single odd degree");
  if (!s.is_s_unit(g.det()))
    throw std::invalid_argument("form not invertible over the ambient ring");

  std::vector<TensorElement> w;
  const int last = static_cast<int>(k) - 1;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    TensorElement wi(b, s);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      if (g.at(i, j) == 0) continue;
      TensorElement br = bracket(TensorElement::generator(b, j, s),
                                 TensorElement::generator(b, k - 1, s));
      wi = wi + br.scaled(LocalScalar(g.at(i, j), s));
    }
    wi.add_term({last, last}, LocalScalar(g.at(i, k - 1), s));
    w.push_back(std::move(wi));
  }
  return w;
}

std::vector<Word> words_of_degree(const GradedBasis& b, int degree) {
  std::vector<Word> out;
  Word cur;
  // Depth-first in generator order; with a single-degree basis this agrees
  // with the WordKey order.
  auto rec = [&](auto&& self, int remaining) -> void {
    if (remaining == 0) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      int d = b.degree(i);
      if (d > remaining) continue;
      cur.push_back(static_cast<int>(i));
      self(self, remaining - d);
      cur.pop_back();
    }
  };
  rec(rec, degree);
  std::sort(out.begin(), out.end(), [&](const Word& x, const Word& y) {
    if (x.size() != y.size()) return x.size() < y.size();
    return x < y;
  });
  return out;
}

namespace {

// Columns spanning the degree-d part of the two-sided ideal (L):
// every m1 (x) L (x) m2 with deg m1 + deg L + deg m2 = d.
struct IdealSpan {
  std::vector<Word> words;                    // basis of the degree-d word space
  std::map<Word, std::size_t> index;          // word -> row
  std::vector<std::pair<Word, Word>> labels;  // columns as (m1, m2)
  IntMatrix mat;                              // rows = words, cols = labels
};

IdealSpan ideal_span(const QuadraticRelation& rel, int degree) {
  const TensorElement& L = rel.element;
  const GradedBasis& b = L.basis();
  IdealSpan span;
  span.words = words_of_degree(b, degree);
  for (std::size_t r = 0; r < span.words.size(); ++r) span.index[span.words[r]] = r;

  const int degL = L.degree();
  std::vector<std::vector<Integer>> cols;
  for (int dl = 0; dl + degL <= degree; ++dl) {
    int dr = degree - degL - dl;
    if (dr < 0) continue;
    for (const Word& m1 : words_of_degree(b, dl))
      for (const Word& m2 : words_of_degree(b, dr)) {
        std::vector<Integer> col(span.words.size(), Integer(0));
        for (const auto& [k, c] : L.terms()) {
          Word w = m1;
          w.insert(w.end(), k.w.begin(), k.w.end());
          w.insert(w.end(), m2.begin(), m2.end());
          // Relation coefficients are integral by construction.
          col[span.index.at(w)] += c.numerator();
        }
        span.labels.emplace_back(m1, m2);
        cols.push_back(std::move(col));
      }
  }
  span.mat = IntMatrix(span.words.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < span.words.size(); ++i) span.mat.at(i, j) = cols[j][i];
  return span;
}

}  // namespace

std::optional<IdealWitness> ideal_membership(const TensorElement& x,
                                             const QuadraticRelation& rel, int degree) {
  if (!x.is_homogeneous()) throw std::invalid_argument("ideal membership needs homogeneous input");
  if (!x.is_zero() && x.degree() != degree)
    throw std::invalid_argument("element degree does not match stated degree");

  IdealSpan span = ideal_span(rel, degree);
  LocalMatrix A;
  A.rows = span.words.size();
  A.cols = span.labels.size();
  A.primes = x.primes();
  A.e.assign(A.rows * A.cols, LocalScalar(Integer(0), x.primes()));
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j)
      A.at(i, j) = LocalScalar(span.mat.at(i, j), x.primes());
  std::vector<LocalScalar> rhs(span.words.size(), LocalScalar(Integer(0), x.primes()));
  for (const auto& [k, c] : x.terms()) rhs[span.index.at(k.w)] = c;

  auto sol = solve_linear(A, rhs);
  if (!sol) return std::nullopt;
  IdealWitness wit;
  for (std::size_t j = 0; j < span.labels.size(); ++j)
    if (!(*sol)[j].is_zero())
      wit.push_back({span.labels[j].first, span.labels[j].second, (*sol)[j]});
  return wit;
}

PowerSeries series_mul(const PowerSeries& a, const PowerSeries& b, int order) {
  PowerSeries r;
  r.coeffs.assign(static_cast<std::size_t>(order) + 1, Integer(0));
  for (int i = 0; i <= a.order() && i <= order; ++i) {
    if (a.coeffs[static_cast<std::size_t>(i)] == 0) continue;
    for (int j = 0; j <= b.order() && i + j <= order; ++j)
      r.coeffs[static_cast<std::size_t>(i + j)] +=
          a.coeffs[static_cast<std::size_t>(i)] * b.coeffs[static_cast<std::size_t>(j)];
  }
  return r;
}

PowerSeries series_inverse(const PowerSeries& a, int order) {
  if (a.coeffs.empty() || a.coeffs[0] != 1)
    throw std::invalid_argument("series inverse requires constant term 1");
  PowerSeries r;
  r.coeffs.assign(static_cast<std::size_t>(order) + 1, Integer(0));
  r.coeffs[0] = 1;
  for (int d = 1; d <= order; ++d) {
    Integer s = 0;
    for (int j = 1; j <= d && j <= a.order(); ++j)
      s += a.coeffs[static_cast<std::size_t>(j)] * r.coeffs[static_cast<std::size_t>(d - j)];
    r.coeffs[static_cast<std::size_t>(d)] = -s;
  }
  return r;
}

PowerSeries series_binom(int d, int sign, const Integer& e, int order) {
  // (1 + sign t^d)^e = sum_j C(e, j) sign^j t^{dj}, exact for any integer e.
  PowerSeries r;
  r.coeffs.assign(static_cast<std::size_t>(order) + 1, Integer(0));
  r.coeffs[0] = 1;
  Integer binom = 1;
  for (int j = 1; d * j <= order; ++j) {
    binom = binom * (e - (j - 1)) / j;
    Integer c = binom;
    if (sign < 0 && j % 2 == 1) c = -c;
    r.coeffs[static_cast<std::size_t>(d * j)] = c;
  }
  return r;
}

PowerSeries quadratic_hilbert(int k, int n, int order, HilbertMode mode) {
  if (k < 1) throw std::invalid_argument("k >= 1 required");
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("n must be even and >= 2");
  if (order < 0) throw std::invalid_argument("order >= 0 required");
  PowerSeries den;
  den.coeffs.assign(static_cast<std::size_t>(std::max(order, 3 * (n - 1))) + 1, Integer(0));
  den.coeffs[0] = 1;
  auto bump = [&](int d, long long c) {
    if (d < static_cast<int>(den.coeffs.size())) den.coeffs[static_cast<std::size_t>(d)] += c;
  };
  if (mode == HilbertMode::quotient_algebra) {
    bump(n - 1, -k);
    bump(2 * n - 2, 1);
  } else {
    bump(n - 1, -(k - 1));
    bump(2 * n - 2, -(k - 1));
    bump(3 * n - 3, 1);
  }
  return series_inverse(den, order);
}

std::optional<std::vector<Integer>> lie_ranks_from_series(const PowerSeries& series,
                                                          int order) {
  if (series.coeffs.empty() || series.coeffs[0] != 1)
    throw std::invalid_argument("series must have constant term 1");
  PowerSeries r = series;
  r.coeffs.resize(static_cast<std::size_t>(order) + 1, Integer(0));
  std::vector<Integer> ranks(static_cast<std::size_t>(order) + 1, Integer(0));
  for (int d = 1; d <= order; ++d) {
    Integer ld = r.coeffs[static_cast<std::size_t>(d)];
    if (ld < 0) return std::nullopt;
    ranks[static_cast<std::size_t>(d)] = ld;
    if (ld == 0) continue;
    r = (d % 2 == 1) ? series_mul(r, series_binom(d, 1, -ld, order), order)
                     : series_mul(r, series_binom(d, -1, ld, order), order);
  }
  return ranks;
}

FactorizationReport verify_factorization(int k, int n, int order) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("n must be even and >= 2");
  FactorizationReport rep;
  const int m = n - 1;
  // Exact polynomial check, no truncation: degree 3m on both sides.
  std::vector<Integer> lhs(static_cast<std::size_t>(3 * m) + 1, Integer(0));
  // (1 + t^m)(1 - k t^m + t^{2m})
  lhs[0] = 1;
  lhs[static_cast<std::size_t>(m)] += -k;
  lhs[static_cast<std::size_t>(2 * m)] += 1;
  lhs[static_cast<std::size_t>(m)] += 1;
  lhs[static_cast<std::size_t>(2 * m)] += -k;
  lhs[static_cast<std::size_t>(3 * m)] += 1;
  std::vector<Integer> rhs(static_cast<std::size_t>(3 * m) + 1, Integer(0));
  rhs[0] = 1;
  rhs[static_cast<std::size_t>(m)] = -(k - 1);
  rhs[static_cast<std::size_t>(2 * m)] = -(k - 1);
  rhs[static_cast<std::size_t>(3 * m)] = 1;
  rep.polynomial_identity_ok = (lhs == rhs);

  auto l = lie_ranks_from_series(quadratic_hilbert(k, n, order, HilbertMode::quotient_algebra),
                                 order);
  auto f = lie_ranks_from_series(quadratic_hilbert(k, n, order, HilbertMode::connected_sum),
                                 order);
  if (!l || !f) {
    rep.rank_relation_ok = false;
    return rep;
  }
  rep.l_ranks = *l;
  rep.f_ranks = *f;
  rep.rank_relation_ok = true;
  for (int d = 1; d <= order; ++d) {
    Integer expect = rep.l_ranks[static_cast<std::size_t>(d)] - (d == m ? 1 : 0);
    if (rep.f_ranks[static_cast<std::size_t>(d)] != expect) rep.rank_relation_ok = false;
  }
  return rep;
}

Integer rank_oracle(const QuadraticRelation& rel, int degree, const RankOracleOptions& opt) {
  const GradedBasis& b = rel.element.basis();
  if (b.size() > opt.max_generators)
    throw std::invalid_argument("rank_oracle: too many generators");
  if (b.single_degree() && degree > opt.max_degree_multiplier * b.degree(0))
    throw std::invalid_argument("rank_oracle: degree over bound");
  if (degree == 0) return 1;
  IdealSpan span = ideal_span(rel, degree);
  std::size_t rank = smith_normal_form(span.mat).rank();
  return Integer(span.words.size()) - Integer(rank);
}

}  // namespace sphfib
