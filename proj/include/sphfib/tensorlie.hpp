#pragma once

#include "sphfib/ring.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sphfib {

// Graded generating set: distinct names, degrees >= 1.
class GradedBasis {
 public:
  GradedBasis() = default;
  GradedBasis(std::vector<std::string> names, std::vector<int> degrees);
  // k generators "prefix1".."prefixk", all in one degree.
  static GradedBasis uniform(std::size_t k, int degree, const std::string& prefix = "v");

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  int degree(std::size_t i) const { return degrees_[i]; }
  bool single_degree() const;

  bool operator==(const GradedBasis& o) const {
    return names_ == o.names_ && degrees_ == o.degrees_;
  }
  bool operator!=(const GradedBasis& o) const { return !(*this == o); }

 private:
  std::vector<std::string> names_;
  std::vector<int> degrees_;
};

using Word = std::vector<int>;  // generator indices; empty word = 1

// Key ordered by degree, then length, then lexicographic generator index;
// this is the iteration and serialization order everywhere.
struct WordKey {
  int degree = 0;
  Word w;
  bool operator<(const WordKey& o) const {
    if (degree != o.degree) return degree < o.degree;
    if (w.size() != o.w.size()) return w.size() < o.w.size();
    return w < o.w;
  }
  bool operator==(const WordKey& o) const { return degree == o.degree && w == o.w; }
};

// Graded noncommutative polynomial in the basis generators over Z[1/S].
class TensorElement {
 public:
  TensorElement() = default;
  TensorElement(GradedBasis basis, PrimeSet primes)
      : basis_(std::move(basis)), primes_(std::move(primes)) {}

  static TensorElement generator(const GradedBasis& b, std::size_t i, const PrimeSet& s);
  static TensorElement monomial(const GradedBasis& b, const Word& w, const LocalScalar& c,
                                const PrimeSet& s);

  const GradedBasis& basis() const { return basis_; }
  const PrimeSet& primes() const { return primes_; }
  const std::map<WordKey, LocalScalar>& terms() const { return terms_; }

  bool is_zero() const { return terms_.empty(); }
  bool is_homogeneous() const;
  // Degree of a homogeneous nonzero element.
  int degree() const;
  int word_degree(const Word& w) const;

  void add_term(const Word& w, const LocalScalar& c);
  LocalScalar coeff(const Word& w) const;

  TensorElement operator+(const TensorElement& o) const;
  TensorElement operator-(const TensorElement& o) const;
  TensorElement operator-() const;
  TensorElement operator*(const TensorElement& o) const;  // concatenation product
  TensorElement scaled(const LocalScalar& c) const;

  bool operator==(const TensorElement& o) const;
  bool operator!=(const TensorElement& o) const { return !(*this == o); }

  std::string str() const;

 private:
  GradedBasis basis_;
  PrimeSet primes_;
  std::map<WordKey, LocalScalar> terms_;
  void check_compatible(const TensorElement& o) const;
};

// [v,w] = v (x) w - (-1)^{|v||w|} w (x) v, extended bilinearly over
// homogeneous components.
TensorElement bracket(const TensorElement& a, const TensorElement& b);

// a (x) a for homogeneous a of odd degree. Satisfies (x+y)^2 = x^2+y^2+[x,y].
TensorElement square(const TensorElement& a);

// The symmetric 2-tensor sum g_{i,j} v_i (x) v_j together with the form g.
struct QuadraticRelation {
  TensorElement element;
  IntMatrix form;
};

QuadraticRelation make_quadratic_relation(const IntMatrix& g, const GradedBasis& b,
                                          const PrimeSet& s);

// w_i = sum_{j<k} g_{i,j} [v_j, v_k] + g_{i,k} v_k (x) v_k for i = 1..k-1.
// Requires: basis in a single odd degree, g symmetric with det a unit, k >= 2.
// The outputs satisfy sum_i [v_i, w_i] = [L, v_k] exactly as tensors.
std::vector<TensorElement> construct_w(const IntMatrix& g, const GradedBasis& b,
                                       const PrimeSet& s);

struct IdealWitnessTerm {
  Word left, right;
  LocalScalar coeff;
};
using IdealWitness = std::vector<IdealWitnessTerm>;

// Membership of homogeneous x in the two-sided ideal (L) in its degree:
// x = sum c_i m_i (x) L (x) m'_i, decided by an exact linear solve.
std::optional<IdealWitness> ideal_membership(const TensorElement& x,
                                             const QuadraticRelation& rel, int degree);

// Truncated integer coefficient list; coefficient 0 of any algebra series is 1.
struct PowerSeries {
  std::vector<Integer> coeffs;  // index = degree, size = order + 1
  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  const Integer& at(int d) const { return coeffs[static_cast<std::size_t>(d)]; }
  bool operator==(const PowerSeries& o) const { return coeffs == o.coeffs; }
};

PowerSeries series_mul(const PowerSeries& a, const PowerSeries& b, int order);
// Inverse of a series with constant term 1.
PowerSeries series_inverse(const PowerSeries& a, int order);
// (1 + sign * t^d)^e truncated, e possibly negative.
PowerSeries series_binom(int d, int sign, const Integer& e, int order);

enum class HilbertMode { quotient_algebra, connected_sum };

// quotient_algebra: 1 / (1 - k t^{n-1} + t^{2n-2})
// connected_sum:    1 / (1 - (k-1) t^{n-1} - (k-1) t^{2n-2} + t^{3n-3})
PowerSeries quadratic_hilbert(int k, int n, int order, HilbertMode mode);

// Recover l_d from prod_{d odd}(1+t^d)^{l_d} / prod_{d even}(1-t^d)^{l_d} = series,
// degree by degree. Absent when some l_d would need to be negative.
std::optional<std::vector<Integer>> lie_ranks_from_series(const PowerSeries& series,
                                                          int order);

struct FactorizationReport {
  bool polynomial_identity_ok = false;
  bool rank_relation_ok = false;
  std::vector<Integer> l_ranks, f_ranks;
  bool ok() const { return polynomial_identity_ok && rank_relation_ok; }
};

// Checks (1+t^{n-1})(1 - k t^{n-1} + t^{2n-2}) = 1-(k-1)t^{n-1}-(k-1)t^{2n-2}+t^{3n-3}
// exactly, and that the recovered ranks satisfy f_d = l_d - [d = n-1] up to order.
FactorizationReport verify_factorization(int k, int n, int order);

// Brute-force rank of degree-d component of T(V)/(L), by listing the words of
// degree d and quotienting the ideal span through the Smith normal form.
struct RankOracleOptions {
  int max_degree_multiplier = 4;  // bound: 4 * (generator degree)
  std::size_t max_generators = 8;
};
Integer rank_oracle(const QuadraticRelation& rel, int degree,
                    const RankOracleOptions& opt = {});

// All words of the given total degree (deterministic order).
std::vector<Word> words_of_degree(const GradedBasis& b, int degree);

}  // namespace sphfib
