#pragma once

#include "sphfib/ring.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace sphfib {

// Integer symmetric bilinear form <x,y> = x^T g y.
class SymForm {
 public:
  explicit SymForm(IntMatrix m);

  const IntMatrix& matrix() const { return m_; }
  std::size_t rank() const { return m_.rows(); }
  bool is_unimodular() const;
  bool is_even() const;  // all diagonal entries even

  Integer eval(const IntVec& x, const IntVec& y) const;
  Integer q(const IntVec& x) const { return eval(x, x); }

  // Covariant change of coordinates: g -> P^T g P.
  SymForm transformed(const IntMatrix& P) const;

 private:
  IntMatrix m_;
};

// Unimodular change of basis (det = +-1).
class BasisChange {
 public:
  explicit BasisChange(IntMatrix m);
  const IntMatrix& matrix() const { return m_; }
  BasisChange inverse() const;
  BasisChange transposed() const { return BasisChange(m_.transpose()); }

 private:
  IntMatrix m_;
};

// A bounded search ran out of room; the bound is part of the report.
class SearchExhausted : public std::runtime_error {
 public:
  SearchExhausted(const std::string& what, long long bound)
      : std::runtime_error(what), bound_(bound) {}
  long long bound() const { return bound_; }

 private:
  long long bound_;
};

enum class PrimitiveSearchPath { mod_p_lift, bounded_search };

struct PrimitiveVectorResult {
  IntVec v;
  PrimitiveSearchPath path;
};

struct PrimitiveSearchOptions {
  long long bound = 4;  // coordinate bound for the exhaustive fallback
};

// Primitive v != 0 with m | <v,v>. m = 3 needs rank >= 3, m = 8 needs
// rank >= 5; m = 24 combines both residue searches (used by the
// 8-dimensional pipeline). Primary path: diagonalize modulo the relevant
// prime power and lift; fallback: bounded exhaustive search. Throws
// SearchExhausted when both fail.
PrimitiveVectorResult find_primitive_divisible(const SymForm& g, int m,
                                               const PrimitiveSearchOptions& opt = {});

// Completes a primitive vector to a unimodular matrix whose last column is v.
BasisChange extend_to_basis(const IntVec& v);

// Congruence diagonalization over F_p, p an odd prime: P^T g P = diag mod p.
// P is invertible mod p with entries in {0..p-1}; it need not be unimodular.
struct ModDiagResult {
  IntMatrix P;
  std::vector<Integer> diag;  // entries in {0..p-1}
};
ModDiagResult diagonalize_mod_p(const SymForm& g, const Integer& p);

// Basis change T (unimodular) whose last basis vector w is characteristic:
// <x,w> = <x,x> mod 2 for all x. For an even form w = 0 is the characteristic
// vector; T is the identity and even_form is set.
struct CharacteristicBasis {
  BasisChange change;
  bool even_form = false;
  IntVec characteristic;  // the vector w (zero vector for even forms)
};
CharacteristicBasis characteristic_basis(const SymForm& g);

// Enumeration of integer vectors with |coords| <= bound in a fixed
// deterministic order (by max-abs shell, then lexicographic).
bool next_bounded_vector(IntVec& v, long long bound);

}  // namespace sphfib
