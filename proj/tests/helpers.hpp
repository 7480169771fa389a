#pragma once

#include "sphfib/forms.hpp"
#include "sphfib/ring.hpp"
#include "sphfib/tensorlie.hpp"

#include <random>

namespace sphfib::testing {

// Deterministic bounded integer, independent of distribution internals.
inline long long rng_int(std::mt19937_64& rng, long long lo, long long hi) {
  return lo + static_cast<long long>(rng() % static_cast<unsigned long long>(hi - lo + 1));
}

// Random unimodular matrix: bounded-entry product of elementary matrices.
inline IntMatrix random_unimodular(std::size_t k, std::mt19937_64& rng, int steps = 12,
                                   long long entry_bound = 2) {
  IntMatrix m = IntMatrix::identity(k);
  for (int s = 0; s < steps; ++s) {
    std::size_t i = static_cast<std::size_t>(rng_int(rng, 0, static_cast<long long>(k) - 1));
    std::size_t j = static_cast<std::size_t>(rng_int(rng, 0, static_cast<long long>(k) - 1));
    if (i == j) continue;
    IntMatrix e = IntMatrix::identity(k);
    e.at(i, j) = rng_int(rng, -entry_bound, entry_bound);
    m = m * e;
    if (rng() % 4 == 0) {
      IntMatrix p = IntMatrix::identity(k);
      std::swap(p.at(i, i), p.at(i, j));
      std::swap(p.at(j, j), p.at(j, i));
      m = m * p;
    }
  }
  return m;
}

// Random unimodular symmetric form P^T D P from a seed diagonal.
inline IntMatrix random_unimodular_form(std::size_t k, std::mt19937_64& rng,
                                        bool force_odd = false) {
  IntMatrix d(k, k);
  for (std::size_t i = 0; i < k; ++i) d.at(i, i) = (rng() % 2 == 0) ? 1 : -1;
  if (!force_odd && k % 2 == 0 && rng() % 2 == 0) {
    // hyperbolic blocks
    for (std::size_t i = 0; i + 1 < k; i += 2) {
      d.at(i, i) = 0;
      d.at(i + 1, i + 1) = 0;
      d.at(i, i + 1) = 1;
      d.at(i + 1, i) = 1;
    }
  }
  IntMatrix p = random_unimodular(k, rng);
  return p.transpose() * d * p;
}

inline IntMatrix hyperbolic_sum(std::size_t blocks) {
  IntMatrix m(2 * blocks, 2 * blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    m.at(2 * b, 2 * b + 1) = 1;
    m.at(2 * b + 1, 2 * b) = 1;
  }
  return m;
}

// Random homogeneous tensor element of the given degree.
inline TensorElement random_homogeneous(const GradedBasis& b, const PrimeSet& s, int degree,
                                        std::mt19937_64& rng, int terms = 3) {
  TensorElement e(b, s);
  std::vector<Word> words = words_of_degree(b, degree);
  if (words.empty()) return e;
  for (int t = 0; t < terms; ++t) {
    const Word& w = words[static_cast<std::size_t>(rng() % words.size())];
    e.add_term(w, LocalScalar(Integer(rng_int(rng, -4, 4)), s));
  }
  return e;
}

}  // namespace sphfib::testing
