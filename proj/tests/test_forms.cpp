#include "doctest.h"

#include "helpers.hpp"
#include "sphfib/forms.hpp"

using namespace sphfib;
using sphfib::testing::random_unimodular_form;

TEST_CASE("primitive vectors with divisible square length, m = 3") {
  SUBCASE("identity rank 3 finds (1,1,1)") {
    PrimitiveVectorResult r = find_primitive_divisible(SymForm(IntMatrix::identity(3)), 3);
    CHECK(r.v == IntVec{Integer(1), Integer(1), Integer(1)});
    CHECK(r.path == PrimitiveSearchPath::mod_p_lift);
  }
  SUBCASE("isotropic vector in a form with a hyperbolic block") {
    IntMatrix m(3, 3);
    m.at(0, 1) = m.at(1, 0) = 1;
    m.at(2, 2) = 1;
    SymForm f(m);
    PrimitiveVectorResult r = find_primitive_divisible(f, 3);
    CHECK(f.q(r.v) % 3 == 0);
    CHECK(vec_gcd(r.v) == 1);
  }
  SUBCASE("rank guard") {
    CHECK_THROWS_AS(find_primitive_divisible(SymForm(IntMatrix::identity(2)), 3),
                    std::invalid_argument);
  }
}

TEST_CASE("primitive vectors with divisible square length, m = 8") {
  SUBCASE("identity rank 5") {
    SymForm f(IntMatrix::identity(5));
    PrimitiveVectorResult r = find_primitive_divisible(f, 8);
    CHECK(f.q(r.v) % 8 == 0);
    CHECK(vec_gcd(r.v) == 1);
    // a witness with tiny coordinates exists: (2,1,1,1,1)
    IntVec w{Integer(2), Integer(1), Integer(1), Integer(1), Integer(1)};
    CHECK(f.q(w) % 8 == 0);
  }
  SUBCASE("rank guard") {
    CHECK_THROWS_AS(find_primitive_divisible(SymForm(IntMatrix::identity(4)), 8),
                    std::invalid_argument);
  }
}

TEST_CASE("divisibility searches on random unimodular forms") {
  std::mt19937_64 rng(0xC0FFEE);
  for (int t = 0; t < 30; ++t) {
    for (std::size_t rank : {3u, 4u}) {
      SymForm f(random_unimodular_form(rank, rng));
      PrimitiveVectorResult r = find_primitive_divisible(f, 3);
      CHECK(f.q(r.v) % 3 == 0);
      CHECK(vec_gcd(r.v) == 1);
    }
    SymForm f5(random_unimodular_form(5, rng));
    PrimitiveVectorResult r8 = find_primitive_divisible(f5, 8);
    CHECK(f5.q(r8.v) % 8 == 0);
    CHECK(vec_gcd(r8.v) == 1);
    SymForm f6(random_unimodular_form(6, rng));
    PrimitiveVectorResult r24 = find_primitive_divisible(f6, 24);
    CHECK(f6.q(r24.v) % 24 == 0);
    CHECK(vec_gcd(r24.v) == 1);
  }
}

TEST_CASE("basis completion of a primitive vector") {
  SUBCASE("unit vector in rank 3") {
    BasisChange b = extend_to_basis(IntVec{Integer(1), Integer(0), Integer(0)});
    CHECK(b.matrix().at(0, 2) == 1);
    CHECK(b.matrix().at(1, 2) == 0);
    CHECK(b.matrix().at(2, 2) == 0);
  }
  SUBCASE("(2,3) completes with determinant +-1") {
    BasisChange b = extend_to_basis(IntVec{Integer(2), Integer(3)});
    CHECK(b.matrix().at(0, 1) == 2);
    CHECK(b.matrix().at(1, 1) == 3);
    Integer d = b.matrix().det();
    CHECK((d == 1 || d == -1));
  }
  SUBCASE("(1,1,1)") {
    BasisChange b = extend_to_basis(IntVec{Integer(1), Integer(1), Integer(1)});
    for (std::size_t i = 0; i < 3; ++i) CHECK(b.matrix().at(i, 2) == 1);
  }
  SUBCASE("non-primitive input is rejected") {
    CHECK_THROWS_AS(extend_to_basis(IntVec{Integer(2), Integer(4)}), std::invalid_argument);
  }
  SUBCASE("random primitive vectors") {
    std::mt19937_64 rng(0xBEEF);
    for (int t = 0; t < 100; ++t) {
      IntVec v(4);
      do {
        for (auto& x : v) x = testing::rng_int(rng, -9, 9);
      } while (vec_gcd(v) != 1);
      BasisChange b = extend_to_basis(v);
      for (std::size_t i = 0; i < 4; ++i) CHECK(b.matrix().at(i, 3) == v[i]);
    }
  }
}

TEST_CASE("congruence diagonalization mod p") {
  auto check_congruent = [](const SymForm& g, const Integer& p) {
    ModDiagResult r = diagonalize_mod_p(g, p);
    IntMatrix t = r.P.transpose() * g.matrix() * r.P;
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) {
        Integer v = t.at(i, j) % p;
        if (v < 0) v += p;
        if (i == j)
          CHECK(v == r.diag[i]);
        else
          CHECK(v == 0);
      }
    return r;
  };
  SUBCASE("identity stays identity") {
    ModDiagResult r = check_congruent(SymForm(IntMatrix::identity(3)), 3);
    CHECK(r.P == IntMatrix::identity(3));
    for (const auto& d : r.diag) CHECK(d == 1);
  }
  SUBCASE("hyperbolic mod 3 has two nonzero entries") {
    ModDiagResult r = check_congruent(SymForm(IntMatrix{{0, 1}, {1, 0}}), 3);
    CHECK(r.diag[0] != 0);
    CHECK(r.diag[1] != 0);
  }
  SUBCASE("[[2,1],[1,2]] mod 3 drops rank") {
    ModDiagResult r = check_congruent(SymForm(IntMatrix{{2, 1}, {1, 2}}), 3);
    int nonzero = 0;
    for (const auto& d : r.diag) nonzero += (d != 0);
    CHECK(nonzero == 1);
  }
  SUBCASE("random forms, p in {3, 5}") {
    std::mt19937_64 rng(0xD1A6);
    for (int t = 0; t < 40; ++t) {
      SymForm f(random_unimodular_form(4, rng));
      check_congruent(f, 3);
      check_congruent(f, 5);
    }
  }
}

TEST_CASE("characteristic basis vector") {
  SUBCASE("even forms have w = 0") {
    CharacteristicBasis r = characteristic_basis(SymForm(testing::hyperbolic_sum(2)));
    CHECK(r.even_form);
    for (const auto& x : r.characteristic) CHECK(x == 0);
  }
  SUBCASE("identity rank 2 gives w = (1,1)") {
    CharacteristicBasis r = characteristic_basis(SymForm(IntMatrix::identity(2)));
    CHECK(!r.even_form);
    CHECK(r.characteristic == IntVec{Integer(1), Integer(1)});
  }
  SUBCASE("diag(1,-1) gives w = (1,1)") {
    CharacteristicBasis r = characteristic_basis(SymForm(IntMatrix{{1, 0}, {0, -1}}));
    CHECK(r.characteristic == IntVec{Integer(1), Integer(1)});
  }
  SUBCASE("the defining congruence holds on random odd forms") {
    std::mt19937_64 rng(0xCAFE);
    for (int t = 0; t < 60; ++t) {
      std::size_t k = 2 + rng() % 4;
      SymForm f(random_unimodular_form(k, rng, /*force_odd=*/true));
      if (f.is_even()) continue;
      CharacteristicBasis r = characteristic_basis(f);
      REQUIRE(!r.even_form);
      // <x, w> = <x, x> mod 2 for all basis vectors x
      for (std::size_t i = 0; i < k; ++i) {
        IntVec e(k, Integer(0));
        e[i] = 1;
        CHECK((f.eval(e, r.characteristic) - f.q(e)) % 2 == 0);
      }
      // and in transformed coordinates the last column matches the diagonal
      SymForm tform = f.transformed(r.change.matrix());
      for (std::size_t i = 0; i < k; ++i)
        CHECK((tform.matrix().at(i, k - 1) - tform.matrix().at(i, i)) % 2 == 0);
    }
  }
}

TEST_CASE("basis changes are unimodular by construction") {
  CHECK_THROWS_AS(BasisChange(IntMatrix{{2, 0}, {0, 1}}), std::invalid_argument);
  BasisChange ok(IntMatrix{{1, 5}, {0, -1}});
  CHECK(ok.inverse().matrix() * ok.matrix() == IntMatrix::identity(2));
}
