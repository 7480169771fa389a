#pragma once

#include "sphfib/kv.hpp"
#include "sphfib/ring.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sphfib {

// Finitely generated abelian group with named generators; order 0 means an
// infinite cyclic factor.
struct AbGroup {
  std::vector<std::string> gens;
  std::vector<Integer> orders;
  std::size_t size() const { return gens.size(); }
  std::size_t index_of(const std::string& g) const;
};

// One named generator c of pi_{2n-1}(S^n): order, Hopf invariant, and the
// suspension E^{n-1} c written in the generators of pi_{3n-2}(S^{2n-1}).
struct SourceClass {
  std::string name;
  Integer order;  // 0 = infinite
  Integer hopf;
  IntVec suspension;
};

// Everything normalize() needs for one regime, loaded from a versioned
// table file. Entries cite the classical computations they come from.
class SphereTable {
 public:
  int n = 0;
  std::string regime;
  std::vector<SourceClass> src;  // generators of pi_{2n-1} S^n
  AbGroup top;                   // pi_{3n-2} S^n
  AbGroup mid;                   // pi_{3n-2} S^{2n-1}
  IntVec whitehead_square;       // [i,i] in src coordinates
  // [c, iota] in top coordinates, per source class name. For the n = 8
  // regime these entries carry an unresolved sign; sign_variant picks one.
  std::map<std::string, IntVec> bracket_iota;
  IntVec triple_whitehead;  // [[i,i],i] in top coordinates
  // c composed with a mid generator, in top coordinates; key "c|gamma".
  std::map<std::string, IntVec> compose;
  int sign_variant = +1;
  bool has_sign_variants = false;

  std::size_t src_index(const std::string& name) const;
  const SourceClass& src_class(const std::string& name) const;
  const IntVec& compose_coords(const std::string& c, const std::string& gamma) const;

  static SphereTable from_kv(const KvFile& f, int sign_variant = +1);
  static SphereTable load(const std::string& path, int sign_variant = +1);
};

// Formal homotopy-element expression over a wedge of k n-spheres.
class WhiteheadExpr {
 public:
  enum class Kind { zero, alpha, named, sum, scale, bracket, compose };

  static WhiteheadExpr zero();
  static WhiteheadExpr alpha(int i);
  // Named class c (a src generator) on sphere i, i.e. alpha_i o c.
  static WhiteheadExpr named(std::string cls, int i);
  static WhiteheadExpr sum(std::vector<WhiteheadExpr> parts);
  static WhiteheadExpr scale(LocalScalar c, WhiteheadExpr e);
  static WhiteheadExpr scale(long long c, WhiteheadExpr e);
  static WhiteheadExpr bracket(WhiteheadExpr a, WhiteheadExpr b);
  // e composed with the mid-sphere class with the given coordinates.
  static WhiteheadExpr compose(WhiteheadExpr e, IntVec mid_coords);
  static WhiteheadExpr compose_named(WhiteheadExpr e, const SphereTable& t,
                                     const std::string& gamma);
  // e composed with the suspension E^{n-1} c of a source class.
  static WhiteheadExpr compose_suspended(WhiteheadExpr e, const SphereTable& t,
                                         const std::string& src_class);

  WhiteheadExpr operator+(const WhiteheadExpr& o) const;

  Kind kind = Kind::zero;
  int sphere = -1;
  std::string cls;
  LocalScalar coeff;
  IntVec mid_coords;
  std::vector<WhiteheadExpr> children;

  std::string str() const;
};

// Hilton-basis slot layout for degree 2n-1 or 3n-2 over k wedge summands.
struct HiltonBasis {
  enum class SlotType { sphere_src, pair, sphere_top, pair_mid, hall3 };
  struct Slot {
    SlotType type;
    int i = -1, j = -1, l = -1;  // sphere indices; hall word is [[a_i,a_j],a_l]
    std::string gen;             // generator name for group-valued slots
    Integer order;               // reduced modulo the inverted primes; 0 = free
  };
  int degree_kind = 0;  // 1 = 2n-1, 2 = 3n-2
  int k = 0;
  std::vector<Slot> slots;
  std::map<std::string, std::size_t> index;

  static std::shared_ptr<const HiltonBasis> make(const SphereTable& t, int k,
                                                 int degree_kind, const PrimeSet& s);
  static std::string slot_key(const Slot& s);
  std::size_t slot(SlotType type, int i, int j, int l, const std::string& gen) const;
};

// Exact coordinates in a Hilton basis; finite-cyclic slots hold canonical
// residues in [0, order).
struct HiltonVector {
  std::shared_ptr<const HiltonBasis> basis;
  std::vector<LocalScalar> coords;

  bool is_zero() const;
  bool operator==(const HiltonVector& o) const;
  HiltonVector operator+(const HiltonVector& o) const;
  HiltonVector operator-(const HiltonVector& o) const;
  std::string str() const;
};

class NormalizeError : public std::runtime_error {
 public:
  explicit NormalizeError(const std::string& w) : std::runtime_error(w) {}
};

// Rewrites e to its Hilton normal form: bilinearity, Jacobi straightening to
// the Hall-word slots, composition distributivity over suspensions, the
// table's mixed-bracket and composition rules, then residue reduction.
// Throws NormalizeError ("no applicable rule ...") when the table does not
// cover a subterm.
HiltonVector normalize(const WhiteheadExpr& e, const SphereTable& t, int k,
                       const PrimeSet& s);

// Same result under a randomized small-step reduction order (for confluence
// checks).
HiltonVector normalize_randomized(const WhiteheadExpr& e, const SphereTable& t, int k,
                                  const PrimeSet& s, std::mt19937_64& rng);

// Span of normalize([L, alpha_i]) for all i and normalize(L o gamma) for the
// mid generators, together with the finite-order relations; membership is an
// exact linear-algebra question.
struct KernelSubgroup {
  std::shared_ptr<const HiltonBasis> basis;
  std::vector<HiltonVector> gens;
  std::vector<std::string> gen_labels;
};

KernelSubgroup kernel_subgroup(const WhiteheadExpr& L, const SphereTable& t, int k,
                               const PrimeSet& s);

// Integer-combination witness (coefficients on K.gens) when v lies in the
// subgroup modulo the slot orders; absent otherwise.
std::optional<std::vector<LocalScalar>> in_kernel(const HiltonVector& v,
                                                  const KernelSubgroup& K);

// Bounded exhaustive search over pairs (mu_1, delta_1) for k = 2:
// mu_1 = m_1 alpha_1 + m_2 alpha_2 (primitive), delta_1 a combination of the
// src classes on both spheres plus the pair class, such that
// normalize([mu_1, delta_1]) lies in kernel_subgroup(L) and the loop-homology
// conditions hold. Results are deterministic and exhaustive for the bound.
struct SearchSolution {
  long long m1 = 0, m2 = 0;         // mu_1 coefficients
  std::vector<long long> delta;     // src-class coefficients: (c, sphere) slots
  long long pair_coeff = 0;         // coefficient of [alpha_1, alpha_2]
  std::string str(const SphereTable& t) const;
};

struct BoundedSearchOptions {
  long long bound = 5;
  bool require_side_conditions = true;
  std::size_t max_solutions = 64;
};

std::vector<SearchSolution> bounded_search(const SphereTable& t, const WhiteheadExpr& L,
                                           const IntMatrix& g, const PrimeSet& s,
                                           const BoundedSearchOptions& opt = {});

// Scan over classifying-map degrees (n_1, n_2), gcd 1: a principal fibration
// with 3-connected total space needs the image n_1 n_2 + l_1 n_1 + l_2 n_2 of
// the attaching class to vanish mod 12.
struct PrincipalScanResult {
  bool found = false;
  long long n1 = 0, n2 = 0;
};
PrincipalScanResult principal_s3_scan(const Integer& l1, const Integer& l2, long long bound);

}  // namespace sphfib
