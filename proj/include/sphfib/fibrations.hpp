#pragma once

#include "sphfib/forms.hpp"
#include "sphfib/homotopy.hpp"
#include "sphfib/kv.hpp"
#include "sphfib/ring.hpp"
#include "sphfib/tensorlie.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sphfib {

// Attaching data of a (n-1)-connected 2n-complex with H_n of rank k:
// g is the inverse intersection matrix ((g_ij)); torsion holds the
// coefficients of the Hopf-invariant-zero classes (one column per torsion
// generator of pi_{2n-1}S^n: nu' for n = 4, sigma' for n = 8), reduced to
// canonical residues. The large-k regime carries a user-supplied model of
// the stable (n-1)-stem instead: invariant factors and per-sphere stable
// coordinates of the omega_i.
struct AttachingMap {
  int n = 0;
  int k = 0;
  IntMatrix g;
  IntMatrix torsion;        // k x (#torsion classes); may have 0 columns
  PrimeSet primes;          // working ring Z[1/S]
  IntVec stable_orders;     // d_1 | d_2 | ... | d_r (large-k regime)
  IntMatrix stable_coords;  // k x r

  void validate() const;
};

// Torsion column layout per regime (the Hopf class carries the g-diagonal
// and is not stored).
std::vector<std::string> torsion_class_names(int n);
IntVec torsion_orders(int n);

// Re-express the attaching data in the basis alpha'_j = sum_i P_{ij} alpha_i.
// The bracket and Hopf parts transform through the form; the torsion
// coefficients pick up the binomial corrections from the Hopf invariants.
struct TransformResult {
  IntMatrix g;
  IntMatrix torsion;
};
TransformResult transform_attaching(const SphereTable& t, const IntMatrix& g,
                                    const IntMatrix& torsion, const IntMatrix& P,
                                    const PrimeSet& s);

struct LedgerItem {
  std::string term;
  std::string killed_by;
};

enum class BetaTag { betai, beta4_even, betasimple, odd4, even4, even2_row, betagen };
std::string beta_tag_name(BetaTag t);
BetaTag beta_tag_from_name(const std::string& s);

struct BetaSystem {
  BetaTag tag = BetaTag::betai;
  Integer r = 0;   // odd4 correction parameter
  IntVec mu1;      // even2_row: mu_1 coefficients over (alpha_1, alpha_2)
  IntVec delta1;   // even2_row: delta_1 over (nu_1, nu_2, nu'_1, nu'_2)
};

// The k-1 beta expressions and mu images determined by (tag, g, torsion).
std::vector<WhiteheadExpr> beta_expressions(const BetaSystem& b, const SphereTable& t,
                                            const IntMatrix& g, const IntMatrix& torsion,
                                            const PrimeSet& s);
// Columns of the map on H_n: coordinates of the mu_i in the alpha basis.
IntMatrix mu_columns(const BetaSystem& b, int k);

struct FiberReport {
  bool h_n_ok = false;
  bool beta_basis_ok = false;
  std::string detail;
  bool ok() const { return h_n_ok && beta_basis_ok; }
};

// Exact checks of the two fibre-identification hypotheses:
// (1) the map on H_n (columns mu_i) is injective with free cokernel of rank 1;
// (2) the loop-homology images of the beta_i project to a basis of the
//     degree-(2n-2) component of T(a)/(l) modulo W.H, W spanned by the mu
//     images.
FiberReport verify_fiber_hypotheses(int n, int k, const IntMatrix& g,
                                    const PrimeSet& primes, const IntMatrix& mu_cols,
                                    const std::vector<std::vector<LocalScalar>>& rho_beta);

// rho of a degree-(2n-1) Hilton vector, as a vector over the length-2 words
// of T(a_1..a_k): rho([a_i,a_j]) = -(a_i a_j + a_j a_i), rho(c_i) = -H(c) a_i a_i.
std::vector<LocalScalar> rho_to_words(const HiltonVector& v, const SphereTable& t, int k,
                                      const PrimeSet& s);

// Construction failed honestly (hypothesis unmet, search exhausted); the
// transcript records what was attempted.
class ConstructionError : public std::runtime_error {
 public:
  ConstructionError(const std::string& what, std::vector<std::string> transcript = {})
      : std::runtime_error(what), transcript_(std::move(transcript)) {}
  const std::vector<std::string>& transcript() const { return transcript_; }

 private:
  std::vector<std::string> transcript_;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FibrationCertificate {
  int version = 1;
  std::string regime;  // localized | n2 | n4 | large_k
  int n = 0, k = 0;
  PrimeSet primes;
  IntMatrix g_input, torsion_input;
  IntVec stable_orders;
  IntMatrix stable_input;
  IntMatrix change;  // P, columns = new basis in old coordinates
  std::vector<std::string> transcript;
  IntMatrix g_new, torsion_new, stable_new;
  BetaSystem beta;
  std::string correction;
  bool tensor_identity = false;
  bool basis_statement = false;
  bool homotopy_identity = false;
  bool kernel_member = false;
  std::vector<std::pair<std::string, bool>> congruences;
  std::vector<LedgerItem> ledger;
  FiberReport fiber;
  std::vector<int> sign_variants;  // table sign choices exercised (n = 8)

  std::string serialize() const;
  static FibrationCertificate parse_text(const std::string& text);
  // Re-runs every recorded check against the stored data.
  bool verify(const std::string& table_dir, std::string* why = nullptr) const;
};

// Pipelines. table_dir locates the shipped rewrite tables.
FibrationCertificate construct_localized(const AttachingMap& M, const std::string& table_dir);
FibrationCertificate construct_n2(const AttachingMap& M, const std::string& table_dir);
FibrationCertificate construct_n4(const AttachingMap& M, const std::string& table_dir);
FibrationCertificate construct_large_k(const AttachingMap& M);

// Dispatch on regime name ("auto" inspects n and the stable model).
FibrationCertificate construct(const AttachingMap& M, const std::string& regime,
                               const std::string& table_dir);

std::string table_path(const std::string& table_dir, const std::string& regime);

}  // namespace sphfib
