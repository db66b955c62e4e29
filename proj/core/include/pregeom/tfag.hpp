#pragma once

#include "pregeom/good_copy.hpp"
#include "pregeom/groups.hpp"

#include <optional>

namespace pregeom {

/// A computable torsion-free abelian group presented as a direct sum of
/// rank-1 subgroups of Q: per-generator divisibility kinds, with a tail kind
/// for all remaining generators. Infinite rank by construction.
struct TfagGroupSpec {
  std::vector<CoordCodec::Kind> generators;  // prefix overrides
  CoordCodec::Kind rest = CoordCodec::Kind::Q;

  static TfagGroupSpec full_divisibility() { return {{}, CoordCodec::Kind::Q}; }
  static TfagGroupSpec integral() { return {{}, CoordCodec::Kind::Z}; }
  static TfagGroupSpec half_integral() { return {{}, CoordCodec::Kind::ZHalf}; }
  std::vector<CoordCodec::Kind> kinds() const { return generators; }
};

Signature tfag_signature();

class TfagPresentation final : public GroupPresentation {
 public:
  explicit TfagPresentation(TfagGroupSpec spec, ScramblePlan plan = {});
  bool fact(std::size_t rel, std::span<const Element> args) const override;
  const TfagGroupSpec& group_spec() const { return spec_; }

 private:
  TfagGroupSpec spec_;
};

std::shared_ptr<TfagPresentation> tfag_standard(TfagGroupSpec spec = TfagGroupSpec::full_divisibility());
std::shared_ptr<TfagPresentation> tfag_scrambled(TfagGroupSpec spec, ScramblePlan plan);

/// Pure decomposition of a finitely generated subgroup X: independent
/// generators g of the least pure subgroup C containing the given elements,
/// and independent generators h of a complement with X = <g> ⊕ <h>.
struct PureDecomposition {
  std::vector<SparseVec> g;
  std::vector<SparseVec> h;
  /// Integer coordinates of an X-member over (g, h); nullopt outside X.
  std::optional<std::vector<Int>> rep(const SparseVec& v) const;

  // solve data: lattice basis of X and the (g,h)-to-basis change of basis
  LinSolver basis_solver_;
  std::vector<std::vector<Rat>> minv_;  // inverse of [C;W] rows, integral
};
PureDecomposition decompose_pure(const std::vector<SparseVec>& x_generators,
                                 const std::vector<SparseVec>& c_elems);

/// Variable convention for independence-diagram formulas phi(params, slots):
/// free vars 0..|params|-1 are the parameters, the next vars are the slots,
/// higher vars are existential witnesses.
struct WitnessSubstitution {
  SparseVec b;                                  // image of the slot element
  std::vector<SparseVec> witness_images;        // images of the existentials
};

/// Condition-B witness: b in cl(params) satisfying exists y psi(params, y, b).
/// psi has free vars = |params| + 1 (slot last). The witness hint supplies
/// known existential values; otherwise a bounded search runs.
WitnessSubstitution tfag_dependent_witness(const GroupPresentation& pres,
                                           std::span<const Element> params, Element a,
                                           const ExistFormula& psi,
                                           const std::vector<SparseVec>* witness_hint = nullptr,
                                           std::uint64_t search_budget = 4096,
                                           bool verify = true);

/// Local indistinguishability witness (fully divisible and general specs):
/// w with phi(params, w) true, w independent over params, w_i in
/// cl(params, v_1..v_i). phi free vars = |params| + |us|.
std::vector<SparseVec> tfag_local_indist_witness(const GroupPresentation& pres,
                                                 std::span<const Element> params,
                                                 std::span<const Element> us,
                                                 std::span<const Element> vs,
                                                 const ExistFormula& phi,
                                                 std::uint64_t search_budget = 4096);

/// Finite partial subgroup witnessing independence-diagram membership:
/// H = box {-k..k}^{p+q} over actual independent generators (g then h),
/// with designated reps for the parameters, the slots, and the witnesses.
struct PartialSubgroupCertificate {
  Int k = 1;
  std::vector<SparseVec> g;
  std::vector<SparseVec> h;
  std::vector<std::vector<Int>> c_reps;
  std::vector<std::vector<Int>> a_reps;
  std::vector<std::vector<Int>> w_reps;

  std::string to_json() const;
  static PartialSubgroupCertificate from_json(const std::string& text);
  bool operator==(const PartialSubgroupCertificate&) const = default;
};

/// Verifies the certificate invariants plus H |= exists y psi(params, slots, y)
/// with all intermediate terms inside the box. Order atoms are checked with
/// the supplied comparator when the class is ordered.
bool certificate_check(const GroupPresentation& pres, const PartialSubgroupCertificate& cert,
                       std::span<const Element> params, const ExistFormula& psi);

/// Certificate-based semidecision of diagram membership. A yes is final.
struct DiagramSemidecision {
  bool yes = false;
  std::uint64_t budget_used = 0;
  std::optional<PartialSubgroupCertificate> certificate;
};
DiagramSemidecision indep_diagram_semidecide(const GroupPresentation& pres,
                                             std::span<const Element> params,
                                             const ExistFormula& phi, std::uint64_t budget);

/// Condition-G oracle for the group classes (tfag and aoag share the
/// machinery; ordered classes add order-interval checks in the re-homing).
class GroupConditionG : public ConditionGOracle {
 public:
  explicit GroupConditionG(std::shared_ptr<const GroupPresentation> pres)
      : pres_(std::move(pres)) {}

  SemiDecision indep_diagram_semidecide(std::span<const Element> params,
                                        const ExistFormula& phi,
                                        std::uint64_t budget) const override;
  SemiDecision safeness_in_diagram(const FiniteFragment& frag, const SafenessFormula& psi,
                                   std::uint64_t budget) const override;
  std::optional<bool> certify_independent(std::span<const Element> tuple,
                                          std::span<const Element> over) const override;
  std::optional<Rehoming> local_witness(const FiniteFragment& frag, const SafenessFormula& psi,
                                        std::span<const Element> replacement_basis,
                                        std::span<const Element> extras) const override;

 protected:
  /// Re-homing of hidden-dependent designated slots onto fresh or supplied
  /// lines; verified against the visible fragment before use.
  struct LineMove {
    std::int64_t src_direction;
    Rat moved_coeff;    // the coordinate value being re-homed
    SparseVec target;   // replacement for one occurrence of moved_coeff*e_dir
    bool fresh = true;  // target on directions absent from the fragment
  };
  std::optional<std::vector<LineMove>> plan_moves_(
      const FiniteFragment& frag, std::span<const Element> kept,
      std::span<const Element> slots, std::span<const Element> replacement_basis) const;
  bool verify_moves_(const FiniteFragment& frag, const std::vector<LineMove>& moves,
                     std::uint64_t* scanned) const;
  SparseVec apply_moves_(const std::vector<LineMove>& moves, const SparseVec& v) const;

  /// Ordered-class hooks: reposition targets inside the value window that
  /// keeps every visible order fact true, and verify the order afterwards.
  virtual bool adjust_targets_(const FiniteFragment& frag, std::vector<LineMove>& moves,
                               std::span<const Element> kept) const {
    (void)frag, (void)moves, (void)kept;
    return true;
  }
  virtual bool order_preserved_(const FiniteFragment& frag,
                                const std::vector<LineMove>& moves) const {
    (void)frag, (void)moves;
    return true;
  }

  std::shared_ptr<const GroupPresentation> pres_;
};

}  // namespace pregeom
