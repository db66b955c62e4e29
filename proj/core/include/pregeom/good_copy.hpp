#pragma once

#include "pregeom/closure.hpp"
#include "pregeom/formula.hpp"
#include "pregeom/presentation.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pregeom {

/// One stage of the basis-building construction: a finite injective map tau
/// from an initial segment into the source structure, designated domain
/// indices a_0..a_s, and the lookahead bound t_s > s.
struct StageState {
  std::uint64_t stage = 0;
  PartialMap tau;                       // domain = initial segment of G
  std::vector<std::size_t> designated;  // a_0..a_s as domain indices
  std::uint64_t t = 0;

  std::vector<Element> designated_images() const {
    std::vector<Element> v;
    v.reserve(designated.size());
    for (std::size_t a : designated) v.push_back(tau.image(a));
    return v;
  }
};

/// The recoverability formula of a stage: the atomic diagram of the fragment
/// at bound t, partitioned into kept parameters (params), existentially
/// quantified rest (exist) and the designated indeterminate slots (frees).
/// psi_i = exists(exist) theta(params, exist, frees).
struct SafenessFormula {
  std::size_t index = 0;  // the i < s it belongs to
  std::uint64_t t = 0;
  DiagramPartition partition;

  /// Materializes psi_i as an ExistFormula; guarded by the tuple cap.
  ExistFormula expand(const FragmentView& frag, std::uint64_t tuple_cap = 4000000ull) const;
  /// Conjunct count of the matrix without materializing it.
  std::uint64_t matrix_conjunct_count(const FragmentView& frag) const;
};

enum class StageProperty { P1, P2, P3, P4, P5, P6 };
std::string to_string(StageProperty p);

/// Outcome of a semidecision query.
struct SemiDecision {
  bool confirmed = false;
  std::uint64_t budget_used = 0;
};

/// Class-provided Condition-G interface: a semidecider for membership of
/// existential formulas in independence diagrams, an optional witness
/// accelerator, and (for concrete classes) exact independence certification.
class ConditionGOracle {
 public:
  virtual ~ConditionGOracle() = default;

  /// Is phi(params, x-slots) in the independence diagram of params? A yes is
  /// final; not-yet may resolve with more budget.
  virtual SemiDecision indep_diagram_semidecide(std::span<const Element> params,
                                                const ExistFormula& phi,
                                                std::uint64_t budget) const = 0;

  /// Structured form of the same question for safeness formulas (avoids
  /// materializing fragment-diagram matrices).
  virtual SemiDecision safeness_in_diagram(const FiniteFragment& frag,
                                           const SafenessFormula& psi,
                                           std::uint64_t budget) const = 0;

  /// Exact independence certification (concrete classes); nullopt = cannot say.
  virtual std::optional<bool> certify_independent(std::span<const Element> tuple,
                                                  std::span<const Element> over) const {
    (void)tuple, (void)over;
    return std::nullopt;
  }

  /// Optional accelerator: given the safeness data and replacement tuple
  /// slots, produce images for the indeterminates that keep psi true and are
  /// independent over the parameters, together with re-homed images for the
  /// supplied extra elements. Validated by the caller.
  struct Rehoming {
    std::vector<Element> slot_images;
    std::vector<Element> extra_images;
  };
  virtual std::optional<Rehoming> local_witness(const FiniteFragment& frag,
                                                const SafenessFormula& psi,
                                                std::span<const Element> replacement_basis,
                                                std::span<const Element> extras) const {
    (void)frag, (void)psi, (void)replacement_basis, (void)extras;
    return std::nullopt;
  }
};

struct GoodCopyBudgets {
  std::uint64_t p5_budget = 1u << 20;
  std::uint64_t search_budget = 1u << 22;  // candidate (tau, t) search steps
};

/// Trace events (serialized to JSONL by the CLI layer).
struct StageEvent {
  StageState state;
  std::size_t certified_prefix = 0;  // largest oracle-certified independent prefix + 1
  std::vector<std::size_t> moved;    // domain indices whose image changed
  std::vector<std::pair<std::size_t, std::uint64_t>> p5_budgets;  // (i, budget_used)
  std::vector<std::size_t> governed;  // domain indices tied to the certified prefix
};

enum class RunStatus { Complete, Resumable, PropertyViolation };

struct GoodCopyResult {
  RunStatus status = RunStatus::Complete;
  std::string message;
  std::vector<StageEvent> trace;
  FactSet committed;  // diagram of G over the final domain
  StageState final_state;
};

/// Property checkers. Returns the violated properties (empty = all pass);
/// P5 not yet confirmed within budget is reported via `p5_unconfirmed`.
struct PropertyReport {
  std::vector<StageProperty> violated;
  std::vector<std::size_t> p5_unconfirmed;  // the i's that did not confirm
  std::vector<std::pair<std::size_t, std::uint64_t>> p5_budgets;
  bool ok() const { return violated.empty() && p5_unconfirmed.empty(); }
};

class GoodCopy {
 public:
  GoodCopy(std::shared_ptr<const Presentation> pres, std::shared_ptr<ClosureApprox> closure,
           std::shared_ptr<const ConditionGOracle> oracle, GoodCopyBudgets budgets = {});

  /// P1..P6 between prev (nullable at stage 0) and next.
  PropertyReport check_properties(const StageState* prev, const StageState& next,
                                  std::uint64_t p5_budget,
                                  const std::vector<std::size_t>* moved_hint = nullptr) const;

  SafenessFormula build_safeness_formula(const StageState& state, std::size_t i) const;

  /// Deterministic next-stage search: the first candidate in the canonical
  /// schedule (ordered by t, then lexicographic tau code) passing the checks.
  StageState next_stage(const StageState& state, std::vector<std::size_t>* moved_out = nullptr,
                        PropertyReport* report_out = nullptr) const;

  GoodCopyResult run(std::uint64_t stages) const;

  /// Per-domain-element last stage its image changed; flags (via second) any
  /// move after the element's governing prefix was oracle-certified.
  static std::map<std::size_t, std::pair<std::uint64_t, bool>> stabilization_report(
      const std::vector<StageEvent>& trace);

  const ClosureApprox& closure() const { return *closure_; }

 private:
  StageState initial_stage_() const;
  std::size_t certified_prefix_(const StageState& st) const;
  std::uint64_t minimal_t_for_(const StageState& candidate, std::uint64_t t_min) const;

  std::shared_ptr<const Presentation> pres_;
  std::shared_ptr<ClosureApprox> closure_;
  std::shared_ptr<const ConditionGOracle> oracle_;
  GoodCopyBudgets budgets_;

  // first-witnessed closure thresholds over the growing designated prefix;
  // sound for any later prefix that extends the recorded one at the end
  mutable std::vector<Element> threshold_prefix_;
  mutable std::map<Element, std::uint64_t> member_threshold_;
};

}  // namespace pregeom
