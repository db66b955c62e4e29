#pragma once

#include "pregeom/formula.hpp"
#include "pregeom/presentation.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace pregeom {

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Earliest stage at which a membership x in cl_t(Y) fires. BeyondCap means
/// the membership provably does not fire at any stage <= t (the certified
/// bound), and resolving beyond that exceeds the computation budget.
struct MinFire {
  enum class Kind { Never, At, BeyondCap };
  Kind kind = Kind::Never;
  std::uint64_t t = 0;

  static MinFire never() { return {Kind::Never, 0}; }
  static MinFire at(std::uint64_t t) { return {Kind::At, t}; }
  static MinFire beyond_cap(std::uint64_t certified) { return {Kind::BeyondCap, certified}; }
};

/// A member of the arity-n enumerated list of open formulas. Variable
/// convention: var 0 = x, vars 1..n = y_1..y_n, higher vars are witnesses.
struct FamilyFormula {
  ExistFormula formula;
  bool padding = false;  // always-false placeholder occupying an invalid code
};

/// Per-arity enumerated lists of open formulas defining the closure relation:
/// x in cl(Y) iff some listed formula holds of (x, Y) with witnesses.
/// Enumeration order is deterministic; parameters d̄ are baked into the
/// formulas by the class that builds the family.
class Sigma1Family {
 public:
  virtual ~Sigma1Family() = default;
  virtual FamilyFormula formula(std::size_t arity, std::uint64_t index) const = 0;

  /// Optional exact accelerator. Must equal the generic scan's verdict.
  virtual std::optional<bool> accel_member(Element x, std::span<const Element> ys,
                                           std::uint64_t t) const {
    (void)x, (void)ys, (void)t;
    return std::nullopt;
  }
  /// Optional: least t at which the membership fires (exact).
  virtual std::optional<MinFire> accel_min_fire(Element x,
                                                std::span<const Element> ys) const {
    (void)x, (void)ys;
    return std::nullopt;
  }
  /// Optional: least t at which some member of the tuple enters the closure
  /// of the others (exact); Never when the tuple stays independent forever.
  virtual std::optional<MinFire> accel_tuple_dependence(std::span<const Element> xs) const {
    (void)xs;
    return std::nullopt;
  }
};

/// Stage-approximated closure over one presentation and one formula family.
/// Query results are pure functions of (presentation, family, inputs); the
/// memo is internally synchronized.
class ClosureApprox {
 public:
  ClosureApprox(std::shared_ptr<const Presentation> pres,
                std::shared_ptr<const Sigma1Family> family)
      : pres_(std::move(pres)), family_(std::move(family)) {}

  const Presentation& presentation() const { return *pres_; }
  std::shared_ptr<const Presentation> presentation_ptr() const { return pres_; }
  const Sigma1Family& family() const { return *family_; }

  /// x in cl_t(Y): true iff x < t and some formula with index <= t in
  /// enumeration order is satisfied with witnesses < t in fragment(t).
  bool member(Element x, std::span<const Element> ys, std::uint64_t t) const;
  /// Least t with member(x, Y, t), via the accelerator when available,
  /// otherwise by scanning t <= scan_cap.
  MinFire min_fire(Element x, std::span<const Element> ys,
                   std::uint64_t scan_cap = 4096) const;

  /// The generic formula-scan evaluation (reference semantics; no accel).
  bool member_generic(Element x, std::span<const Element> ys, std::uint64_t t) const;

  /// No member of X is cl_t-dependent on the others.
  bool is_t_independent(std::span<const Element> xs, std::uint64_t t) const;
  /// Least t at which the tuple goes t-dependent (memoized).
  MinFire tuple_dependence(std::span<const Element> xs) const;

  /// Greedy sequence n_0[t], n_1[t], ...: each the least element < t outside
  /// the cl_t-closure of the previous ones; stops early (shorter sequence)
  /// when no such element < t exists. Returns at most k+1 entries.
  std::vector<Element> least_span_witnesses(std::uint64_t t, std::size_t k) const;

  /// For every i < |U|: n_i[t] in cl_t(u_0..u_i) and u_i in cl_t(u_0..u_{i-1}, n_i[t]).
  bool has_least_span_at(std::span<const Element> us, std::uint64_t t) const;

 private:
  std::vector<Element> canonical_set_(std::span<const Element> ys) const;

  std::shared_ptr<const Presentation> pres_;
  std::shared_ptr<const Sigma1Family> family_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<Element, std::vector<Element>>, MinFire> fire_memo_;
  // generic-scan resume state: largest t fully scanned with no firing
  mutable std::map<std::pair<Element, std::vector<Element>>, std::uint64_t> scanned_false_;
  mutable std::map<std::uint64_t, std::vector<Element>> span_memo_;  // n-sequences per t
  mutable std::map<std::vector<Element>, MinFire> tuple_memo_;
};

/// Total dependence decider: is x in cl(Y)? (exact, no stage bound)
using ClosureDecider = std::function<bool(Element, std::span<const Element>)>;
/// Semidecider with an explicit stage/step parameter; monotone in the stage.
using ClosureSemidecider =
    std::function<bool(Element, std::span<const Element>, std::uint64_t stage)>;

/// Decides dependence of X over an enumerated basis stream by locating a
/// finite A ⊆ B spanning X and testing the exchange condition, dovetailed
/// with the direct dependence semidecision. Throws BudgetExhausted when the
/// step budget runs out before either route resolves.
bool tuple_dependent_from_basis(const std::function<Element(std::size_t)>& basis,
                                std::span<const Element> xs,
                                const ClosureSemidecider& semidecider,
                                std::uint64_t step_budget);

/// Greedy basis stream from a total dependence decider: next element = least
/// element not dependent on those already emitted. Returns the first `count`
/// entries, scanning elements < element_cap.
std::vector<Element> basis_from_closure(const ClosureDecider& decider, std::size_t count,
                                        Element element_cap = 1000000);

}  // namespace pregeom
