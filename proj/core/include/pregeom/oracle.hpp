#pragma once

#include "pregeom/groups.hpp"

namespace pregeom {

/// Independent brute-force ground truth for independence, closure and
/// diagram-membership judgments at small scale. Works directly on the exact
/// element representations behind a presentation's enumeration and never
/// consults the engine or the class semideciders.
class OracleContext {
 public:
  explicit OracleContext(std::shared_ptr<const GroupPresentation> pres)
      : pres_(std::move(pres)) {}

  /// Exact-rank independence of xs over the span of `over`.
  bool brute_independent(std::span<const Element> xs, std::span<const Element> over) const;

  /// x in cl(Y): rank test on the formal representations.
  bool brute_cl(Element x, std::span<const Element> ys) const;

  /// Exhaustive bounded membership search: yes iff some slot tuple below the
  /// fragment bound satisfies phi with witnesses below the bound and is
  /// brute-independent over the parameters. "No" means no-at-this-bound.
  bool brute_indep_diagram(std::span<const Element> params, const ExistFormula& phi,
                           std::uint64_t fragment_bound, std::uint64_t coeff_bound) const;

  const GroupPresentation& presentation() const { return *pres_; }

 private:
  bool within_coeff_bound_(Element e, std::uint64_t bound) const;
  std::shared_ptr<const GroupPresentation> pres_;
};

}  // namespace pregeom
