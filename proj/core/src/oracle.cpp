#include "pregeom/oracle.hpp"

#include <functional>

namespace pregeom {

bool OracleContext::brute_independent(std::span<const Element> xs,
                                      std::span<const Element> over) const {
  std::vector<SparseVec> vxs, vover;
  for (Element e : xs) vxs.push_back(pres_->vec(e));
  for (Element e : over) vover.push_back(pres_->vec(e));
  return independent_over(vxs, vover);
}

bool OracleContext::brute_cl(Element x, std::span<const Element> ys) const {
  LinSolver span;
  for (Element y : ys) span.insert(pres_->vec(y));
  return span.in_span(pres_->vec(x));
}

bool OracleContext::within_coeff_bound_(Element e, std::uint64_t bound) const {
  SparseVec v = pres_->vec(e);
  for (const auto& [i, q] : v.entries()) {
    if (abs_int(numerator(q)) > Int(bound) || denominator(q) > Int(bound)) return false;
  }
  return true;
}

bool OracleContext::brute_indep_diagram(std::span<const Element> params,
                                        const ExistFormula& phi,
                                        std::uint64_t fragment_bound,
                                        std::uint64_t coeff_bound) const {
  if (phi.free_vars < params.size())
    throw PreconditionViolation("brute_indep_diagram: arity mismatch");
  std::size_t arity = phi.free_vars - params.size();
  for (Element c : params)
    if (c >= fragment_bound) return false;
  FiniteFragment frag(pres_, fragment_bound);
  std::vector<Element> tuple(arity, 0);
  std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
    if (i == arity) {
      std::vector<Element> asg(params.begin(), params.end());
      asg.insert(asg.end(), tuple.begin(), tuple.end());
      if (!eval_exists_bounded(frag, phi, asg, fragment_bound)) return false;
      return brute_independent(tuple, params);
    }
    for (Element e = 0; e < fragment_bound; ++e) {
      if (!within_coeff_bound_(e, coeff_bound)) continue;
      tuple[i] = e;
      if (rec(i + 1)) return true;
    }
    return false;
  };
  return rec(0);
}

}  // namespace pregeom
