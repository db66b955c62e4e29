#pragma once

#include "pregeom/tfag.hpp"

namespace pregeom {

/// Archimedean ordered abelian group realized as the Z-span of logarithms of
/// distinct primes: element (a_i) denotes sum a_i * ln(p_i). Equality and
/// order are decidable by exact rational comparison of the products.
struct AoagGroupSpec {
  std::vector<std::uint64_t> prime_prefix;  // overrides for p_0, p_1, ...
  // positions beyond the prefix take ascending primes not already used
};

Signature aoag_signature();

class AoagPresentation final : public GroupPresentation {
 public:
  explicit AoagPresentation(AoagGroupSpec spec, ScramblePlan plan = {});
  bool fact(std::size_t rel, std::span<const Element> args) const override;
  bool is_ordered() const override { return true; }
  /// Exact comparison of the denoted reals (rational exponents allowed).
  int compare(const SparseVec& a, const SparseVec& b) const override;
  std::uint64_t prime(std::size_t index) const;
  const AoagGroupSpec& group_spec() const { return spec_; }

 private:
  AoagGroupSpec spec_;
  mutable std::mutex prime_mu_;
  mutable std::vector<std::uint64_t> primes_;  // by generator index
};

std::shared_ptr<AoagPresentation> aoag_standard(AoagGroupSpec spec = {});
std::shared_ptr<AoagPresentation> aoag_scrambled(AoagGroupSpec spec, ScramblePlan plan);

/// Sign of the real denoted by a rational-exponent combination.
int log_value_sign(const AoagPresentation& pres, const SparseVec& exponents);

/// Element of the subgroup generated by two independent elements lying
/// strictly inside the value interval (lo, hi); endpoints are given as
/// rational-exponent combinations. Found by the continued-fraction remainder
/// walk, with a bounded brute-force fallback.
struct DensityWitness {
  SparseVec element;
  Int s, t;  // element = s*gen1 + t*gen2
};
DensityWitness density_witness(const AoagPresentation& pres, const SparseVec& gen1,
                               const SparseVec& gen2, const SparseVec& lo,
                               const SparseVec& hi);

/// Condition-B witness for the ordered class: b in cl(params) with
/// exists-y psi(params, y, b); complement generators are replaced through
/// value intervals using density instead of integer multiples.
WitnessSubstitution aoag_dependent_witness(const AoagPresentation& pres,
                                           std::span<const Element> params, Element a,
                                           const ExistFormula& psi,
                                           const std::vector<SparseVec>* witness_hint = nullptr,
                                           std::uint64_t search_budget = 4096,
                                           bool verify = true);

/// Local indistinguishability witnesses w_i = s_i*c + t_i*v_i (t_i != 0)
/// landing in the open value box extracted from phi around the u-slots.
std::vector<SparseVec> aoag_local_indist_witness(const AoagPresentation& pres,
                                                 std::span<const Element> params,
                                                 std::span<const Element> us,
                                                 std::span<const Element> vs,
                                                 const ExistFormula& phi,
                                                 std::uint64_t search_budget = 4096);

/// Condition-G oracle for the ordered class: the group machinery plus value
/// windows for the re-homing targets.
class AoagConditionG final : public GroupConditionG {
 public:
  explicit AoagConditionG(std::shared_ptr<const AoagPresentation> pres)
      : GroupConditionG(pres), apres_(std::move(pres)) {}

 protected:
  bool adjust_targets_(const FiniteFragment& frag, std::vector<LineMove>& moves,
                       std::span<const Element> kept) const override;
  bool order_preserved_(const FiniteFragment& frag,
                        const std::vector<LineMove>& moves) const override;

 private:
  std::shared_ptr<const AoagPresentation> apres_;
};

}  // namespace pregeom
