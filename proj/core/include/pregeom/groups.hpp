#pragma once

#include "pregeom/closure.hpp"
#include "pregeom/codec.hpp"
#include "pregeom/exact.hpp"
#include "pregeom/formula.hpp"
#include "pregeom/presentation.hpp"

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <unordered_map>

namespace pregeom {

/// One hidden collapse in a scrambled enumeration: two forced elements on the
/// same line (coeff_first * e_dir and coeff_second * e_dir), with every other
/// element whose dir-coordinate falls outside {0, coeff_first, coeff_second}
/// held back until the reveal id.
struct Collapse {
  std::int64_t direction = 0;
  Int coeff_first = 3;
  Int coeff_second = 2;
  std::uint64_t id_first = 0;
  std::uint64_t id_second = 0;
  std::uint64_t reveal = 0;
};

struct ScramblePlan {
  std::vector<Collapse> collapses;
  bool empty() const { return collapses.empty(); }
};

/// Deterministic enumeration of a vector group: either the plain codec rank
/// order, or the codec order rearranged by a scramble plan (forced ids plus
/// delayed line elements released from the reveal id on).
class GroupEnumeration {
 public:
  GroupEnumeration(std::vector<CoordCodec::Kind> generator_kinds, CoordCodec::Kind rest,
                   ScramblePlan plan);

  SparseVec vector_of(Element id) const;
  /// Exact id; nullopt means the id provably exceeds kIdHorizon.
  std::optional<Element> id_of(const SparseVec& v) const;
  bool coeff_allowed(std::int64_t index, const Rat& coeff) const;
  const ScramblePlan& plan() const { return plan_; }

  static constexpr std::uint64_t kIdHorizon = (std::uint64_t{1} << 40);

 private:
  const CoordCodec& codec_for(std::int64_t index) const;
  std::optional<std::uint64_t> rank_of(const SparseVec& v) const;
  std::optional<SparseVec> unrank(std::uint64_t r) const;
  bool delayed_by(const SparseVec& v, const Collapse& c) const;
  bool is_forced_value(const SparseVec& v) const;
  void ensure_emitted(std::uint64_t upto) const;  // simulate scrambled emission

  std::vector<CoordCodec::Kind> gen_kinds_;
  CoordCodec::Kind rest_kind_;
  ScramblePlan plan_;
  // one codec instance per kind, shared across positions
  mutable std::map<CoordCodec::Kind, std::unique_ptr<CoordCodec>> codecs_;
  TokenCodec stream_{TokenAutomaton::pairs()};

  // scrambled emission state (guarded by mu_)
  mutable std::mutex mu_;
  mutable std::vector<SparseVec> emitted_;                     // id -> vector
  mutable std::unordered_map<std::size_t, Element> id_cache_;  // vec hash -> id
  mutable std::map<Element, SparseVec> random_cache_;          // sparse id -> vector
  mutable std::unordered_map<std::size_t, std::pair<SparseVec, std::optional<Element>>>
      id_memo_;  // full id_of result cache
  mutable std::uint64_t base_cursor_ = 0;  // next codec rank to consider
  mutable std::vector<std::deque<SparseVec>> queues_;  // per collapse, rank order
  mutable bool drained_ = false;
  mutable std::uint64_t drain_emitted_ = 0;  // emitted count at drain
  mutable std::uint64_t drain_cursor_ = 0;   // base cursor at drain
};

/// Shared base for the concrete group presentations: vectors behind an
/// enumeration, fact oracle in terms of exact vector arithmetic.
class GroupPresentation : public Presentation {
 public:
  SparseVec vec(Element id) const { return enum_.vector_of(id); }
  std::optional<Element> id_of(const SparseVec& v) const { return enum_.id_of(v); }
  const GroupEnumeration& enumeration() const { return enum_; }
  const ScramblePlan& plan() const { return enum_.plan(); }
  virtual bool is_ordered() const { return false; }
  /// Exact order comparison (ordered classes only): -1, 0, +1.
  virtual int compare(const SparseVec& a, const SparseVec& b) const {
    (void)a, (void)b;
    throw std::logic_error("not an ordered class");
  }

 protected:
  GroupPresentation(Signature sig, std::vector<CoordCodec::Kind> generator_kinds,
                    CoordCodec::Kind rest, ScramblePlan plan)
      : Presentation(std::move(sig)),
        enum_(std::move(generator_kinds), rest, std::move(plan)) {}
  GroupEnumeration enum_;
};

/// Relation indices shared by the group signatures.
inline constexpr std::size_t kRelAdd = 0;
inline constexpr std::size_t kRelZero = 1;
inline constexpr std::size_t kRelLess = 2;

/// A literal of a conjunction-of-literals matrix.
struct GroupLiteral {
  std::size_t rel;
  std::vector<Term> args;
  bool negated;
};
std::vector<GroupLiteral> matrix_literals(const QFFormula& matrix);

SparseVec literal_term_value(const GroupPresentation& pres, const Term& t,
                             std::span<const SparseVec> vals);
bool literal_holds_on_vectors(const GroupPresentation& pres, const GroupLiteral& lit,
                              std::span<const SparseVec> vals);
bool all_literals_hold(const GroupPresentation& pres, const std::vector<GroupLiteral>& lits,
                       std::span<const SparseVec> vals);

/// Bounded confirmation of exists-y phi(frees, y) over growing fragments;
/// returns the witness vectors on success.
std::optional<std::vector<SparseVec>> find_witnesses(const GroupPresentation& pres,
                                                     const ExistFormula& phi,
                                                     std::span<const Element> frees,
                                                     std::uint64_t budget);

/// The arity-n enumerated lists of open formulas defining Z-linear dependence:
/// index 0 is the zero formula (zero(x)); index 1+k decodes k as a dependence
/// pattern c*x = sum m_i * y_{pos_i} written as an addition chain with a zero
/// witness. Invalid codes are padding. Shared by the group classes.
class GroupDependenceFamily : public Sigma1Family {
 public:
  explicit GroupDependenceFamily(std::shared_ptr<const GroupPresentation> pres)
      : pres_(std::move(pres)), codec_(TokenAutomaton::odd_at_least_3()) {}

  struct Pattern {
    Int x_coeff = 1;                                   // c >= 1
    std::vector<std::pair<std::size_t, Int>> terms;    // (position >= 1, coeff != 0)
  };

  FamilyFormula formula(std::size_t arity, std::uint64_t index) const override;
  std::optional<bool> accel_member(Element x, std::span<const Element> ys,
                                   std::uint64_t t) const override;
  std::optional<MinFire> accel_min_fire(Element x,
                                        std::span<const Element> ys) const override;
  std::optional<MinFire> accel_tuple_dependence(std::span<const Element> xs) const override;

  /// Enumeration index of a dependence pattern (nullopt beyond the code horizon).
  std::optional<std::uint64_t> code_of(const Pattern& p) const;
  std::optional<Pattern> decode(std::uint64_t index) const;
  /// Builds the open formula (addition chain) of a pattern for arity n.
  ExistFormula chain_formula(const Pattern& p, std::size_t arity) const;

  /// Least stage at which the pattern fires on (x, ys): max of code, element
  /// ids, chain witness ids (+1 each); nullopt if something exceeds horizons.
  std::optional<std::uint64_t> pattern_threshold(const Pattern& p, Element x,
                                                 std::span<const Element> ys) const;

 private:
  struct YsEchelon {
    struct Row {
      SparseVec vec;
      std::vector<Rat> combo;  // over the ys positions
      std::int64_t pivot = 0;
    };
    std::vector<Row> rows;
    std::vector<std::vector<Rat>> internal_kernel;  // ys-internal dependencies
  };
  const YsEchelon& ys_echelon(std::span<const Element> ys) const;
  MinFire min_fire_impl(Element x, std::span<const Element> ys) const;

  std::shared_ptr<const GroupPresentation> pres_;
  TokenCodec codec_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<Element>, YsEchelon> echelon_cache_;
};

}  // namespace pregeom
