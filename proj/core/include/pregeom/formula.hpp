#pragma once

#include "pregeom/presentation.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pregeom {

struct Term {
  enum class Kind { Var, Const };
  Kind kind = Kind::Var;
  std::uint32_t var = 0;
  Element elem = 0;

  static Term variable(std::uint32_t v) { return Term{Kind::Var, v, 0}; }
  static Term constant(Element e) { return Term{Kind::Const, 0, e}; }
  bool operator==(const Term&) const = default;
};

/// Quantifier-free formula: boolean combination of atomic relational formulas.
class QFFormula {
 public:
  enum class Kind { True, Atom, Not, And, Or };

  static QFFormula truth();
  static QFFormula falsity();  // Not(True)
  static QFFormula atom(std::size_t rel, std::vector<Term> args);
  static QFFormula negate(QFFormula f);
  static QFFormula conj(std::vector<QFFormula> fs);
  static QFFormula disj(std::vector<QFFormula> fs);

  Kind kind() const { return kind_; }
  std::size_t rel() const { return rel_; }
  const std::vector<Term>& args() const { return args_; }
  const std::vector<QFFormula>& children() const { return children_; }

  /// 1 + largest variable index used, 0 if none.
  std::uint32_t var_count() const;
  /// 1 + largest relation index used, 0 if none.
  std::size_t rel_limit() const;
  std::size_t atom_count() const;
  bool is_conjunction_of_literals() const;
  /// Flattens a conjunction into (atom, negated) literals; requires
  /// is_conjunction_of_literals().
  std::vector<std::pair<QFFormula, bool>> literals() const;

  /// Canonical serialization (prefix notation); variables are emitted as vN
  /// with numbering by first occurrence, constants as their element labels.
  std::string serialize() const;
  /// Rewrites variable indices by first occurrence (the canonical numbering).
  QFFormula canonicalized() const;

  bool operator==(const QFFormula&) const = default;

 private:
  Kind kind_ = Kind::True;
  std::size_t rel_ = 0;
  std::vector<Term> args_;
  std::vector<QFFormula> children_;
};

/// A block of existential quantifiers over a quantifier-free matrix.
/// Variables 0..free_vars-1 are free; variables free_vars..var_count-1 are
/// existentially quantified.
struct ExistFormula {
  std::uint32_t free_vars = 0;
  QFFormula matrix;

  std::uint32_t bound_vars() const {
    std::uint32_t n = matrix.var_count();
    return n > free_vars ? n - free_vars : 0;
  }
  std::string serialize() const;
  bool operator==(const ExistFormula&) const = default;
};

/// Standard truth evaluation against the fragment's facts. All assigned
/// elements and all relation indices used must lie inside the fragment.
bool eval_qf(const FragmentView& f, const QFFormula& phi, std::span<const Element> asg);

/// True iff some witness tuple with all entries < bound satisfies the matrix.
/// asg supplies the free variables.
bool eval_exists_bounded(const FragmentView& f, const ExistFormula& phi,
                         std::span<const Element> asg, std::uint64_t bound);

/// As eval_exists_bounded, but returns the witness assignment (bound
/// variables only, in variable order) when satisfiable.
std::optional<std::vector<Element>> eval_exists_bounded_witness(const FragmentView& f,
                                                                const ExistFormula& phi,
                                                                std::span<const Element> asg,
                                                                std::uint64_t bound);

/// Partition of a fragment's elements into parameters and two variable blocks.
struct DiagramPartition {
  std::vector<Element> params;  // kept as constants
  std::vector<Element> exist;   // variables 0..
  std::vector<Element> frees;   // variables |exist|..
};

/// Conjunction of all atomic facts and negated atomic facts of the fragment,
/// with params kept as parameters and the rest as variables; conjuncts in
/// canonical order (lexicographic by serialized atom).
QFFormula atomic_diagram_formula(const FragmentView& f, const DiagramPartition& part,
                                 std::uint64_t tuple_cap = 4000000ull);

}  // namespace pregeom
