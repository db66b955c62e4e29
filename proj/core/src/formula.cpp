#include "pregeom/formula.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>

namespace pregeom {

QFFormula QFFormula::truth() { return QFFormula{}; }

QFFormula QFFormula::falsity() { return negate(truth()); }

QFFormula QFFormula::atom(std::size_t rel, std::vector<Term> args) {
  QFFormula f;
  f.kind_ = Kind::Atom;
  f.rel_ = rel;
  f.args_ = std::move(args);
  return f;
}

QFFormula QFFormula::negate(QFFormula g) {
  QFFormula f;
  f.kind_ = Kind::Not;
  f.children_.push_back(std::move(g));
  return f;
}

QFFormula QFFormula::conj(std::vector<QFFormula> fs) {
  if (fs.empty()) return truth();
  if (fs.size() == 1) return std::move(fs.front());
  QFFormula f;
  f.kind_ = Kind::And;
  f.children_ = std::move(fs);
  return f;
}

QFFormula QFFormula::disj(std::vector<QFFormula> fs) {
  if (fs.size() == 1) return std::move(fs.front());
  QFFormula f;
  f.kind_ = Kind::Or;
  f.children_ = std::move(fs);
  return f;
}

std::uint32_t QFFormula::var_count() const {
  std::uint32_t n = 0;
  if (kind_ == Kind::Atom) {
    for (const Term& t : args_)
      if (t.kind == Term::Kind::Var) n = std::max(n, t.var + 1);
  }
  for (const auto& c : children_) n = std::max(n, c.var_count());
  return n;
}

std::size_t QFFormula::rel_limit() const {
  std::size_t n = 0;
  if (kind_ == Kind::Atom) n = rel_ + 1;
  for (const auto& c : children_) n = std::max(n, c.rel_limit());
  return n;
}

std::size_t QFFormula::atom_count() const {
  if (kind_ == Kind::Atom) return 1;
  std::size_t n = 0;
  for (const auto& c : children_) n += c.atom_count();
  return n;
}

bool QFFormula::is_conjunction_of_literals() const {
  auto is_literal = [](const QFFormula& f) {
    return f.kind() == Kind::Atom ||
           (f.kind() == Kind::Not && f.children().front().kind() == Kind::Atom);
  };
  if (kind_ == Kind::True || is_literal(*this)) return true;
  if (kind_ != Kind::And) return false;
  for (const auto& c : children_)
    if (!is_literal(c)) return false;
  return true;
}

std::vector<std::pair<QFFormula, bool>> QFFormula::literals() const {
  std::vector<std::pair<QFFormula, bool>> out;
  auto push = [&out](const QFFormula& f) {
    if (f.kind() == Kind::Atom) {
      out.push_back({f, false});
    } else {
      out.push_back({f.children().front(), true});
    }
  };
  if (kind_ == Kind::True) return out;
  if (kind_ == Kind::And) {
    for (const auto& c : children_) push(c);
  } else {
    push(*this);
  }
  return out;
}

namespace {

void serialize_rec(const QFFormula& f, std::map<std::uint32_t, std::uint32_t>& renum,
                   std::ostringstream& os) {
  switch (f.kind()) {
    case QFFormula::Kind::True:
      os << "true";
      return;
    case QFFormula::Kind::Atom: {
      os << "(r" << f.rel();
      for (const Term& t : f.args()) {
        if (t.kind == Term::Kind::Var) {
          auto [it, fresh] = renum.try_emplace(t.var, static_cast<std::uint32_t>(renum.size()));
          (void)fresh;
          os << " v" << it->second;
        } else {
          os << " !" << t.elem;
        }
      }
      os << ")";
      return;
    }
    case QFFormula::Kind::Not:
      os << "(not ";
      serialize_rec(f.children().front(), renum, os);
      os << ")";
      return;
    case QFFormula::Kind::And:
    case QFFormula::Kind::Or:
      os << (f.kind() == QFFormula::Kind::And ? "(and" : "(or");
      for (const auto& c : f.children()) {
        os << " ";
        serialize_rec(c, renum, os);
      }
      os << ")";
      return;
  }
}

QFFormula renumber(const QFFormula& f, std::map<std::uint32_t, std::uint32_t>& renum) {
  switch (f.kind()) {
    case QFFormula::Kind::True:
      return f;
    case QFFormula::Kind::Atom: {
      std::vector<Term> args;
      for (const Term& t : f.args()) {
        if (t.kind == Term::Kind::Var) {
          auto [it, fresh] = renum.try_emplace(t.var, static_cast<std::uint32_t>(renum.size()));
          (void)fresh;
          args.push_back(Term::variable(it->second));
        } else {
          args.push_back(t);
        }
      }
      return QFFormula::atom(f.rel(), std::move(args));
    }
    default: {
      std::vector<QFFormula> kids;
      for (const auto& c : f.children()) kids.push_back(renumber(c, renum));
      if (f.kind() == QFFormula::Kind::Not) return QFFormula::negate(std::move(kids.front()));
      if (f.kind() == QFFormula::Kind::And) return QFFormula::conj(std::move(kids));
      return QFFormula::disj(std::move(kids));
    }
  }
}

}  // namespace

std::string QFFormula::serialize() const {
  std::map<std::uint32_t, std::uint32_t> renum;
  std::ostringstream os;
  serialize_rec(*this, renum, os);
  return os.str();
}

QFFormula QFFormula::canonicalized() const {
  std::map<std::uint32_t, std::uint32_t> renum;
  return renumber(*this, renum);
}

std::string ExistFormula::serialize() const {
  std::ostringstream os;
  os << "(exists " << bound_vars() << " ";
  os << matrix.serialize();
  os << ")";
  return os.str();
}

namespace {

Element resolve(const Term& t, std::span<const Element> asg) {
  if (t.kind == Term::Kind::Const) return t.elem;
  if (t.var >= asg.size()) throw PreconditionViolation("eval: unassigned variable");
  return asg[t.var];
}

}  // namespace

bool eval_qf(const FragmentView& f, const QFFormula& phi, std::span<const Element> asg) {
  switch (phi.kind()) {
    case QFFormula::Kind::True:
      return true;
    case QFFormula::Kind::Atom: {
      std::vector<Element> xs;
      xs.reserve(phi.args().size());
      for (const Term& t : phi.args()) xs.push_back(resolve(t, asg));
      return f.fact_checked(phi.rel(), xs);
    }
    case QFFormula::Kind::Not:
      return !eval_qf(f, phi.children().front(), asg);
    case QFFormula::Kind::And:
      for (const auto& c : phi.children())
        if (!eval_qf(f, c, asg)) return false;
      return true;
    case QFFormula::Kind::Or:
      for (const auto& c : phi.children())
        if (eval_qf(f, c, asg)) return true;
      return false;
  }
  return false;
}

namespace {

// Backtracking search over existential assignments with unit propagation on
// positive conjunction literals. Sound and complete for bound-limited search;
// the propagation only reorders the exploration.
struct ExistSearch {
  const FragmentView& frag;
  std::uint64_t bound;
  std::vector<std::pair<QFFormula, bool>> lits;  // conjunction of literals, or empty
  const QFFormula* generic_matrix = nullptr;
  std::vector<std::optional<Element>> asg;
  std::uint32_t total_vars;

  bool literal_ready(const std::pair<QFFormula, bool>& lit) const {
    for (const Term& t : lit.first.args())
      if (t.kind == Term::Kind::Var && !asg[t.var]) return false;
    return true;
  }

  bool literal_holds(const std::pair<QFFormula, bool>& lit) const {
    std::vector<Element> xs;
    for (const Term& t : lit.first.args())
      xs.push_back(t.kind == Term::Kind::Const ? t.elem : *asg[t.var]);
    for (Element e : xs)
      if (e >= frag.size()) return lit.second;  // out-of-bound atom is false
    if (lit.first.rel() >= frag.relation_limit()) return lit.second;
    bool v = frag.fact(lit.first.rel(), xs);
    return lit.second ? !v : v;
  }

  bool check_ready_literals() const {
    for (const auto& lit : lits)
      if (literal_ready(lit) && !literal_holds(lit)) return false;
    return true;
  }

  std::optional<std::uint32_t> pick_unassigned() const {
    // prefer a variable occurring in a positive literal with one unknown
    for (const auto& lit : lits) {
      if (lit.second) continue;
      std::optional<std::uint32_t> unknown;
      int unknowns = 0;
      for (const Term& t : lit.first.args())
        if (t.kind == Term::Kind::Var && !asg[t.var]) {
          ++unknowns;
          unknown = t.var;
        }
      if (unknowns == 1) return unknown;
    }
    for (std::uint32_t v = 0; v < total_vars; ++v)
      if (!asg[v]) return v;
    return std::nullopt;
  }

  bool solve() {
    if (!lits.empty() || generic_matrix == nullptr) {
      if (!check_ready_literals()) return false;
      auto v = pick_unassigned();
      if (!v) return true;
      for (Element e = 0; e < bound; ++e) {
        asg[*v] = e;
        if (solve()) return true;
      }
      asg[*v] = std::nullopt;
      return false;
    }
    // generic matrix: assign everything then evaluate
    auto v = pick_unassigned();
    if (!v) {
      std::vector<Element> full(total_vars);
      for (std::uint32_t i = 0; i < total_vars; ++i) full[i] = *asg[i];
      return eval_qf(frag, *generic_matrix, full);
    }
    for (Element e = 0; e < bound; ++e) {
      asg[*v] = e;
      if (solve()) return true;
    }
    asg[*v] = std::nullopt;
    return false;
  }
};

}  // namespace

std::optional<std::vector<Element>> eval_exists_bounded_witness(const FragmentView& f,
                                                                const ExistFormula& phi,
                                                                std::span<const Element> asg,
                                                                std::uint64_t bound) {
  if (bound > f.size()) throw PreconditionViolation("eval_exists_bounded: bound > fragment size");
  std::uint32_t total = std::max<std::uint32_t>(phi.matrix.var_count(), phi.free_vars);
  if (asg.size() < phi.free_vars)
    throw PreconditionViolation("eval_exists_bounded: missing free assignment");
  if (phi.bound_vars() == 0) {
    if (eval_qf(f, phi.matrix, asg)) return std::vector<Element>{};
    return std::nullopt;
  }
  ExistSearch search{f, bound, {}, nullptr, {}, total};
  search.asg.assign(total, std::nullopt);
  for (std::uint32_t i = 0; i < phi.free_vars; ++i) search.asg[i] = asg[i];
  if (phi.matrix.is_conjunction_of_literals()) {
    search.lits = phi.matrix.literals();
  } else {
    search.generic_matrix = &phi.matrix;
  }
  if (!search.solve()) return std::nullopt;
  std::vector<Element> out;
  for (std::uint32_t v = phi.free_vars; v < total; ++v)
    out.push_back(search.asg[v].value_or(0));
  return out;
}

bool eval_exists_bounded(const FragmentView& f, const ExistFormula& phi,
                         std::span<const Element> asg, std::uint64_t bound) {
  return eval_exists_bounded_witness(f, phi, asg, bound).has_value();
}

QFFormula atomic_diagram_formula(const FragmentView& f, const DiagramPartition& part,
                                 std::uint64_t tuple_cap) {
  // validate partition
  std::vector<int> role(f.size(), -1);
  std::vector<Term> term_of(f.size());
  auto assign_role = [&](const std::vector<Element>& xs, int r, std::uint32_t var_base) {
    std::uint32_t v = var_base;
    for (Element e : xs) {
      if (e >= f.size() || role[e] != -1)
        throw PreconditionViolation("atomic_diagram_formula: not a partition");
      role[e] = r;
      term_of[e] = (r == 0) ? Term::constant(e) : Term::variable(v++);
    }
  };
  assign_role(part.params, 0, 0);
  assign_role(part.exist, 1, 0);
  assign_role(part.frees, 2, static_cast<std::uint32_t>(part.exist.size()));
  for (Element e = 0; e < f.size(); ++e)
    if (role[e] == -1) throw PreconditionViolation("atomic_diagram_formula: element unassigned");

  std::uint64_t total = 0;
  for (std::size_t r = 0; r < f.relation_limit(); ++r) {
    std::uint64_t c = 1;
    for (std::size_t i = 0; i < f.signature().relation(r).arity; ++i) {
      c *= f.size();
      if (c > tuple_cap) throw std::length_error("atomic_diagram_formula beyond tuple cap");
    }
    total += c;
    if (total > tuple_cap) throw std::length_error("atomic_diagram_formula beyond tuple cap");
  }

  std::vector<std::pair<std::string, QFFormula>> conjuncts;
  for (std::size_t r = 0; r < f.relation_limit(); ++r) {
    std::size_t arity = f.signature().relation(r).arity;
    std::vector<Element> tup(arity, 0);
    bool done = f.size() == 0;
    while (!done) {
      std::vector<Term> args;
      args.reserve(arity);
      for (Element e : tup) args.push_back(term_of[e]);
      QFFormula a = QFFormula::atom(r, std::move(args));
      if (!f.fact(r, tup)) a = QFFormula::negate(std::move(a));
      conjuncts.push_back({a.serialize(), std::move(a)});
      std::size_t i = arity;
      while (i > 0) {
        --i;
        if (++tup[i] < f.size()) break;
        tup[i] = 0;
        if (i == 0) done = true;
      }
      if (arity == 0) done = true;
    }
  }
  std::sort(conjuncts.begin(), conjuncts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<QFFormula> fs;
  fs.reserve(conjuncts.size());
  for (auto& [s, g] : conjuncts) fs.push_back(std::move(g));
  return QFFormula::conj(std::move(fs));
}

}  // namespace pregeom
