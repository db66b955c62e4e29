#include <doctest.h>

#include "pregeom/formula.hpp"
#include "pregeom/tfag.hpp"

using namespace pregeom;

namespace {

std::shared_ptr<TfagPresentation> stdq() { return tfag_standard(); }

}  // namespace

TEST_CASE("fragment(P, 0) is empty and fragments are monotone") {
  auto p = stdq();
  FiniteFragment f0(p, 0);
  CHECK(f0.materialize().facts().empty());
  // restriction of fragment(t') to t agrees with fragment(t)
  FactSet f8 = FiniteFragment(p, 8).materialize();
  FactSet f12 = FiniteFragment(p, 12).materialize();
  for (const Fact& f : f8.facts()) CHECK(f12.fact(f.rel, f.args));
  for (const Fact& f : f12.facts()) {
    bool inside = true;
    for (Element e : f.args)
      if (e >= 8) inside = false;
    if (inside && f.rel < f8.relation_limit()) CHECK(f8.fact(f.rel, f.args));
  }
}

TEST_CASE("addition facts agree with exact vector arithmetic on the first 10 elements") {
  auto p = stdq();
  FiniteFragment frag(p, 10);
  for (Element a = 0; a < 10; ++a)
    for (Element b = 0; b < 10; ++b)
      for (Element c = 0; c < 10; ++c) {
        bool truth = p->vec(a) + p->vec(b) == p->vec(c);
        std::vector<Element> args{a, b, c};
        CHECK(frag.fact(kRelAdd, args) == truth);
      }
}

TEST_CASE("eval_qf basics") {
  auto p = stdq();
  FiniteFragment frag(p, 8);
  // empty conjunction is true
  CHECK(eval_qf(frag, QFFormula::truth(), {}));
  // a present atomic fact: 1 + 1 = 5 encodes e0 + e0 = 2e0
  QFFormula atom =
      QFFormula::atom(kRelAdd, {Term::variable(0), Term::variable(0), Term::variable(1)});
  std::vector<Element> asg{1, 5};
  CHECK(eval_qf(frag, atom, asg));
  std::vector<Element> bad{1, 6};
  CHECK(!eval_qf(frag, atom, bad));
  // out-of-fragment element is a precondition violation
  std::vector<Element> oob{1, 9};
  CHECK_THROWS_AS(eval_qf(FiniteFragment(p, 2), atom, oob), PreconditionViolation);
}

TEST_CASE("eval_exists_bounded is monotone in the bound") {
  auto p = stdq();
  FiniteFragment frag(p, 12);
  // exists y: x + x = y
  ExistFormula phi;
  phi.free_vars = 1;
  phi.matrix =
      QFFormula::atom(kRelAdd, {Term::variable(0), Term::variable(0), Term::variable(1)});
  std::vector<Element> asg{1};
  bool seen = false;
  for (std::uint64_t b = 0; b <= 12; ++b) {
    bool now = eval_exists_bounded(frag, phi, asg, b);
    if (seen) CHECK(now);
    if (now) seen = true;
  }
  CHECK(seen);
  // zero existential variables with 0 bound
  ExistFormula none;
  none.free_vars = 0;
  none.matrix = QFFormula::truth();
  CHECK(eval_exists_bounded(frag, none, {}, 0));
}

TEST_CASE("pullback composes and the identity pullback restricts") {
  auto p = stdq();
  FiniteFragment frag(p, 12);
  PartialMap tau({0, 1, 2, 5});
  FactSet direct = pullback(frag, tau);
  // tau = sigma after rho with rho identity on a smaller segment
  PartialMap rho({0, 1, 2, 3});
  FactSet once = pullback(frag, PartialMap({0, 1, 2, 5}));
  CHECK(direct == once);
  // identity map: result equals the restriction
  std::vector<Element> idmap;
  for (Element e = 0; e < 6; ++e) idmap.push_back(e);
  FactSet restr = pullback(frag, PartialMap(idmap));
  FactSet small = FiniteFragment(p, 6).materialize();
  for (const Fact& f : restr.facts()) CHECK(small.fact(f.rel, f.args));
}

TEST_CASE("pullback of composed maps equals composition") {
  auto p = stdq();
  FiniteFragment frag(p, 12);
  // sigma: initial segment -> elements; rho: initial segment -> dom(sigma)
  std::vector<Element> sigma_imgs{0, 1, 5, 2, 6};
  PartialMap sigma(sigma_imgs);
  std::vector<Element> rho_imgs{2, 0, 4};
  // composed: i -> sigma(rho(i))
  std::vector<Element> comp;
  for (Element r : rho_imgs) comp.push_back(sigma_imgs[r]);
  FactSet lhs = pullback(frag, PartialMap(comp));
  FactSet mid = pullback(frag, sigma);
  FactSet rhs = pullback(mid, PartialMap(rho_imgs));
  CHECK(lhs == rhs);
}

TEST_CASE("non-injective pullback maps are rejected") {
  auto p = stdq();
  CHECK_THROWS_AS(PartialMap({1, 1}), PreconditionViolation);
}

TEST_CASE("atomic diagram round-trips under the identity assignment") {
  auto p = stdq();
  FiniteFragment frag(p, 5);
  DiagramPartition part;
  part.params = {0, 1};
  part.exist = {2, 3};
  part.frees = {4};
  QFFormula theta = atomic_diagram_formula(frag, part);
  // identity assignment: exist vars 0,1 -> elements 2,3; free var 2 -> 4
  std::vector<Element> asg{2, 3, 4};
  CHECK(eval_qf(frag, theta, asg));
  // empty fragment gives the empty conjunction
  DiagramPartition none;
  CHECK(atomic_diagram_formula(FiniteFragment(p, 0), none) == QFFormula::truth());
}

TEST_CASE("is_partial_isomorphism distinguishes relabelings from fact breaks") {
  auto p = stdq();
  FiniteFragment frag(p, 10);
  std::vector<std::pair<Element, Element>> ident;
  for (Element e = 0; e < 8; ++e) ident.push_back({e, e});
  CHECK(is_partial_isomorphism(frag, frag, ident));
  // swapping 0 (zero vector) with 1 (e0) breaks the zero fact
  std::vector<std::pair<Element, Element>> swapped{{0, 1}, {1, 0}};
  CHECK(!is_partial_isomorphism(frag, frag, swapped));
}

TEST_CASE("fragment CSV export lists facts with relation names") {
  auto p = stdq();
  std::string csv = fragment_to_csv(FiniteFragment(p, 3));
  CHECK(csv.find("add,0,0,0") != std::string::npos);
  CHECK(csv.find("zero,0") != std::string::npos);
}

TEST_CASE("formula serialization is canonical in variable numbering") {
  QFFormula a =
      QFFormula::atom(kRelAdd, {Term::variable(7), Term::variable(7), Term::variable(2)});
  QFFormula b =
      QFFormula::atom(kRelAdd, {Term::variable(0), Term::variable(0), Term::variable(1)});
  CHECK(a.serialize() == b.serialize());
  CHECK(a.canonicalized() == b);
}
