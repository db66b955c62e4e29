#include "pregeom/good_copy.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <unordered_map>

#include "pregeom/groups.hpp"

namespace pregeom {

namespace {

// a candidate whose designated tuple goes t-dependent at its own minimal t
struct CandidateInvalid {
  std::uint64_t reveal_t;
};

}  // namespace

std::string to_string(StageProperty p) {
  switch (p) {
    case StageProperty::P1:
      return "P1";
    case StageProperty::P2:
      return "P2";
    case StageProperty::P3:
      return "P3";
    case StageProperty::P4:
      return "P4";
    case StageProperty::P5:
      return "P5";
    case StageProperty::P6:
      return "P6";
  }
  return "?";
}

ExistFormula SafenessFormula::expand(const FragmentView& frag, std::uint64_t tuple_cap) const {
  DiagramPartition part = partition;
  if (part.exist.empty()) {
    std::set<Element> used(part.params.begin(), part.params.end());
    used.insert(part.frees.begin(), part.frees.end());
    for (Element e = 0; e < t; ++e)
      if (!used.count(e)) part.exist.push_back(e);
  }
  ExistFormula f;
  QFFormula theta = atomic_diagram_formula(frag, part, tuple_cap);
  // atomic_diagram_formula numbers exist vars 0.. and free vars after; the
  // existential block is the exist part, so frees must come first for the
  // ExistFormula convention (free vars below bound vars). Renumber: exist
  // variables become the top block.
  std::uint32_t n_exist = static_cast<std::uint32_t>(part.exist.size());
  std::uint32_t n_free = static_cast<std::uint32_t>(part.frees.size());
  std::function<QFFormula(const QFFormula&)> remap = [&](const QFFormula& g) -> QFFormula {
    switch (g.kind()) {
      case QFFormula::Kind::Atom: {
        std::vector<Term> args;
        for (const Term& t : g.args()) {
          if (t.kind == Term::Kind::Var) {
            std::uint32_t v = t.var;
            args.push_back(Term::variable(v < n_exist ? n_free + v : v - n_exist));
          } else {
            args.push_back(t);
          }
        }
        return QFFormula::atom(g.rel(), std::move(args));
      }
      case QFFormula::Kind::True:
        return g;
      case QFFormula::Kind::Not:
        return QFFormula::negate(remap(g.children().front()));
      default: {
        std::vector<QFFormula> kids;
        for (const auto& c : g.children()) kids.push_back(remap(c));
        return g.kind() == QFFormula::Kind::And ? QFFormula::conj(std::move(kids))
                                                : QFFormula::disj(std::move(kids));
      }
    }
  };
  f.matrix = remap(theta);
  f.free_vars = n_free;
  return f;
}

std::uint64_t SafenessFormula::matrix_conjunct_count(const FragmentView& frag) const {
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < frag.relation_limit(); ++r) {
    std::uint64_t c = 1;
    for (std::size_t i = 0; i < frag.signature().relation(r).arity; ++i) c *= frag.size();
    total += c;
  }
  return total;
}

GoodCopy::GoodCopy(std::shared_ptr<const Presentation> pres,
                   std::shared_ptr<ClosureApprox> closure,
                   std::shared_ptr<const ConditionGOracle> oracle, GoodCopyBudgets budgets)
    : pres_(std::move(pres)),
      closure_(std::move(closure)),
      oracle_(std::move(oracle)),
      budgets_(budgets) {}

std::size_t GoodCopy::certified_prefix_(const StageState& st) const {
  auto imgs = st.designated_images();
  std::size_t certified = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    std::vector<Element> prefix(imgs.begin(), imgs.begin() + i + 1);
    auto c = oracle_->certify_independent(prefix, {});
    if (c.has_value() && *c)
      certified = i + 1;
    else
      break;
  }
  return certified;
}

SafenessFormula GoodCopy::build_safeness_formula(const StageState& state, std::size_t i) const {
  if (i >= state.stage)
    throw PreconditionViolation("build_safeness_formula: index must be below the stage");
  SafenessFormula psi;
  psi.index = i;
  psi.t = state.t;
  auto imgs = state.designated_images();
  std::vector<Element> prefix(imgs.begin(), imgs.begin() + i + 1);
  std::set<Element> params;
  for (Element x : state.tau.images()) {
    if (x < state.t && closure_->member(x, prefix, state.t)) params.insert(x);
  }
  std::set<Element> frees(imgs.begin() + i + 1, imgs.end());
  for (Element x : frees) params.erase(x);
  psi.partition.params.assign(params.begin(), params.end());
  psi.partition.frees.assign(imgs.begin() + i + 1, imgs.end());
  // the existential block is everything else in the fragment; it is left
  // implicit here and materialized only when the formula is expanded
  return psi;
}

namespace {

// positive facts of the pullback over the map's domain; for the group
// classes the addition graph is enumerated through pairwise sums instead of
// triple enumeration
std::vector<Fact> committed_positive_facts(const Presentation& pres, const PartialMap& tau,
                                           std::uint64_t t, std::size_t rel_limit) {
  std::vector<Fact> facts;
  std::size_t n = tau.domain_size();
  const auto* group = dynamic_cast<const GroupPresentation*>(&pres);
  for (std::size_t r = 0; r < rel_limit; ++r) {
    if (group && r == kRelAdd) {
      std::unordered_map<std::size_t, std::vector<std::size_t>> by_hash;
      std::vector<SparseVec> vecs(n);
      for (std::size_t i = 0; i < n; ++i) {
        vecs[i] = group->vec(tau.image(i));
        by_hash[vecs[i].hash()].push_back(i);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (tau.image(i) >= t) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (tau.image(j) >= t) continue;
          SparseVec sum = vecs[i] + vecs[j];
          auto it = by_hash.find(sum.hash());
          if (it == by_hash.end()) continue;
          for (std::size_t k : it->second) {
            if (tau.image(k) < t && vecs[k] == sum)
              facts.push_back(Fact{r, {i, j, k}});
          }
        }
      }
      continue;
    }
    std::size_t arity = pres.signature().relation(r).arity;
    std::vector<Element> tup(arity, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
      if (pos == arity) {
        std::vector<Element> args(arity);
        for (std::size_t q2 = 0; q2 < arity; ++q2) args[q2] = tau.image(tup[q2]);
        for (Element a : args)
          if (a >= t) return;
        if (pres.fact(r, args)) {
          std::vector<Element> dom(tup.begin(), tup.end());
          facts.push_back(Fact{r, dom});
        }
        return;
      }
      for (std::size_t v = 0; v < n; ++v) {
        tup[pos] = v;
        rec(pos + 1);
      }
    };
    rec(0);
  }
  std::sort(facts.begin(), facts.end());
  facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
  return facts;
}

}  // namespace

PropertyReport GoodCopy::check_properties(const StageState* prev, const StageState& next,
                                          std::uint64_t p5_budget,
                                          const std::vector<std::size_t>* moved_hint) const {
  PropertyReport rep;
  auto violated = [&](StageProperty p) {
    if (std::find(rep.violated.begin(), rep.violated.end(), p) == rep.violated.end())
      rep.violated.push_back(p);
  };
  auto imgs = next.designated_images();
  // P1
  if (!closure_->is_t_independent(imgs, next.t)) violated(StageProperty::P1);
  // P2
  for (Element e = 0; e < next.stage; ++e) {
    if (!next.tau.preimage(e)) {
      violated(StageProperty::P2);
      break;
    }
  }
  for (Element x : next.tau.images()) {
    if (x >= next.t || !closure_->member(x, imgs, next.t)) {
      violated(StageProperty::P2);
      break;
    }
  }
  if (prev) {
    // P3: committed atoms (and all bounded-existential facts over them) must
    // persist. When tau extends and t grows this is structural; otherwise the
    // committed positive diagrams must agree on the previous domain.
    bool extends = next.t >= prev->t && next.tau.domain_size() >= prev->tau.domain_size();
    if (extends) {
      for (std::size_t i = 0; i < prev->tau.domain_size(); ++i)
        if (next.tau.image(i) != prev->tau.image(i)) extends = false;
    }
    if (!extends) {
      std::size_t rl = std::min<std::size_t>(
          {prev->stage, pres_->signature().size()});
      PartialMap prev_map(std::vector<Element>(prev->tau.images().begin(),
                                               prev->tau.images().end()));
      std::vector<Element> next_prefix(next.tau.images().begin(),
                                       next.tau.images().begin() + prev->tau.domain_size());
      auto before = committed_positive_facts(*pres_, prev_map, prev->t, rl);
      auto after = committed_positive_facts(*pres_, PartialMap(next_prefix), next.t, rl);
      if (before != after) violated(StageProperty::P3);
    }
    // P4: a moved element must have had every witnessed governing prefix go
    // t-dependent
    auto prev_imgs = prev->designated_images();
    std::size_t shared = std::min(prev->tau.domain_size(), next.tau.domain_size());
    for (std::size_t b = 0; b < shared; ++b) {
      if (next.tau.image(b) == prev->tau.image(b)) continue;
      for (std::size_t i = 0; i < prev_imgs.size(); ++i) {
        std::vector<Element> prefix(prev_imgs.begin(), prev_imgs.begin() + i + 1);
        if (!closure_->member(prev->tau.image(b), prefix, prev->t)) continue;
        if (closure_->is_t_independent(prefix, next.t)) {
          violated(StageProperty::P4);
          break;
        }
      }
    }
    (void)moved_hint;
  }
  // P6
  if (!closure_->has_least_span_at(imgs, next.t)) violated(StageProperty::P6);
  // P5: when the whole designated tuple is certified exactly independent,
  // every safeness formula is witnessed by the identity assignment (the kept
  // parameters always lie in the true span of their prefix, since stage
  // approximations are sound)
  auto certified = oracle_->certify_independent(imgs, {});
  if (certified.has_value() && *certified) {
    for (std::size_t i = 0; i < next.stage; ++i) rep.p5_budgets.push_back({i, 1});
    return rep;
  }
  FiniteFragment frag(pres_, next.t);
  for (std::size_t i = 0; i < next.stage; ++i) {
    SafenessFormula psi = build_safeness_formula(next, i);
    SemiDecision sd = oracle_->safeness_in_diagram(frag, psi, p5_budget);
    rep.p5_budgets.push_back({i, sd.budget_used});
    if (!sd.confirmed) rep.p5_unconfirmed.push_back(i);
  }
  return rep;
}

StageState GoodCopy::initial_stage_() const {
  StageState st;
  st.stage = 0;
  Element u0 = 0;
  bool found = false;
  for (Element e = 0; e < 4096; ++e) {
    auto c = oracle_->certify_independent(std::vector<Element>{e}, {});
    if (c.has_value() && *c) {
      u0 = e;
      found = true;
      break;
    }
  }
  if (!found) throw BudgetExhausted("stage 0: no certified independent element found");
  st.tau = PartialMap({u0});
  st.designated = {0};
  st.t = 0;
  return st;
}

std::uint64_t GoodCopy::minimal_t_for_(const StageState& candidate, std::uint64_t t_min) const {
  auto imgs = candidate.designated_images();
  std::uint64_t t = std::max<std::uint64_t>(t_min, candidate.stage + 2);
  for (Element x : imgs) t = std::max(t, x + 1);
  for (Element x : candidate.tau.images()) t = std::max(t, x + 1);
  // the threshold cache stays valid while the designated tuple only grows at
  // the end (its ids ascend); otherwise start over
  bool extends = imgs.size() >= threshold_prefix_.size() &&
                 std::equal(threshold_prefix_.begin(), threshold_prefix_.end(), imgs.begin());
  for (std::size_t i = 1; extends && i < imgs.size(); ++i)
    if (imgs[i] <= imgs[i - 1]) extends = false;
  if (!extends) member_threshold_.clear();
  threshold_prefix_ = imgs;
  for (int iter = 0; iter < 64; ++iter) {
    if (!closure_->is_t_independent(imgs, t)) throw CandidateInvalid{t};
    std::uint64_t need = t;
    auto require_member = [&](Element x, std::span<const Element> ys) -> bool {
      MinFire mf = closure_->min_fire(x, ys, std::max<std::uint64_t>(t, 4096));
      switch (mf.kind) {
        case MinFire::Kind::Never:
          return false;
        case MinFire::Kind::At:
          need = std::max(need, mf.t);
          return true;
        case MinFire::Kind::BeyondCap:
          throw BudgetExhausted("minimal_t: membership beyond certified bound");
      }
      return false;
    };
    // membership over the designated tuple with the first-witnessed-threshold
    // cache: a pattern over an earlier prefix still fires over any appending
    // extension at the same stage, since the parameter positions are stable
    auto require_member_cached = [&](Element x) -> bool {
      auto it = member_threshold_.find(x);
      if (it != member_threshold_.end()) {
        need = std::max(need, it->second);
        return true;
      }
      MinFire mf = closure_->min_fire(x, imgs, std::max<std::uint64_t>(t, 4096));
      switch (mf.kind) {
        case MinFire::Kind::Never:
          return false;
        case MinFire::Kind::At:
          member_threshold_[x] = mf.t;
          need = std::max(need, mf.t);
          return true;
        case MinFire::Kind::BeyondCap:
          throw BudgetExhausted("minimal_t: membership beyond certified bound");
      }
      return false;
    };
    bool feasible = true;
    // P2-right for every range element over the full designated tuple
    for (Element x : candidate.tau.images()) {
      if (!require_member_cached(x)) {
        feasible = false;
        break;
      }
    }
    if (!feasible) throw PreconditionViolation("minimal_t: range outside designated span");
    // reflexive memberships put designated prefixes inside their own closures
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      std::vector<Element> prefix(imgs.begin(), imgs.begin() + i + 1);
      for (std::size_t j = 0; j <= i; ++j) {
        if (!require_member(imgs[j], prefix))
          throw PreconditionViolation("minimal_t: reflexive membership failed");
      }
    }
    // every element below the newest designated image spans from the prefix
    if (imgs.size() >= 2) {
      std::vector<Element> prefix(imgs.begin(), imgs.end() - 1);
      for (Element e = 0; e < imgs.back(); ++e) {
        auto it = member_threshold_.find(e);
        if (it != member_threshold_.end()) {
          need = std::max(need, it->second);
          continue;
        }
        MinFire mf = closure_->min_fire(e, prefix, std::max<std::uint64_t>(t, 4096));
        if (mf.kind == MinFire::Kind::At) {
          member_threshold_[e] = mf.t;
          need = std::max(need, mf.t);
        }
        // elements outside the span stay outside; they must exceed the new
        // image in the least-span order, which P6 validates below
      }
    }
    if (need > t) {
      t = need;
      continue;
    }
    // P6 at this t
    if (closure_->has_least_span_at(imgs, t)) return t;
    // find the blocking membership and jump
    std::vector<Element> ns = closure_->least_span_witnesses(t, imgs.size() - 1);
    bool bumped = false;
    for (std::size_t i = 0; i < imgs.size() && !bumped; ++i) {
      std::vector<Element> prefix(imgs.begin(), imgs.begin() + i + 1);
      if (i < ns.size()) {
        MinFire a = closure_->min_fire(ns[i], prefix, std::max<std::uint64_t>(t, 4096));
        if (a.kind == MinFire::Kind::At && a.t > t) {
          t = a.t;
          bumped = true;
          break;
        }
        std::vector<Element> prefix_n(imgs.begin(), imgs.begin() + i);
        prefix_n.push_back(ns[i]);
        MinFire b = closure_->min_fire(imgs[i], prefix_n, std::max<std::uint64_t>(t, 4096));
        if (b.kind == MinFire::Kind::At && b.t > t) {
          t = b.t;
          bumped = true;
          break;
        }
      }
    }
    if (!bumped) {
      // the n-sequence points outside the designated span: the candidate can
      // only work once the blocking witness reveals as dependent and leaves
      // the sequence
      std::vector<Element> ns2 = closure_->least_span_witnesses(t, imgs.size() - 1);
      for (std::size_t i = 0; i < imgs.size(); ++i) {
        if (i >= ns2.size()) break;
        std::vector<Element> prefix(imgs.begin(), imgs.begin() + i + 1);
        MinFire a = closure_->min_fire(ns2[i], prefix, std::max<std::uint64_t>(t, 4096));
        if (a.kind == MinFire::Kind::Never) {
          std::vector<Element> nprefix(ns2.begin(), ns2.begin() + i);
          MinFire flip = closure_->min_fire(ns2[i], nprefix, std::max<std::uint64_t>(t, 4096));
          std::uint64_t reveal = (flip.kind == MinFire::Kind::At && flip.t > t) ? flip.t : t + 1;
          throw CandidateInvalid{reveal};
        }
      }
      t += 1 + t / 4;
    }
  }
  throw BudgetExhausted("minimal_t: no stabilizing t within the iteration budget");
}

StageState GoodCopy::next_stage(const StageState& state,
                                std::vector<std::size_t>* moved_out,
                                PropertyReport* report_out) const {
  std::uint64_t s_next = state.stage + 1;
  std::uint64_t t_floor = std::max<std::uint64_t>(state.t + 1, s_next + 2);
  auto prev_imgs = state.designated_images();

  for (int attempt = 0; attempt < 96; ++attempt) {
    // earliest stage at which the previous designated tuple goes t-dependent
    std::optional<std::uint64_t> t_dep;
    for (std::size_t j = 0; j < prev_imgs.size(); ++j) {
      std::vector<Element> rest;
      for (std::size_t i = 0; i < prev_imgs.size(); ++i)
        if (i != j) rest.push_back(prev_imgs[i]);
      MinFire mf = closure_->min_fire(prev_imgs[j], rest, 4096);
      if (mf.kind == MinFire::Kind::At)
        t_dep = t_dep ? std::min(*t_dep, mf.t) : mf.t;
    }

    StageState cand;
    std::vector<std::size_t> moved;
    bool repair = t_dep && *t_dep <= t_floor;
    if (!repair) {
      // fast path: extend tau, designate the least element outside the span
      cand.stage = s_next;
      cand.tau = state.tau;
      cand.designated = state.designated;
      // find the least element outside cl_t of the previous images; use the
      // floor t first, the minimal-t loop bumps as needed
      std::uint64_t t_probe = t_floor;
      Element fresh = 0;
      for (Element e = 0;; ++e) {
        if (std::find(prev_imgs.begin(), prev_imgs.end(), e) != prev_imgs.end()) continue;
        if (!closure_->member(e, prev_imgs, t_probe)) {
          fresh = e;
          break;
        }
        if (e > t_probe + 4096) throw BudgetExhausted("next_stage: no fresh element found");
      }
      if (!cand.tau.preimage(fresh)) cand.tau.push_back(fresh);
      cand.designated.push_back(*cand.tau.preimage(fresh));
      // complete the range {0..s_next-1}
      for (Element e = 0; e < s_next; ++e)
        if (!cand.tau.preimage(e)) cand.tau.push_back(e);
      try {
        cand.t = minimal_t_for_(cand, t_floor);
      } catch (const CandidateInvalid& ci) {
        // the fresh pick hid a dependence that reveals below the required t
        t_floor = std::max(t_floor + 1, ci.reveal_t);
        continue;
      } catch (const PreconditionViolation&) {
        if (t_dep) {
          t_floor = std::max(t_floor, *t_dep);
          continue;
        }
        throw;
      }
      if (t_dep && *t_dep <= cand.t) {
        t_floor = std::max(t_floor, *t_dep);
        continue;  // the candidate's own bound crosses the reveal: repair instead
      }
      PropertyReport rep = check_properties(&state, cand, budgets_.p5_budget, &moved);
      if (rep.ok()) {
        if (moved_out) *moved_out = moved;
        if (report_out) *report_out = rep;
        return cand;
      }
      if (!rep.p5_unconfirmed.empty() && rep.violated.empty()) {
        // stall: confirmation needs a hidden dependence of the candidate
        // tuple to reveal; jump to the earliest such stage
        auto cand_imgs = cand.designated_images();
        std::optional<std::uint64_t> cand_dep;
        for (std::size_t j = 0; j < cand_imgs.size(); ++j) {
          std::vector<Element> rest;
          for (std::size_t i2 = 0; i2 < cand_imgs.size(); ++i2)
            if (i2 != j) rest.push_back(cand_imgs[i2]);
          MinFire mf = closure_->min_fire(cand_imgs[j], rest, 4096);
          if (mf.kind == MinFire::Kind::At && mf.t > cand.t)
            cand_dep = cand_dep ? std::min(*cand_dep, mf.t) : mf.t;
        }
        if (cand_dep) {
          t_floor = std::max(t_floor, *cand_dep);
          continue;
        }
        if (t_dep) {
          t_floor = std::max(t_floor, *t_dep);
          continue;
        }
        throw BudgetExhausted("next_stage: safeness unconfirmed with no reveal in sight");
      }
      throw std::logic_error("next_stage: fast-path candidate failed " +
                             (rep.violated.empty() ? std::string("?")
                                                   : to_string(rep.violated.front())));
    }

    // repair path at t >= reveal
    std::size_t certified = certified_prefix_(state);
    if (certified == 0) throw std::logic_error("next_stage: no certified prefix to keep");
    std::size_t i_star = certified - 1;
    SafenessFormula psi = build_safeness_formula(state, i_star);
    // replacement basis: continue the least-span sequence past the kept part
    std::uint64_t t_new = std::max(t_floor, *t_dep);
    std::vector<Element> ns = closure_->least_span_witnesses(t_new, state.stage);
    if (ns.size() < state.stage + 1)
      throw BudgetExhausted("next_stage: least-span sequence too short for repair");
    std::vector<Element> replacement(ns.begin() + certified, ns.end());
    // extras: every old domain element outside the kept parameter set
    std::set<Element> kept(psi.partition.params.begin(), psi.partition.params.end());
    std::vector<Element> extras;
    std::vector<std::size_t> extra_slots;
    for (std::size_t b = 0; b < state.tau.domain_size(); ++b) {
      Element img = state.tau.image(b);
      bool is_designated_tail = false;
      for (std::size_t i = certified; i < state.designated.size(); ++i)
        if (state.designated[i] == b) is_designated_tail = true;
      if (is_designated_tail || kept.count(img)) continue;
      extras.push_back(img);
      extra_slots.push_back(b);
    }
    FiniteFragment prev_frag(pres_, state.t);
    auto rehomed = oracle_->local_witness(prev_frag, psi, replacement, extras);
    if (!rehomed) throw BudgetExhausted("next_stage: repair witness unavailable");
    cand.stage = s_next;
    std::vector<Element> images(state.tau.images());
    for (std::size_t i = certified; i < state.designated.size(); ++i)
      images[state.designated[i]] = rehomed->slot_images[i - certified];
    for (std::size_t k = 0; k < extra_slots.size(); ++k)
      images[extra_slots[k]] = rehomed->extra_images[k];
    cand.tau = PartialMap(std::move(images));
    cand.designated = state.designated;
    for (std::size_t b = 0; b < state.tau.domain_size(); ++b)
      if (cand.tau.image(b) != state.tau.image(b)) moved.push_back(b);
    // extend with a new designated element and complete the range
    auto imgs_now = cand.designated_images();
    Element fresh = 0;
    for (Element e = 0;; ++e) {
      if (cand.tau.preimage(e)) {
        bool desig = false;
        for (std::size_t i = 0; i < cand.designated.size(); ++i)
          if (cand.tau.image(cand.designated[i]) == e) desig = true;
        if (desig) continue;
      }
      if (!closure_->member(e, imgs_now, t_new)) {
        fresh = e;
        break;
      }
      if (e > t_new + 4096) throw BudgetExhausted("next_stage: no fresh element found");
    }
    if (!cand.tau.preimage(fresh)) cand.tau.push_back(fresh);
    cand.designated.push_back(*cand.tau.preimage(fresh));
    for (Element e = 0; e < s_next; ++e)
      if (!cand.tau.preimage(e)) cand.tau.push_back(e);
    try {
      cand.t = minimal_t_for_(cand, t_new);
    } catch (const CandidateInvalid& ci) {
      t_floor = std::max(t_floor + 1, ci.reveal_t);
      continue;
    }
    PropertyReport rep = check_properties(&state, cand, budgets_.p5_budget, &moved);
    if (rep.ok()) {
      if (moved_out) *moved_out = moved;
      if (report_out) *report_out = rep;
      return cand;
    }
    std::string names;
    for (auto v : rep.violated) names += to_string(v) + " ";
    throw std::logic_error("next_stage: repair candidate failed " + names);
  }
  throw BudgetExhausted("next_stage: attempt budget exhausted");
}

GoodCopyResult GoodCopy::run(std::uint64_t stages) const {
  GoodCopyResult res;
  StageState st;
  try {
    st = initial_stage_();
    st.t = minimal_t_for_(st, 2);
    PropertyReport rep0 = check_properties(nullptr, st, budgets_.p5_budget, nullptr);
    if (!rep0.ok()) {
      res.status = RunStatus::PropertyViolation;
      res.message = "stage 0 failed its property checks";
      return res;
    }
    StageEvent ev0;
    ev0.state = st;
    ev0.certified_prefix = certified_prefix_(st);
    ev0.p5_budgets = rep0.p5_budgets;
    // governed set: domain elements inside the certified prefix closure
    {
      auto imgs = st.designated_images();
      std::vector<Element> prefix(imgs.begin(), imgs.begin() + ev0.certified_prefix);
      for (std::size_t b = 0; b < st.tau.domain_size(); ++b)
        if (!prefix.empty() && closure_->member(st.tau.image(b), prefix, st.t))
          ev0.governed.push_back(b);
    }
    res.trace.push_back(std::move(ev0));
    const bool timing = std::getenv("PREGEOM_TIMING") != nullptr;
    for (std::uint64_t s = 1; s <= stages; ++s) {
      auto t0 = std::chrono::steady_clock::now();
      std::vector<std::size_t> moved;
      PropertyReport rep;
      StageState nxt = next_stage(st, &moved, &rep);
      if (timing) {
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
        std::cerr << "stage " << s << ": " << ms << " ms, t=" << nxt.t << "\n";
      }
      StageEvent ev;
      ev.state = nxt;
      ev.certified_prefix = certified_prefix_(nxt);
      ev.moved = std::move(moved);
      ev.p5_budgets = rep.p5_budgets;
      auto imgs = nxt.designated_images();
      std::vector<Element> prefix(imgs.begin(), imgs.begin() + ev.certified_prefix);
      for (std::size_t b = 0; b < nxt.tau.domain_size(); ++b)
        if (!prefix.empty() && closure_->member(nxt.tau.image(b), prefix, nxt.t))
          ev.governed.push_back(b);
      res.trace.push_back(std::move(ev));
      st = std::move(nxt);
    }
    res.status = RunStatus::Complete;
  } catch (const BudgetExhausted& e) {
    res.status = RunStatus::Resumable;
    res.message = e.what();
  } catch (const std::logic_error& e) {
    res.status = RunStatus::PropertyViolation;
    res.message = e.what();
  }
  res.final_state = st;
  // committed diagram of G over the final domain and relation horizon
  if (!res.trace.empty()) {
    const StageState& fin = res.trace.back().state;
    std::size_t rl = std::min<std::size_t>(fin.stage == 0 ? 0 : fin.stage,
                                           pres_->signature().size());
    auto facts = committed_positive_facts(*pres_, fin.tau, fin.t, rl);
    res.committed = FactSet(pres_->signature(), fin.tau.domain_size(), std::move(facts));
  }
  return res;
}

std::map<std::size_t, std::pair<std::uint64_t, bool>> GoodCopy::stabilization_report(
    const std::vector<StageEvent>& trace) {
  std::map<std::size_t, std::pair<std::uint64_t, bool>> out;
  std::map<std::size_t, std::uint64_t> protected_since;  // domain -> first stage governed
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const StageEvent& ev = trace[k];
    std::uint64_t s = ev.state.stage;
    // appearances count as changes
    std::size_t prev_dom = k == 0 ? 0 : trace[k - 1].state.tau.domain_size();
    for (std::size_t b = prev_dom; b < ev.state.tau.domain_size(); ++b)
      out[b] = {s, false};
    for (std::size_t b : ev.moved) {
      bool flagged = false;
      auto it = protected_since.find(b);
      if (it != protected_since.end() && it->second < s) flagged = true;
      out[b] = {s, flagged};
    }
    for (std::size_t b : ev.governed)
      if (!protected_since.count(b)) protected_since[b] = s;
  }
  return out;
}

}  // namespace pregeom
