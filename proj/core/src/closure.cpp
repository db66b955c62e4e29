#include "pregeom/closure.hpp"

#include <algorithm>
#include <set>

namespace pregeom {

std::vector<Element> ClosureApprox::canonical_set_(std::span<const Element> ys) const {
  std::vector<Element> v(ys.begin(), ys.end());
  if (!std::is_sorted(v.begin(), v.end())) std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool ClosureApprox::member(Element x, std::span<const Element> ys, std::uint64_t t) const {
  if (x >= t) return false;
  auto key = std::make_pair(x, canonical_set_(ys));
  auto interpret = [&](const MinFire& mf) -> bool {
    switch (mf.kind) {
      case MinFire::Kind::Never:
        return false;
      case MinFire::Kind::At:
        return t >= mf.t;
      case MinFire::Kind::BeyondCap:
        if (t <= mf.t) return false;
        throw BudgetExhausted("cl_t membership beyond certified bound");
    }
    return false;
  };
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = fire_memo_.find(key);
    if (it != fire_memo_.end()) return interpret(it->second);
  }
  if (auto a = family_->accel_min_fire(x, key.second)) {
    std::lock_guard<std::mutex> lock(mu_);
    fire_memo_[key] = *a;
    return interpret(*a);
  }
  if (auto a = family_->accel_member(x, key.second, t)) return *a;
  return member_generic(x, key.second, t);
}

bool ClosureApprox::member_generic(Element x, std::span<const Element> ys,
                                   std::uint64_t t) const {
  if (x >= t) return false;
  auto key = std::make_pair(x, canonical_set_(ys));
  const auto& Y = key.second;
  FiniteFragment frag(pres_, t);
  std::vector<Element> asg;
  asg.push_back(x);
  asg.insert(asg.end(), Y.begin(), Y.end());
  for (std::uint64_t k = 0; k <= t; ++k) {
    FamilyFormula ff = family_->formula(Y.size(), k);
    if (ff.padding) continue;
    if (ff.formula.matrix.rel_limit() > frag.relation_limit()) continue;
    // a free variable occurring in the matrix must name an element < t
    bool occurs_out = false;
    std::vector<bool> occurs(asg.size(), false);
    std::function<void(const QFFormula&)> scan = [&](const QFFormula& g) {
      if (g.kind() == QFFormula::Kind::Atom) {
        for (const Term& term : g.args())
          if (term.kind == Term::Kind::Var && term.var < occurs.size()) occurs[term.var] = true;
      }
      for (const auto& c : g.children()) scan(c);
    };
    scan(ff.formula.matrix);
    for (std::size_t i = 0; i < asg.size(); ++i)
      if (occurs[i] && asg[i] >= t) occurs_out = true;
    if (occurs_out) continue;
    if (eval_exists_bounded(frag, ff.formula, asg, t)) return true;
  }
  return false;
}

MinFire ClosureApprox::min_fire(Element x, std::span<const Element> ys,
                                std::uint64_t scan_cap) const {
  auto key = std::make_pair(x, canonical_set_(ys));
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = fire_memo_.find(key);
    if (it != fire_memo_.end()) return it->second;
  }
  if (auto a = family_->accel_min_fire(x, key.second)) {
    std::lock_guard<std::mutex> lock(mu_);
    fire_memo_[key] = *a;
    return *a;
  }
  // generic: scan stages upward, resuming from previous scans
  std::uint64_t from = 1;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = scanned_false_.find(key);
    if (it != scanned_false_.end()) from = it->second + 1;
  }
  for (std::uint64_t t = from; t <= scan_cap; ++t) {
    if (member_generic(x, key.second, t)) {
      // earliest stage within this scan; stages below `from` were already false
      std::lock_guard<std::mutex> lock(mu_);
      fire_memo_[key] = MinFire::at(t);
      return MinFire::at(t);
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  scanned_false_[key] = scan_cap;
  return MinFire::beyond_cap(scan_cap);
}

MinFire ClosureApprox::tuple_dependence(std::span<const Element> xs) const {
  std::vector<Element> key(xs.begin(), xs.end());
  std::sort(key.begin(), key.end());
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = tuple_memo_.find(key);
    if (it != tuple_memo_.end()) return it->second;
  }
  MinFire out = MinFire::never();
  if (auto a = family_->accel_tuple_dependence(key)) {
    out = *a;
  } else {
    // fall back to per-member min-fires
    bool beyond = false;
    std::optional<std::uint64_t> at;
    // a repeated element is dependent as soon as its reflexive pattern fires
    for (std::size_t i = 0; i < key.size(); ++i) {
      std::vector<Element> rest;
      rest.reserve(key.size() - 1);
      for (std::size_t j = 0; j < key.size(); ++j)
        if (j != i) rest.push_back(key[j]);
      MinFire mf = min_fire(key[i], rest, 4096);
      if (mf.kind == MinFire::Kind::At) at = at ? std::min(*at, mf.t) : mf.t;
      if (mf.kind == MinFire::Kind::BeyondCap) beyond = true;
    }
    if (at)
      out = MinFire::at(*at);
    else if (beyond)
      out = MinFire::beyond_cap(4096);
  }
  std::lock_guard<std::mutex> lock(mu_);
  tuple_memo_[key] = out;
  return out;
}

bool ClosureApprox::is_t_independent(std::span<const Element> xs, std::uint64_t t) const {
  MinFire mf = tuple_dependence(xs);
  switch (mf.kind) {
    case MinFire::Kind::Never:
      return true;
    case MinFire::Kind::At:
      return t < mf.t;
    case MinFire::Kind::BeyondCap:
      if (t <= mf.t) return true;
      throw BudgetExhausted("is_t_independent beyond certified bound");
  }
  return true;
}

std::vector<Element> ClosureApprox::least_span_witnesses(std::uint64_t t,
                                                         std::size_t k) const {
  std::vector<Element> ns;
  std::vector<Element> seed;  // sequence at the nearest smaller stage
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = span_memo_.find(t);
    if (it != span_memo_.end() && it->second.size() >= k + 1) {
      ns = it->second;
      ns.resize(k + 1);
      return ns;
    }
    if (it != span_memo_.end()) ns = it->second;
    auto lo = span_memo_.lower_bound(t);
    if (lo != span_memo_.begin() && !ns.size()) {
      --lo;
      if (lo->first < t) seed = lo->second;
    }
  }
  // memberships only appear as t grows, so while the prefix agrees with the
  // seed sequence, everything below a seed witness is already dependent and
  // the scan can start at the seed value
  bool prefix_matches_seed = ns.empty() || (ns.size() <= seed.size() &&
                                            std::equal(ns.begin(), ns.end(), seed.begin()));
  while (ns.size() < k + 1) {
    bool found = false;
    Element start = 0;
    if (prefix_matches_seed && ns.size() < seed.size()) start = seed[ns.size()];
    for (Element x = start; x < t; ++x) {
      if (std::find(ns.begin(), ns.end(), x) != ns.end()) continue;
      if (!member(x, ns, t)) {
        if (prefix_matches_seed && ns.size() < seed.size() && x != seed[ns.size()])
          prefix_matches_seed = false;
        ns.push_back(x);
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = span_memo_[t];
    if (ns.size() > slot.size()) slot = ns;
  }
  if (ns.size() > k + 1) ns.resize(k + 1);
  return ns;
}

bool ClosureApprox::has_least_span_at(std::span<const Element> us, std::uint64_t t) const {
  if (us.empty()) return true;
  std::vector<Element> ns = least_span_witnesses(t, us.size() - 1);
  if (ns.size() < us.size()) return false;
  for (std::size_t i = 0; i < us.size(); ++i) {
    std::vector<Element> prefix(us.begin(), us.begin() + i + 1);
    if (!member(ns[i], prefix, t)) return false;
    std::vector<Element> prefix_n(us.begin(), us.begin() + i);
    prefix_n.push_back(ns[i]);
    if (!member(us[i], prefix_n, t)) return false;
  }
  return true;
}

bool tuple_dependent_from_basis(const std::function<Element(std::size_t)>& basis,
                                std::span<const Element> xs,
                                const ClosureSemidecider& semidecider,
                                std::uint64_t step_budget) {
  if (xs.empty()) return false;
  // repeated element => dependent
  {
    std::set<Element> seen;
    for (Element x : xs)
      if (!seen.insert(x).second) return true;
  }
  std::size_t n = xs.size();
  for (std::uint64_t stage = 1; stage <= step_budget; ++stage) {
    // direct route: some x depends on the rest at this stage
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Element> rest;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) rest.push_back(xs[j]);
      if (semidecider(xs[i], rest, stage)) return true;
    }
    // basis route: find finite A = basis prefix with X ⊆ cl(A)
    std::size_t prefix_len = static_cast<std::size_t>(std::min<std::uint64_t>(stage, 64));
    std::vector<Element> A;
    for (std::size_t i = 0; i < prefix_len; ++i) A.push_back(basis(i));
    bool spans = true;
    for (Element x : xs)
      if (!semidecider(x, A, stage)) {
        spans = false;
        break;
      }
    if (!spans) continue;
    // exchange: exist distinct a_1..a_n in A with each a_j in cl(X ∪ (A \ {a_1..a_n}))
    std::vector<std::size_t> idx(n, 0);
    std::function<bool(std::size_t, std::size_t)> choose = [&](std::size_t pos,
                                                               std::size_t from) -> bool {
      if (pos == n) {
        std::vector<Element> context(xs.begin(), xs.end());
        for (std::size_t i = 0; i < A.size(); ++i) {
          if (std::find(idx.begin(), idx.end(), i) == idx.end()) context.push_back(A[i]);
        }
        for (std::size_t j = 0; j < n; ++j)
          if (!semidecider(A[idx[j]], context, stage)) return false;
        return true;
      }
      for (std::size_t i = from; i < A.size(); ++i) {
        idx[pos] = i;
        if (choose(pos + 1, i + 1)) return true;
      }
      return false;
    };
    if (choose(0, 0)) return false;  // exchange witnessed: independent
  }
  throw BudgetExhausted("tuple_dependent_from_basis: step budget exhausted");
}

std::vector<Element> basis_from_closure(const ClosureDecider& decider, std::size_t count,
                                        Element element_cap) {
  std::vector<Element> out;
  for (Element x = 0; x < element_cap && out.size() < count; ++x) {
    if (!decider(x, out)) out.push_back(x);
  }
  return out;
}

}  // namespace pregeom
