#include "pregeom/presentation.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pregeom {

Signature::Signature(std::vector<Relation> relations) : relations_(std::move(relations)) {
  std::set<std::string> names;
  for (auto& r : relations_) {
    if (r.arity < 1) throw PreconditionViolation("Signature: arity must be >= 1");
    if (!names.insert(r.name).second)
      throw PreconditionViolation("Signature: duplicate relation name " + r.name);
  }
}

std::optional<std::size_t> Signature::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < relations_.size(); ++i)
    if (relations_[i].name == name) return i;
  return std::nullopt;
}

bool Signature::operator==(const Signature& o) const {
  if (relations_.size() != o.relations_.size()) return false;
  for (std::size_t i = 0; i < relations_.size(); ++i)
    if (relations_[i].name != o.relations_[i].name ||
        relations_[i].arity != o.relations_[i].arity)
      return false;
  return true;
}

bool FragmentView::in_bounds(std::size_t rel, std::span<const Element> args) const {
  if (rel >= relation_limit()) return false;
  if (args.size() != signature().relation(rel).arity) return false;
  for (Element e : args)
    if (e >= size()) return false;
  return true;
}

bool FragmentView::fact_checked(std::size_t rel, std::span<const Element> args) const {
  if (!in_bounds(rel, args))
    throw PreconditionViolation("fragment fact query out of bounds");
  return fact(rel, args);
}

FactSet::FactSet(Signature sig, std::uint64_t size, std::vector<Fact> facts)
    : sig_(std::move(sig)), size_(size), facts_(std::move(facts)) {
  std::sort(facts_.begin(), facts_.end());
  facts_.erase(std::unique(facts_.begin(), facts_.end()), facts_.end());
}

std::size_t FactSet::relation_limit() const {
  return std::min<std::uint64_t>(size_, sig_.size());
}

bool FactSet::fact(std::size_t rel, std::span<const Element> args) const {
  Fact key{rel, std::vector<Element>(args.begin(), args.end())};
  return std::binary_search(facts_.begin(), facts_.end(), key);
}

bool FactSet::operator==(const FactSet& o) const {
  return sig_ == o.sig_ && size_ == o.size_ && facts_ == o.facts_;
}

bool FiniteFragment::fact(std::size_t rel, std::span<const Element> args) const {
  if (!in_bounds(rel, args)) return false;
  return pres_->fact(rel, args);
}

namespace {

template <typename F>
void for_each_tuple(std::uint64_t size, std::size_t arity, F&& fn) {
  std::vector<Element> tuple(arity, 0);
  if (size == 0) return;
  while (true) {
    fn(tuple);
    std::size_t i = arity;
    while (i > 0) {
      --i;
      if (++tuple[i] < size) break;
      tuple[i] = 0;
      if (i == 0) return;
    }
  }
}

std::uint64_t tuple_count(std::uint64_t size, std::size_t arity) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < arity; ++i) {
    if (size != 0 && n > 2000000000ull / size) return UINT64_MAX;
    n *= size;
  }
  return n;
}

}  // namespace

FactSet FiniteFragment::materialize(std::uint64_t tuple_cap) const {
  std::vector<Fact> facts;
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < relation_limit(); ++r) {
    std::uint64_t c = tuple_count(t_, signature().relation(r).arity);
    if (c == UINT64_MAX || total + c > tuple_cap)
      throw std::length_error("FiniteFragment::materialize beyond tuple cap");
    total += c;
  }
  for (std::size_t r = 0; r < relation_limit(); ++r) {
    for_each_tuple(t_, signature().relation(r).arity, [&](const std::vector<Element>& tup) {
      if (pres_->fact(r, tup)) facts.push_back(Fact{r, tup});
    });
  }
  return FactSet(signature(), t_, std::move(facts));
}

PartialMap::PartialMap(std::vector<Element> images) : images_(std::move(images)) {
  if (!injective()) throw PreconditionViolation("PartialMap: not injective");
}

std::optional<std::size_t> PartialMap::preimage(Element e) const {
  for (std::size_t i = 0; i < images_.size(); ++i)
    if (images_[i] == e) return i;
  return std::nullopt;
}

bool PartialMap::injective() const {
  std::set<Element> seen;
  for (Element e : images_)
    if (!seen.insert(e).second) return false;
  return true;
}

void PartialMap::push_back(Element e) {
  if (preimage(e)) throw PreconditionViolation("PartialMap: image collision");
  images_.push_back(e);
}

FactSet pullback(const FragmentView& source, const PartialMap& tau) {
  if (!tau.injective()) throw PreconditionViolation("pullback: map not injective");
  for (Element e : tau.images())
    if (e >= source.size())
      throw PreconditionViolation("pullback: image outside source fragment");
  std::vector<Fact> facts;
  std::uint64_t n = tau.domain_size();
  for (std::size_t r = 0; r < source.relation_limit(); ++r) {
    std::size_t arity = source.signature().relation(r).arity;
    for_each_tuple(n, arity, [&](const std::vector<Element>& tup) {
      std::vector<Element> img(arity);
      for (std::size_t i = 0; i < arity; ++i) img[i] = tau.image(tup[i]);
      if (source.fact(r, img)) facts.push_back(Fact{r, tup});
    });
  }
  return FactSet(source.signature(), n, std::move(facts));
}

bool is_partial_isomorphism(const FragmentView& a, const FragmentView& b,
                            const std::vector<std::pair<Element, Element>>& map) {
  std::set<Element> dom, rng;
  for (auto& [x, y] : map) {
    if (!dom.insert(x).second) return false;
    if (!rng.insert(y).second) return false;
    if (x >= a.size() || y >= b.size()) return false;
  }
  std::size_t rl = std::min(a.relation_limit(), b.relation_limit());
  std::uint64_t n = map.size();
  for (std::size_t r = 0; r < rl; ++r) {
    std::size_t arity = a.signature().relation(r).arity;
    bool ok = true;
    for_each_tuple(n, arity, [&](const std::vector<Element>& tup) {
      if (!ok) return;
      std::vector<Element> xs(arity), ys(arity);
      for (std::size_t i = 0; i < arity; ++i) {
        xs[i] = map[tup[i]].first;
        ys[i] = map[tup[i]].second;
      }
      if (a.fact(r, xs) != b.fact(r, ys)) ok = false;
    });
    if (!ok) return false;
  }
  return true;
}

std::string fragment_to_csv(const FragmentView& f, std::uint64_t tuple_cap) {
  std::ostringstream os;
  std::uint64_t budget = tuple_cap;
  for (std::size_t r = 0; r < f.relation_limit(); ++r) {
    std::size_t arity = f.signature().relation(r).arity;
    std::uint64_t c = tuple_count(f.size(), arity);
    if (c == UINT64_MAX || c > budget)
      throw std::length_error("fragment_to_csv beyond tuple cap");
    budget -= c;
    for_each_tuple(f.size(), arity, [&](const std::vector<Element>& tup) {
      if (!f.fact(r, tup)) return;
      os << f.signature().relation(r).name;
      for (Element e : tup) os << "," << e;
      os << "\n";
    });
  }
  return os.str();
}

}  // namespace pregeom
