#include "pregeom/groups.hpp"

#include <algorithm>
#include <functional>

namespace pregeom {

GroupEnumeration::GroupEnumeration(std::vector<CoordCodec::Kind> generator_kinds,
                                   CoordCodec::Kind rest, ScramblePlan plan)
    : gen_kinds_(std::move(generator_kinds)), rest_kind_(rest), plan_(std::move(plan)) {
  if (!plan_.collapses.empty()) queues_.resize(plan_.collapses.size());
  // schedule consistency: forced ids distinct, nonzero, before the reveal;
  // coefficients must keep {0, c1, c2} closed-sum-free so that the visible
  // fragment admits unique line decompositions
  std::set<std::uint64_t> ids;
  std::set<std::int64_t> dirs;
  for (const auto& c : plan_.collapses) {
    if (c.coeff_first <= 0 || c.coeff_second <= 0 || c.coeff_first == c.coeff_second)
      throw PreconditionViolation("scramble: collapse coefficients must be distinct positives");
    std::set<Int> allowed{Int(0), c.coeff_first, c.coeff_second};
    for (const Int& a :
         {Int(c.coeff_first + c.coeff_second), Int(c.coeff_first - c.coeff_second),
          Int(c.coeff_second - c.coeff_first), Int(c.coeff_first * 2), Int(c.coeff_second * 2)}) {
      if (a != 0 && allowed.count(a))
        throw PreconditionViolation("scramble: coefficient sums collide with allowed set");
    }
    if (c.id_first == 0 || c.id_second == 0 || c.id_first == c.id_second)
      throw PreconditionViolation("scramble: forced ids must be distinct and nonzero");
    if (c.reveal <= std::max(c.id_first, c.id_second))
      throw PreconditionViolation("scramble: reveal must come after the forced ids");
    if (!ids.insert(c.id_first).second || !ids.insert(c.id_second).second)
      throw PreconditionViolation("scramble: forced ids overlap");
    if (!dirs.insert(c.direction).second)
      throw PreconditionViolation("scramble: collapse directions must be distinct");
    if (!coeff_allowed(c.direction, Rat(c.coeff_first)) ||
        !coeff_allowed(c.direction, Rat(c.coeff_second)))
      throw PreconditionViolation("scramble: coefficients not valid for the generator");
  }
}

const CoordCodec& GroupEnumeration::codec_for(std::int64_t index) const {
  CoordCodec::Kind k = (index >= 0 && static_cast<std::size_t>(index) < gen_kinds_.size())
                           ? gen_kinds_[index]
                           : rest_kind_;
  auto it = codecs_.find(k);
  if (it == codecs_.end()) it = codecs_.emplace(k, std::make_unique<CoordCodec>(k)).first;
  return *it->second;
}

bool GroupEnumeration::coeff_allowed(std::int64_t index, const Rat& coeff) const {
  return codec_for(index).allowed(coeff);
}

std::optional<std::uint64_t> GroupEnumeration::rank_of(const SparseVec& v) const {
  std::vector<std::uint64_t> tokens;
  std::int64_t prev = -1;
  for (const auto& [idx, coeff] : v.entries()) {
    auto cid = codec_for(idx).id_of(coeff);
    if (!cid) return std::nullopt;
    tokens.push_back(static_cast<std::uint64_t>(idx - prev - 1));
    tokens.push_back(*cid);
    prev = idx;
  }
  auto r = stream_.rank(tokens);
  if (!r || *r >= kIdHorizon) return std::nullopt;
  return r;
}

std::optional<SparseVec> GroupEnumeration::unrank(std::uint64_t r) const {
  auto tokens = stream_.unrank(r);
  if (!tokens) return std::nullopt;
  std::vector<SparseVec::Entry> entries;
  std::int64_t idx = -1;
  for (std::size_t i = 0; i + 1 < tokens->size(); i += 2) {
    idx += static_cast<std::int64_t>((*tokens)[i]) + 1;
    entries.push_back({idx, codec_for(idx).coord((*tokens)[i + 1])});
  }
  return SparseVec(std::move(entries));
}

bool GroupEnumeration::delayed_by(const SparseVec& v, const Collapse& c) const {
  Rat a = v.coeff(c.direction);
  return !(a == 0 || a == Rat(c.coeff_first) || a == Rat(c.coeff_second));
}

bool GroupEnumeration::is_forced_value(const SparseVec& v) const {
  for (const auto& c : plan_.collapses) {
    if (v == SparseVec::unit(c.direction, Rat(c.coeff_first))) return true;
    if (v == SparseVec::unit(c.direction, Rat(c.coeff_second))) return true;
  }
  return false;
}

void GroupEnumeration::ensure_emitted(std::uint64_t upto) const {
  // caller holds mu_
  while (emitted_.size() <= upto && !(drained_ && emitted_.size() >= drain_emitted_)) {
    std::uint64_t n = emitted_.size();
    const Collapse* forced = nullptr;
    bool forced_first = false;
    for (const auto& c : plan_.collapses) {
      if (c.id_first == n) {
        forced = &c;
        forced_first = true;
      } else if (c.id_second == n) {
        forced = &c;
        forced_first = false;
      }
    }
    auto emit = [&](SparseVec v) {
      id_cache_[v.hash()] = n;
      emitted_.push_back(std::move(v));
    };
    if (forced) {
      emit(SparseVec::unit(forced->direction,
                           Rat(forced_first ? forced->coeff_first : forced->coeff_second)));
      continue;
    }
    std::size_t release_idx = plan_.collapses.size();
    for (std::size_t i = 0; i < plan_.collapses.size(); ++i) {
      if (queues_[i].empty() || n < plan_.collapses[i].reveal) continue;
      if (release_idx == plan_.collapses.size()) {
        release_idx = i;
      } else {
        auto ra = rank_of(queues_[i].front());
        auto rb = rank_of(queues_[release_idx].front());
        if (ra && rb && *ra < *rb) release_idx = i;
      }
    }
    if (release_idx < plan_.collapses.size()) {
      emit(queues_[release_idx].front());
      queues_[release_idx].pop_front();
    } else {
      while (true) {
        auto v = unrank(base_cursor_);
        if (!v) throw std::length_error("GroupEnumeration: base stream beyond codec horizon");
        ++base_cursor_;
        if (is_forced_value(*v)) continue;  // placed at its forced id instead
        bool delayed = false;
        for (std::size_t i = 0; i < plan_.collapses.size(); ++i) {
          if (n < plan_.collapses[i].reveal && delayed_by(*v, plan_.collapses[i])) {
            queues_[i].push_back(std::move(*v));
            delayed = true;
            break;
          }
        }
        if (delayed) continue;
        emit(std::move(*v));
        break;
      }
    }
    if (!drained_ && !plan_.collapses.empty()) {
      bool done = true;
      std::uint64_t forced_max = 0;
      for (std::size_t i = 0; i < plan_.collapses.size(); ++i) {
        forced_max = std::max({forced_max, plan_.collapses[i].id_first,
                               plan_.collapses[i].id_second});
        if (emitted_.size() <= plan_.collapses[i].reveal || !queues_[i].empty()) done = false;
      }
      if (emitted_.size() <= forced_max) done = false;
      if (done) {
        drained_ = true;
        drain_emitted_ = emitted_.size();
        drain_cursor_ = base_cursor_;
      }
    }
  }
}

SparseVec GroupEnumeration::vector_of(Element id) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!plan_.empty()) {
    if (id < emitted_.size()) return emitted_[id];
    if (!drained_) {
      ensure_emitted(id);
      if (id < emitted_.size()) return emitted_[id];
    }
    std::uint64_t r = drain_cursor_ + (id - drain_emitted_);
    auto it = random_cache_.find(id);
    if (it != random_cache_.end()) return it->second;
    auto v = unrank(r);
    if (!v) throw std::length_error("GroupEnumeration: id beyond codec horizon");
    return random_cache_.try_emplace(id, std::move(*v)).first->second;
  }
  // plain codec order: dense prefix cache plus sparse random access
  if (id < emitted_.size()) return emitted_[id];
  if (id == emitted_.size()) {
    auto v = unrank(id);
    if (!v) throw std::length_error("GroupEnumeration: id beyond codec horizon");
    emitted_.push_back(std::move(*v));
    return emitted_.back();
  }
  auto it = random_cache_.find(id);
  if (it != random_cache_.end()) return it->second;
  auto v = unrank(id);
  if (!v) throw std::length_error("GroupEnumeration: id beyond codec horizon");
  return random_cache_.try_emplace(id, std::move(*v)).first->second;
}

std::optional<Element> GroupEnumeration::id_of(const SparseVec& v) const {
  std::lock_guard<std::mutex> lock(mu_);
  {
    auto it = id_memo_.find(v.hash());
    if (it != id_memo_.end() && it->second.first == v) return it->second.second;
  }
  auto memoize = [&](std::optional<Element> id) {
    id_memo_[v.hash()] = {v, id};
    return id;
  };
  auto r = rank_of(v);
  if (plan_.empty()) return memoize(r);
  if (!r) return memoize(std::nullopt);
  auto lookup = [&]() -> std::optional<Element> {
    auto it = id_cache_.find(v.hash());
    if (it != id_cache_.end() && emitted_[it->second] == v) return it->second;
    return std::nullopt;
  };
  if (auto hit = lookup()) return memoize(hit);
  while (!drained_) {
    ensure_emitted(emitted_.size() + 255);
    if (auto hit = lookup()) return memoize(hit);
  }
  if (*r >= drain_cursor_) return memoize(drain_emitted_ + (*r - drain_cursor_));
  if (auto hit = lookup()) return memoize(hit);
  for (Element i = 0; i < emitted_.size(); ++i)  // hash collision fallback
    if (emitted_[i] == v) return memoize(i);
  throw std::logic_error("GroupEnumeration::id_of: vector lost by simulation");
}

FamilyFormula GroupDependenceFamily::formula(std::size_t arity, std::uint64_t index) const {
  std::uint32_t frees = static_cast<std::uint32_t>(arity) + 1;
  if (index == 0) {
    FamilyFormula f;
    f.formula.free_vars = frees;
    f.formula.matrix = QFFormula::atom(kRelZero, {Term::variable(0)});
    return f;
  }
  auto p = decode(index);
  bool fits = p.has_value();
  if (fits) {
    for (auto& [pos, m] : p->terms)
      if (pos > arity) fits = false;
  }
  if (!fits) {
    FamilyFormula f;
    f.padding = true;
    f.formula.free_vars = frees;
    f.formula.matrix = QFFormula::falsity();
    return f;
  }
  FamilyFormula f;
  f.formula = chain_formula(*p, arity);
  return f;
}

std::optional<GroupDependenceFamily::Pattern> GroupDependenceFamily::decode(
    std::uint64_t index) const {
  if (index == 0) return std::nullopt;
  auto tokens = codec_.unrank(index - 1);
  if (!tokens) return std::nullopt;
  Pattern p;
  p.x_coeff = Int((*tokens)[0]) + 1;
  std::size_t pos = 0;
  for (std::size_t i = 1; i + 1 < tokens->size(); i += 2) {
    pos += (*tokens)[i] + 1;
    std::uint64_t mc = (*tokens)[i + 1];
    Int m = (mc % 2 == 0) ? Int(mc / 2 + 1) : -Int((mc + 1) / 2);
    p.terms.push_back({pos, m});
  }
  return p;
}

std::optional<std::uint64_t> GroupDependenceFamily::code_of(const Pattern& p) const {
  if (p.x_coeff < 1 || p.terms.empty()) return std::nullopt;
  if (p.x_coeff > Int(std::uint64_t{1} << 60)) return std::nullopt;
  std::vector<std::uint64_t> tokens;
  tokens.push_back(static_cast<std::uint64_t>(p.x_coeff - 1));
  std::size_t prev = 0;
  for (const auto& [pos, m] : p.terms) {
    if (pos <= prev || m == 0) return std::nullopt;
    if (abs_int(m) > Int(std::uint64_t{1} << 60)) return std::nullopt;
    tokens.push_back(pos - prev - 1);
    std::uint64_t mag = static_cast<std::uint64_t>(abs_int(m));
    std::uint64_t mc = (m > 0) ? 2 * (mag - 1) : 2 * mag - 1;
    tokens.push_back(mc);
    prev = pos;
  }
  auto r = codec_.rank(tokens);
  if (!r) return std::nullopt;
  return *r + 1;
}

ExistFormula GroupDependenceFamily::chain_formula(const Pattern& p, std::size_t arity) const {
  std::uint32_t frees = static_cast<std::uint32_t>(arity) + 1;
  std::uint32_t next = frees;
  std::uint32_t z = next++;
  std::uint32_t w = next++;
  std::vector<QFFormula> atoms;
  atoms.push_back(QFFormula::atom(kRelZero, {Term::variable(z)}));
  std::uint64_t c = static_cast<std::uint64_t>(p.x_coeff);
  std::uint32_t prev = z;
  for (std::uint64_t j = 1; j <= c; ++j) {
    std::uint32_t out = (j == c) ? w : next++;
    atoms.push_back(
        QFFormula::atom(kRelAdd, {Term::variable(prev), Term::variable(0), Term::variable(out)}));
    prev = out;
  }
  std::uint64_t steps = 0;
  for (const auto& [pos, m] : p.terms) steps += static_cast<std::uint64_t>(abs_int(m));
  std::uint64_t k = 0;
  prev = z;
  for (const auto& [pos, m] : p.terms) {
    std::uint64_t reps = static_cast<std::uint64_t>(abs_int(m));
    bool positive = m > 0;
    std::uint32_t yv = static_cast<std::uint32_t>(pos);
    for (std::uint64_t r = 0; r < reps; ++r) {
      ++k;
      std::uint32_t out = (k == steps) ? w : next++;
      if (positive) {
        atoms.push_back(QFFormula::atom(
            kRelAdd, {Term::variable(prev), Term::variable(yv), Term::variable(out)}));
      } else {
        atoms.push_back(QFFormula::atom(
            kRelAdd, {Term::variable(out), Term::variable(yv), Term::variable(prev)}));
      }
      prev = out;
    }
  }
  ExistFormula f;
  f.free_vars = frees;
  f.matrix = QFFormula::conj(std::move(atoms));
  return f;
}

std::optional<std::uint64_t> GroupDependenceFamily::pattern_threshold(
    const Pattern& p, Element x, std::span<const Element> ys) const {
  auto code = code_of(p);
  if (!code) return std::nullopt;
  std::uint64_t th = std::max<std::uint64_t>({*code, 2, x + 1});
  const SparseVec vx = pres_->vec(x);
  auto bump_vec = [&](const SparseVec& v) -> bool {
    auto id = pres_->id_of(v);
    if (!id) return false;
    th = std::max(th, *id + 1);
    return true;
  };
  for (const auto& [pos, m] : p.terms) {
    if (pos == 0 || pos > ys.size()) return std::nullopt;
    th = std::max(th, ys[pos - 1] + 1);
  }
  SparseVec acc;
  std::uint64_t c = static_cast<std::uint64_t>(p.x_coeff);
  for (std::uint64_t j = 1; j <= c; ++j) {
    acc += vx;
    if (!bump_vec(acc)) return std::nullopt;
  }
  SparseVec rhs;
  for (const auto& [pos, m] : p.terms) {
    const SparseVec vy = pres_->vec(ys[pos - 1]);
    std::uint64_t reps = static_cast<std::uint64_t>(abs_int(m));
    SparseVec step = (m > 0) ? vy : -vy;
    for (std::uint64_t r = 0; r < reps; ++r) {
      rhs += step;
      if (!bump_vec(rhs)) return std::nullopt;
    }
  }
  if (!(rhs == acc)) throw std::logic_error("pattern_threshold: pattern does not hold");
  return th;
}

std::optional<bool> GroupDependenceFamily::accel_member(Element, std::span<const Element>,
                                                        std::uint64_t) const {
  return std::nullopt;  // the engine prefers accel_min_fire
}

std::optional<MinFire> GroupDependenceFamily::accel_min_fire(
    Element x, std::span<const Element> ys) const {
  return min_fire_impl(x, ys);
}

std::optional<MinFire> GroupDependenceFamily::accel_tuple_dependence(
    std::span<const Element> xs) const {
  // members that can depend on the rest are exactly those in the support of
  // the tuple's rational kernel; everything else stays independent forever
  std::size_t n = xs.size();
  std::vector<SparseVec> vecs;
  vecs.reserve(n);
  for (Element e : xs) vecs.push_back(pres_->vec(e));
  struct Row {
    SparseVec vec;
    std::vector<Rat> combo;
    std::int64_t pivot = 0;
  };
  std::vector<Row> rows;
  std::set<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i) {
    SparseVec r = vecs[i];
    std::vector<Rat> combo(n, Rat(0));
    combo[i] = 1;
    for (const auto& row : rows) {
      Rat c = r.coeff(row.pivot);
      if (c == 0) continue;
      Rat f = c / row.vec.coeff(row.pivot);
      r -= row.vec.scaled(f);
      for (std::size_t j = 0; j < n; ++j) combo[j] -= f * row.combo[j];
    }
    if (r.is_zero()) {
      for (std::size_t j = 0; j < n; ++j)
        if (combo[j] != 0) support.insert(j);
    } else {
      Row pr;
      pr.vec = std::move(r);
      pr.combo = std::move(combo);
      pr.pivot = pr.vec.entries().front().first;
      rows.push_back(std::move(pr));
    }
  }
  if (support.empty()) return MinFire::never();
  std::optional<std::uint64_t> at;
  bool beyond = false;
  std::uint64_t beyond_bound = 0;
  for (std::size_t j : support) {
    std::vector<Element> rest;
    rest.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) rest.push_back(xs[i]);
    MinFire mf = min_fire_impl(xs[j], rest);
    if (mf.kind == MinFire::Kind::At) at = at ? std::min(*at, mf.t) : mf.t;
    if (mf.kind == MinFire::Kind::BeyondCap) {
      beyond = true;
      beyond_bound = beyond_bound == 0 ? mf.t : std::min(beyond_bound, mf.t);
    }
  }
  if (at && (!beyond || *at <= beyond_bound)) return MinFire::at(*at);
  if (beyond) return MinFire::beyond_cap(beyond_bound);
  return MinFire::never();
}

std::vector<GroupLiteral> matrix_literals(const QFFormula& matrix) {
  if (!matrix.is_conjunction_of_literals())
    throw PreconditionViolation("matrix must be a conjunction of literals");
  std::vector<GroupLiteral> out;
  for (auto& [atom, neg] : matrix.literals()) out.push_back({atom.rel(), atom.args(), neg});
  return out;
}

SparseVec literal_term_value(const GroupPresentation& pres, const Term& t,
                             std::span<const SparseVec> vals) {
  if (t.kind == Term::Kind::Const) return pres.vec(t.elem);
  if (t.var >= vals.size()) throw PreconditionViolation("unassigned variable in literal");
  return vals[t.var];
}

bool literal_holds_on_vectors(const GroupPresentation& pres, const GroupLiteral& lit,
                              std::span<const SparseVec> vals) {
  bool v = false;
  switch (lit.rel) {
    case kRelAdd:
      v = literal_term_value(pres, lit.args[0], vals) +
              literal_term_value(pres, lit.args[1], vals) ==
          literal_term_value(pres, lit.args[2], vals);
      break;
    case kRelZero:
      v = literal_term_value(pres, lit.args[0], vals).is_zero();
      break;
    case kRelLess:
      v = pres.compare(literal_term_value(pres, lit.args[0], vals),
                       literal_term_value(pres, lit.args[1], vals)) < 0;
      break;
    default:
      throw PreconditionViolation("unknown relation in literal");
  }
  return lit.negated ? !v : v;
}

bool all_literals_hold(const GroupPresentation& pres, const std::vector<GroupLiteral>& lits,
                       std::span<const SparseVec> vals) {
  for (const auto& l : lits)
    if (!literal_holds_on_vectors(pres, l, vals)) return false;
  return true;
}

std::optional<std::vector<SparseVec>> find_witnesses(const GroupPresentation& pres,
                                                     const ExistFormula& phi,
                                                     std::span<const Element> frees,
                                                     std::uint64_t budget) {
  std::shared_ptr<const Presentation> self(static_cast<const Presentation*>(&pres),
                                           [](const Presentation*) {});
  std::uint64_t lo = 2;
  for (Element e : frees) lo = std::max(lo, e + 1);
  for (std::uint64_t b = lo;; b *= 2) {
    FiniteFragment frag(self, b);
    auto w = eval_exists_bounded_witness(frag, phi, frees, b);
    if (w) {
      std::vector<SparseVec> out;
      for (Element e : *w) out.push_back(pres.vec(e));
      return out;
    }
    if (b > budget) break;
  }
  return std::nullopt;
}

namespace {

std::uint64_t gamma_bits_of_value(const Int& value) {
  Int v = value;
  std::uint64_t z = 0;
  while (v > 1) {
    v >>= 1;
    ++z;
  }
  return 2 * z + 1;
}

}  // namespace

const GroupDependenceFamily::YsEchelon& GroupDependenceFamily::ys_echelon(
    std::span<const Element> ys) const {
  std::vector<Element> key(ys.begin(), ys.end());
  std::lock_guard<std::mutex> lock(mu_);
  auto it = echelon_cache_.find(key);
  if (it != echelon_cache_.end()) return it->second;
  YsEchelon e;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    SparseVec r = pres_->vec(ys[i]);
    std::vector<Rat> combo(ys.size(), Rat(0));
    combo[i] = 1;
    for (const auto& row : e.rows) {
      Rat c = r.coeff(row.pivot);
      if (c == 0) continue;
      Rat f = c / row.vec.coeff(row.pivot);
      r -= row.vec.scaled(f);
      for (std::size_t j = 0; j < ys.size(); ++j) combo[j] -= f * row.combo[j];
    }
    if (r.is_zero()) {
      e.internal_kernel.push_back(std::move(combo));
    } else {
      YsEchelon::Row pr;
      pr.vec = std::move(r);
      pr.combo = std::move(combo);
      pr.pivot = pr.vec.entries().front().first;
      e.rows.push_back(std::move(pr));
    }
  }
  return echelon_cache_.emplace(std::move(key), std::move(e)).first->second;
}

MinFire GroupDependenceFamily::min_fire_impl(Element x, std::span<const Element> ys) const {
  const SparseVec vx = pres_->vec(x);
  if (vx.is_zero()) return MinFire::at(std::max<std::uint64_t>(x + 1, 2));
  std::size_t n = ys.size();
  std::vector<SparseVec> all;
  all.reserve(n + 1);
  for (Element y : ys) all.push_back(pres_->vec(y));
  all.push_back(vx);

  const YsEchelon& ech = ys_echelon(ys);
  // reduce x against the echelon of the ys
  SparseVec r = vx;
  std::vector<Rat> xcombo(n, Rat(0));
  for (const auto& row : ech.rows) {
    Rat c = r.coeff(row.pivot);
    if (c == 0) continue;
    Rat f = c / row.vec.coeff(row.pivot);
    r -= row.vec.scaled(f);
    for (std::size_t j = 0; j < n; ++j) xcombo[j] -= f * row.combo[j];
  }
  if (!r.is_zero()) return MinFire::never();  // x outside the rational span
  std::vector<std::vector<Rat>> kernel_q;
  for (const auto& k : ech.internal_kernel) {
    std::vector<Rat> row(n + 1, Rat(0));
    for (std::size_t j = 0; j < n; ++j) row[j] = k[j];
    kernel_q.push_back(std::move(row));
  }
  {
    // vx + sum_j xcombo[j]*vy_j = 0, i.e. the kernel row (xcombo..., 1)
    std::vector<Rat> row(n + 1, Rat(0));
    for (std::size_t j = 0; j < n; ++j) row[j] = xcombo[j];
    row[n] = 1;
    kernel_q.push_back(std::move(row));
  }

  std::size_t d = kernel_q.size();
  IntMat K(d, n + 1);
  for (std::size_t i = 0; i < d; ++i) {
    Int den_lcm = 1;
    for (auto& q : kernel_q[i]) den_lcm = lcm(den_lcm, denominator(q));
    for (std::size_t j = 0; j <= n; ++j) {
      Rat scaled = kernel_q[i][j] * Rat(den_lcm);
      K.at(i, j) = numerator(scaled);
    }
  }
  std::vector<std::vector<Int>> lattice = saturation_basis(K);
  d = lattice.size();
  if (d == 0) return MinFire::never();
  if (d > 8) throw BudgetExhausted("min_fire: kernel dimension beyond supported bound");

  auto pattern_of = [&](const std::vector<Int>& q) -> std::optional<Pattern> {
    if (q[n] == 0) return std::nullopt;
    Pattern p;
    bool flip = q[n] > 0;  // want sum m_i y_i = c x, c = -q[n] > 0
    p.x_coeff = flip ? q[n] : -q[n];
    for (std::size_t i = 0; i < n; ++i) {
      Int m = flip ? -q[i] : q[i];
      if (m != 0) p.terms.push_back({i + 1, m});
    }
    if (p.terms.empty()) return std::nullopt;  // c x = 0 impossible (torsion-free, x != 0)
    return p;
  };

  std::optional<std::uint64_t> best;
  auto consider = [&](const std::vector<Int>& q) {
    auto p = pattern_of(q);
    if (!p) return;
    auto th = pattern_threshold(*p, x, ys);
    if (th && (!best || *th < *best)) best = *th;
  };

  std::vector<Int> q(n + 1);
  std::vector<std::vector<std::size_t>> lattice_support(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= n; ++j)
      if (lattice[i][j] != 0) lattice_support[i].push_back(j);
  auto combine = [&](const std::vector<Int>& lambda) {
    for (auto& x : q) x = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (lambda[i] == 0) continue;
      for (std::size_t j : lattice_support[i]) q[j] += lambda[i] * lattice[i][j];
    }
  };

  // incumbents: single rows and small combos
  {
    std::vector<Int> lambda(d, Int(0));
    std::function<void(std::size_t)> small = [&](std::size_t i) {
      if (i == d) {
        combine(lambda);
        consider(q);
        return;
      }
      for (Int v = -2; v <= 2; ++v) {
        lambda[i] = v;
        small(i + 1);
      }
      lambda[i] = 0;
    };
    small(0);
  }
  if (!best) throw BudgetExhausted("min_fire: no incumbent with computable threshold");

  // exhaust every pattern whose code could undercut the incumbent
  // (threshold >= code, so only codes < best matter)
  int lstar = 0;
  for (int l = 0; l <= codec_.max_bits(); ++l) {
    if (codec_.cumulative_count(l + 1) <= Int(*best - 1))
      lstar = l;
    else
      break;
  }
  if (lstar > 0 && d == 1) {
    // all solutions are integer multiples of the primitive row; token
    // lengths grow monotonically with the multiple, so stop once the
    // cumulative count below the pattern's length passes the incumbent
    for (Int k2 = 1;; ++k2) {
      std::vector<Int> lam{k2};
      combine(lam);
      auto p = pattern_of(q);
      if (p) {
        std::uint64_t bits = gamma_bits_of_value(p->x_coeff);
        std::size_t prev = 0;
        for (const auto& [pos, m] : p->terms) {
          bits += gamma_bits_of_value(Int(static_cast<std::uint64_t>(pos - prev)));
          bits += gamma_bits_of_value(m > 0 ? Int(2 * m - 1) : Int(-2 * m));
          prev = pos;
        }
        if (bits > static_cast<std::uint64_t>(codec_.max_bits())) break;
        if (codec_.cumulative_count(static_cast<int>(bits)) > Int(*best - 1)) break;
        consider(q);
      }
      if (k2 > 100000) throw BudgetExhausted("min_fire: multiple walk runaway");
    }
  } else if (lstar > 0) {
    Int pmax = Int(1) << std::min(60, (lstar + 1) / 2);
    // |lambda_j| <= pmax * colsum_j(|pinv|), pinv = latticeT (lattice latticeT)^-1
    std::vector<std::vector<Rat>> gram(d, std::vector<Rat>(2 * d, Rat(0)));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        Rat s(0);
        for (std::size_t k2 = 0; k2 <= n; ++k2)
          s += Rat(lattice[i][k2]) * Rat(lattice[j][k2]);
        gram[i][j] = s;
      }
      gram[i][d + i] = 1;
    }
    for (std::size_t col = 0, row = 0; col < d && row < d; ++col) {
      std::size_t piv = row;
      while (piv < d && gram[piv][col] == 0) ++piv;
      if (piv == d) continue;
      std::swap(gram[piv], gram[row]);
      Rat dd = gram[row][col];
      for (auto& v : gram[row]) v /= dd;
      for (std::size_t i2 = 0; i2 < d; ++i2) {
        if (i2 == row || gram[i2][col] == 0) continue;
        Rat f = gram[i2][col];
        for (std::size_t j2 = 0; j2 < 2 * d; ++j2) gram[i2][j2] -= f * gram[row][j2];
      }
      ++row;
    }
    std::vector<Int> bound(d, Int(0));
    Int box_nodes = 1;
    for (std::size_t j = 0; j < d; ++j) {
      Rat colsum(0);
      for (std::size_t k2 = 0; k2 <= n; ++k2) {
        Rat pkj(0);
        for (std::size_t i = 0; i < d; ++i) pkj += Rat(lattice[i][k2]) * gram[i][d + j];
        colsum += (pkj < 0) ? -pkj : pkj;
      }
      Rat b = Rat(pmax) * colsum;
      bound[j] = numerator(b) / denominator(b) + 1;
      box_nodes *= 2 * bound[j] + 1;
    }
    constexpr std::uint64_t kBoxCap = 2000000;
    constexpr std::uint64_t kScanCap = 400000;
    if (box_nodes <= Int(kBoxCap)) {
      std::vector<Int> lambda(d, Int(0));
      std::function<void(std::size_t)> dfs = [&](std::size_t i) {
        if (i == d) {
          combine(lambda);
          auto p = pattern_of(q);
          if (!p) return;
          // quick bit-length filter before the threshold computation
          std::uint64_t bits = gamma_bits_of_value(p->x_coeff);
          std::size_t prev = 0;
          for (const auto& [pos, m] : p->terms) {
            bits += gamma_bits_of_value(Int(static_cast<std::uint64_t>(pos - prev)));
            bits += gamma_bits_of_value(m > 0 ? Int(2 * m - 1) : Int(-2 * m));
            prev = pos;
          }
          if (bits > static_cast<std::uint64_t>(lstar)) return;
          consider(q);
          return;
        }
        for (Int v = -bound[i]; v <= bound[i]; ++v) {
          lambda[i] = v;
          dfs(i + 1);
        }
        lambda[i] = 0;
      };
      dfs(0);
    } else if (*best <= kScanCap) {
      // direct scan of all codes below the incumbent
      for (std::uint64_t k2 = 1; k2 < *best; ++k2) {
        auto p = decode(k2);
        if (!p) continue;
        bool ok = !p->terms.empty();
        SparseVec rhs;
        for (const auto& [pos, m] : p->terms) {
          if (pos == 0 || pos > n) {
            ok = false;
            break;
          }
          rhs += all[pos - 1].scaled(Rat(m));
        }
        if (!ok) continue;
        if (!(rhs == vx.scaled(Rat(p->x_coeff)))) continue;
        auto th = pattern_threshold(*p, x, ys);
        if (th && *th < *best) best = *th;
      }
    } else {
      throw BudgetExhausted("min_fire: exhaustion box beyond caps");
    }
  }
  return MinFire::at(*best);
}

}  // namespace pregeom
