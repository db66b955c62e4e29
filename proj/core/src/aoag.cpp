#include "pregeom/aoag.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pregeom {

Signature aoag_signature() {
  return Signature({{"add", 3}, {"zero", 1}, {"less", 2}});
}

namespace {

bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

}  // namespace

AoagPresentation::AoagPresentation(AoagGroupSpec spec, ScramblePlan plan)
    : GroupPresentation(aoag_signature(), {}, CoordCodec::Kind::Z, std::move(plan)),
      spec_(std::move(spec)) {
  std::set<std::uint64_t> seen;
  for (auto p : spec_.prime_prefix) {
    if (!is_prime_u64(p) || !seen.insert(p).second)
      throw PreconditionViolation("aoag: prime prefix must list distinct primes");
  }
}

std::uint64_t AoagPresentation::prime(std::size_t index) const {
  std::lock_guard<std::mutex> lock(prime_mu_);
  while (primes_.size() <= index) {
    std::size_t i = primes_.size();
    if (i < spec_.prime_prefix.size()) {
      primes_.push_back(spec_.prime_prefix[i]);
      continue;
    }
    std::uint64_t cand = primes_.empty() ? 2 : 0;
    // next prime not used by the prefix or earlier positions
    std::uint64_t start = 2;
    for (auto p : primes_) start = std::max(start, p + 1);
    for (cand = start;; ++cand) {
      if (!is_prime_u64(cand)) continue;
      bool used = std::find(spec_.prime_prefix.begin(), spec_.prime_prefix.end(), cand) !=
                  spec_.prime_prefix.end();
      if (!used) break;
    }
    primes_.push_back(cand);
  }
  return primes_[index];
}

int log_value_sign(const AoagPresentation& pres, const SparseVec& exponents) {
  if (exponents.is_zero()) return 0;
  // double fast path with a conservative error envelope
  double est = 0.0, envelope = 1e-280;
  for (const auto& [i, q] : exponents.entries()) {
    double c = static_cast<double>(numerator(q).convert_to<double>()) /
               static_cast<double>(denominator(q).convert_to<double>());
    double lp = std::log(static_cast<double>(pres.prime(static_cast<std::size_t>(i))));
    est += c * lp;
    envelope += (std::abs(c) + 1.0) * lp * 1e-13;
  }
  if (std::isfinite(est) && std::abs(est) > 64 * envelope) return est > 0 ? 1 : -1;
  // exact: clear denominators, compare prime-power products
  Int den = 1;
  for (const auto& [i, q] : exponents.entries()) den = lcm(den, denominator(q));
  Int pos = 1, neg = 1;
  for (const auto& [i, q] : exponents.entries()) {
    Rat scaled = q * Rat(den);
    Int e = numerator(scaled);
    Int base = Int(pres.prime(static_cast<std::size_t>(i)));
    Int mag = abs_int(e);
    Int powed = 1;
    Int b = base;
    Int m = mag;
    while (m > 0) {
      if (m % 2 == 1) powed *= b;
      b *= b;
      m /= 2;
    }
    if (e > 0)
      pos *= powed;
    else if (e < 0)
      neg *= powed;
  }
  if (pos == neg) return 0;
  return pos > neg ? 1 : -1;
}

int AoagPresentation::compare(const SparseVec& a, const SparseVec& b) const {
  if (a == b) return 0;
  return log_value_sign(*this, a - b);
}

bool AoagPresentation::fact(std::size_t rel, std::span<const Element> args) const {
  switch (rel) {
    case kRelAdd:
      if (args.size() != 3) throw PreconditionViolation("add is ternary");
      return vec(args[0]) + vec(args[1]) == vec(args[2]);
    case kRelZero:
      if (args.size() != 1) throw PreconditionViolation("zero is unary");
      return vec(args[0]).is_zero();
    case kRelLess:
      if (args.size() != 2) throw PreconditionViolation("less is binary");
      return compare(vec(args[0]), vec(args[1])) < 0;
    default:
      throw PreconditionViolation("aoag: relation index out of range");
  }
}

std::shared_ptr<AoagPresentation> aoag_standard(AoagGroupSpec spec) {
  return std::make_shared<AoagPresentation>(std::move(spec));
}

std::shared_ptr<AoagPresentation> aoag_scrambled(AoagGroupSpec spec, ScramblePlan plan) {
  return std::make_shared<AoagPresentation>(std::move(spec), std::move(plan));
}

namespace {

struct Walker {
  SparseVec vec_;  // current remainder vector
  Int s, t;
};

int vsign(const AoagPresentation& pres, const SparseVec& v) { return log_value_sign(pres, v); }

}  // namespace

DensityWitness density_witness(const AoagPresentation& pres, const SparseVec& gen1,
                               const SparseVec& gen2, const SparseVec& lo,
                               const SparseVec& hi) {
  if (vsign(pres, hi - lo) <= 0)
    throw PreconditionViolation("density_witness: empty interval");
  if (!independent_over({gen1, gen2}, {}))
    throw PreconditionViolation("density_witness: generators dependent");
  int slo = vsign(pres, lo), shi = vsign(pres, hi);
  if (slo < 0 && shi > 0) return DensityWitness{SparseVec{}, Int(0), Int(0)};
  if (shi <= 0) {
    // mirror to the positive side
    DensityWitness w = density_witness(pres, gen1, gen2, -hi, -lo);
    return DensityWitness{-w.element, -w.s, -w.t};
  }
  // now 0 <= lo < hi in value
  SparseVec width = hi - lo;
  Walker a{vsign(pres, gen1) >= 0 ? gen1 : -gen1, Int(vsign(pres, gen1) >= 0 ? 1 : -1),
           Int(0)};
  Walker b{vsign(pres, gen2) >= 0 ? gen2 : -gen2, Int(0),
           Int(vsign(pres, gen2) >= 0 ? 1 : -1)};
  if (vsign(pres, a.vec_ - b.vec_) < 0) std::swap(a, b);
  // a = larger remainder, b = smaller
  int steps = 0;
  while (vsign(pres, b.vec_ - width) >= 0) {
    if (++steps > 512) {
      // bounded brute fallback
      for (Int ss = -128; ss <= 128; ++ss)
        for (Int tt = -128; tt <= 128; ++tt) {
          SparseVec cand = gen1.scaled(Rat(ss)) + gen2.scaled(Rat(tt));
          if (vsign(pres, cand - lo) > 0 && vsign(pres, hi - cand) > 0)
            return DensityWitness{cand, ss, tt};
        }
      throw BudgetExhausted("density_witness: remainder walk exceeded step budget");
    }
    // q = floor(a / b) via doubling + binary search
    Int q = 1;
    while (vsign(pres, a.vec_ - b.vec_.scaled(Rat(q * 2))) >= 0) q *= 2;
    Int lo_q = q, hi_q = q * 2;  // a >= lo_q*b, a < hi_q*b
    while (lo_q + 1 < hi_q) {
      Int mid = (lo_q + hi_q) / 2;
      if (vsign(pres, a.vec_ - b.vec_.scaled(Rat(mid))) >= 0)
        lo_q = mid;
      else
        hi_q = mid;
    }
    Walker next{a.vec_ - b.vec_.scaled(Rat(lo_q)), a.s - lo_q * b.s, a.t - lo_q * b.t};
    if (next.vec_.is_zero())
      throw std::logic_error("density_witness: generators were dependent");
    a = b;
    b = next;
  }
  // least m >= 1 with m*b > lo
  Int m = 1;
  if (vsign(pres, b.vec_ - lo) <= 0) {
    while (vsign(pres, b.vec_.scaled(Rat(m * 2)) - lo) <= 0) m *= 2;
    Int lo_m = m, hi_m = m * 2;  // lo_m*b <= lo < hi_m*b ... find least > lo
    while (lo_m + 1 < hi_m) {
      Int mid = (lo_m + hi_m) / 2;
      if (vsign(pres, b.vec_.scaled(Rat(mid)) - lo) <= 0)
        lo_m = mid;
      else
        hi_m = mid;
    }
    m = hi_m;
  }
  SparseVec cand = b.vec_.scaled(Rat(m));
  if (!(vsign(pres, cand - lo) > 0 && vsign(pres, hi - cand) > 0))
    throw std::logic_error("density_witness: candidate escaped the interval");
  return DensityWitness{cand, m * b.s, m * b.t};
}

namespace {

using Literal = GroupLiteral;

SparseVec literal_diff(const AoagPresentation& pres, const Literal& l,
                       std::span<const SparseVec> vals) {
  switch (l.rel) {
    case kRelAdd:
      return literal_term_value(pres, l.args[0], vals) +
             literal_term_value(pres, l.args[1], vals) -
             literal_term_value(pres, l.args[2], vals);
    case kRelZero:
      return literal_term_value(pres, l.args[0], vals);
    case kRelLess:
      return literal_term_value(pres, l.args[0], vals) -
             literal_term_value(pres, l.args[1], vals);
  }
  throw PreconditionViolation("unknown literal relation");
}

// Replace the complement generators of X over pure(keep) by elements of the
// kept span chosen inside the value interval that preserves every literal.
void reduce_complement_ordered(const AoagPresentation& pres,
                               const std::vector<SparseVec>& x_gens,
                               const std::vector<SparseVec>& keep,
                               const SparseVec& pair1, const SparseVec& pair2,
                               const std::vector<Literal>& lits,
                               std::vector<SparseVec>& tracked) {
  PureDecomposition dec = decompose_pure(x_gens, keep);
  if (dec.h.empty()) return;
  std::size_t gs = dec.g.size();
  for (std::size_t kk = dec.h.size(); kk > 0; --kk) {
    std::size_t hk = kk - 1;
    const SparseVec hvec = dec.h[hk];
    SparseVec x0 = hvec;  // current value of the generator being replaced
    // constraints on the replacement value X
    std::optional<SparseVec> lo, hi;          // value bounds (open)
    std::vector<SparseVec> excluded;          // exact vector exclusions
    for (const auto& l : lits) {
      SparseVec d = literal_diff(pres, l, tracked);
      auto drep = dec.rep(d);
      if (!drep) continue;
      Int dk = (*drep)[gs + hk];
      if (dk == 0) continue;
      SparseVec O = d - hvec.scaled(Rat(dk));
      if (l.rel == kRelLess) {
        // positive: val(O) + dk*X < 0; negated: > 0
        bool upper = l.negated ? (dk < 0) : (dk > 0);
        SparseVec bound = O.scaled(Rat(-1) / Rat(dk));
        if (upper) {
          if (!hi || vsign(pres, bound - *hi) < 0) hi = bound;
        } else {
          if (!lo || vsign(pres, bound - *lo) > 0) lo = bound;
        }
      } else if (l.negated) {
        // exclusion: X != -O/dk
        excluded.push_back(O.scaled(Rat(-1) / Rat(dk)));
      }
      // positive add/zero literals hold now and have dk == 0 (their diff is
      // the zero vector), so nothing to do
    }
    // the current value is strictly feasible; take a window around it
    SparseVec window = pair1;  // any positive-width pad
    if (vsign(pres, window) < 0) window = -window;
    if (window.is_zero()) window = pair2;
    SparseVec wlo = x0 - window, whi = x0 + window;
    if (lo && vsign(pres, *lo - wlo) > 0) wlo = *lo;
    if (hi && vsign(pres, whi - *hi) > 0) whi = *hi;
    // choose a replacement inside (wlo, whi) avoiding exclusions
    SparseVec replacement;
    for (int attempt = 0; attempt < 64; ++attempt) {
      DensityWitness w = density_witness(pres, pair1, pair2, wlo, whi);
      bool clean = true;
      for (const auto& ex : excluded)
        if (w.element == ex) clean = false;
      if (clean) {
        replacement = w.element;
        break;
      }
      wlo = w.element;  // retry above the collision
      if (attempt == 63)
        throw BudgetExhausted("ordered reduction: exclusions not avoidable");
    }
    for (auto& v : tracked) {
      auto r = dec.rep(v);
      if (!r) throw std::logic_error("ordered reduction: tracked value outside X");
      Int coefficient = (*r)[gs + hk];
      if (coefficient == 0) continue;
      v = v - hvec.scaled(Rat(coefficient)) + replacement.scaled(Rat(coefficient));
    }
  }
}

std::pair<SparseVec, SparseVec> independent_pair(const std::vector<SparseVec>& pool) {
  LinSolver s;
  std::optional<SparseVec> first;
  for (const auto& v : pool) {
    if (s.insert(v)) {
      if (!first) {
        first = v;
      } else {
        return {*first, v};
      }
    }
  }
  throw PreconditionViolation("need at least two independent elements");
}

}  // namespace

WitnessSubstitution aoag_dependent_witness(const AoagPresentation& pres,
                                           std::span<const Element> params, Element a,
                                           const ExistFormula& psi,
                                           const std::vector<SparseVec>* witness_hint,
                                           std::uint64_t search_budget, bool verify) {
  if (params.empty()) throw PreconditionViolation("dependent_witness: params must be non-empty");
  std::vector<SparseVec> c_vecs;
  for (Element c : params) c_vecs.push_back(pres.vec(c));
  auto [p1, p2] = independent_pair(c_vecs);
  std::vector<Literal> lits = matrix_literals(psi.matrix);
  std::vector<SparseVec> w_vecs;
  if (witness_hint) {
    w_vecs = *witness_hint;
  } else if (psi.bound_vars() > 0) {
    std::vector<Element> frees(params.begin(), params.end());
    frees.push_back(a);
    auto found = find_witnesses(pres, psi, frees, search_budget);
    if (!found)
      throw PreconditionViolation("dependent_witness: psi not confirmed within budget");
    w_vecs = std::move(*found);
  }
  std::vector<SparseVec> tracked = c_vecs;
  tracked.push_back(pres.vec(a));
  for (auto& w : w_vecs) tracked.push_back(w);
  reduce_complement_ordered(pres, tracked, c_vecs, p1, p2, lits, tracked);
  WitnessSubstitution out;
  out.b = tracked[params.size()];
  for (std::size_t i = params.size() + 1; i < tracked.size(); ++i)
    out.witness_images.push_back(tracked[i]);
  if (verify) {
    LinSolver span;
    for (const auto& c : c_vecs) span.insert(c);
    if (!span.in_span(out.b))
      throw std::logic_error("dependent_witness: image not in parameter span");
    if (!all_literals_hold(pres, lits, tracked))
      throw std::logic_error("dependent_witness: literals broken by substitution");
  }
  // least-coded tie-break below the constructive witness
  auto bid = pres.id_of(out.b);
  std::uint64_t scan_cap = 4096;
  if (bid && *bid < scan_cap) scan_cap = *bid;
  {
    LinSolver span;
    for (const auto& c : c_vecs) span.insert(c);
    for (Element e = 0; e < scan_cap; ++e) {
      SparseVec ev = pres.vec(e);
      if (ev == out.b) break;
      if (!span.in_span(ev)) continue;
      std::vector<SparseVec> cand = c_vecs;
      cand.push_back(ev);
      for (const auto& w : out.witness_images) cand.push_back(w);
      if (all_literals_hold(pres, lits, cand)) {
        out.b = ev;
        break;
      }
    }
  }
  return out;
}

std::vector<SparseVec> aoag_local_indist_witness(const AoagPresentation& pres,
                                                 std::span<const Element> params,
                                                 std::span<const Element> us,
                                                 std::span<const Element> vs,
                                                 const ExistFormula& phi,
                                                 std::uint64_t search_budget) {
  if (us.size() != vs.size())
    throw PreconditionViolation("local_indist_witness: slot arity mismatch");
  std::vector<SparseVec> c_vecs, u_vecs, v_vecs;
  for (Element c : params) c_vecs.push_back(pres.vec(c));
  for (Element u : us) u_vecs.push_back(pres.vec(u));
  for (Element v : vs) v_vecs.push_back(pres.vec(v));
  if (!independent_over(u_vecs, c_vecs) || !independent_over(v_vecs, c_vecs))
    throw PreconditionViolation("local_indist_witness: slots not independent over params");
  // dimension of params must be at least 1
  SparseVec cbase;
  bool have_c = false;
  for (const auto& c : c_vecs)
    if (!c.is_zero()) {
      cbase = c;
      have_c = true;
      break;
    }
  if (!have_c) throw PreconditionViolation("local_indist_witness: trivial parameter span");
  std::vector<Literal> lits = matrix_literals(phi.matrix);
  std::vector<SparseVec> w_vecs;
  if (phi.bound_vars() > 0) {
    std::vector<Element> frees(params.begin(), params.end());
    frees.insert(frees.end(), us.begin(), us.end());
    auto found = find_witnesses(pres, phi, frees, search_budget);
    if (!found)
      throw PreconditionViolation("local_indist_witness: phi not confirmed within budget");
    w_vecs = std::move(*found);
  }
  std::vector<SparseVec> tracked = c_vecs;
  tracked.insert(tracked.end(), u_vecs.begin(), u_vecs.end());
  tracked.insert(tracked.end(), w_vecs.begin(), w_vecs.end());
  // pull witnesses into span(params, us); the density pair may use the u's
  std::vector<SparseVec> keep = c_vecs;
  keep.insert(keep.end(), u_vecs.begin(), u_vecs.end());
  auto [p1, p2] = independent_pair(keep);
  reduce_complement_ordered(pres, tracked, keep, p1, p2, lits, tracked);
  // express tracked values over (c-basis, u-slots)
  LinSolver cspan;
  std::vector<SparseVec> cbasis;
  for (const auto& c : c_vecs)
    if (cspan.insert(c)) cbasis.push_back(c);
  LinSolver full = cspan;
  for (const auto& u : u_vecs) full.insert(u);
  struct Expr {
    SparseVec const_part;       // fixed value (over the c-basis)
    std::vector<Rat> z_coeffs;  // over the slot values
  };
  std::vector<Expr> exprs;
  for (const auto& tv : tracked) {
    auto combo = full.solve(tv);
    if (!combo) throw std::logic_error("local_indist: value outside span after reduction");
    Expr e;
    for (std::size_t i = 0; i < cbasis.size(); ++i)
      e.const_part += cbasis[i].scaled((*combo)[i]);
    e.z_coeffs.assign(us.size(), Rat(0));
    for (std::size_t i = 0; i < us.size(); ++i) e.z_coeffs[i] = (*combo)[cbasis.size() + i];
    exprs.push_back(std::move(e));
  }
  auto expr_of_term = [&](const Term& t) -> Expr {
    if (t.kind == Term::Kind::Const) {
      Expr e;
      e.const_part = pres.vec(t.elem);
      e.z_coeffs.assign(us.size(), Rat(0));
      return e;
    }
    return exprs.at(t.var);
  };
  struct Constraint {
    std::vector<Rat> coeffs;  // over z
    SparseVec cst;
    bool strict_neg;  // value(cst + coeffs . z) < 0 (else > 0)
  };
  std::vector<Constraint> constraints;
  std::vector<Constraint> exclusions;  // value == 0 forbidden
  for (const auto& l : lits) {
    if (l.rel == kRelLess) {
      Expr lhs = expr_of_term(l.args[0]), rhs = expr_of_term(l.args[1]);
      Constraint c;
      c.cst = lhs.const_part - rhs.const_part;
      c.coeffs.assign(us.size(), Rat(0));
      for (std::size_t i = 0; i < us.size(); ++i)
        c.coeffs[i] = lhs.z_coeffs[i] - rhs.z_coeffs[i];
      bool trivial = true;
      for (auto& q : c.coeffs)
        if (q != 0) trivial = false;
      c.strict_neg = !l.negated;
      if (trivial) {
        int s = vsign(pres, c.cst);
        bool ok = l.negated ? s >= 0 : s < 0;
        if (!ok) throw PreconditionViolation("local_indist: fixed order literal fails");
        continue;
      }
      constraints.push_back(std::move(c));
    } else {
      Expr dd;
      if (l.rel == kRelAdd) {
        Expr x = expr_of_term(l.args[0]), y = expr_of_term(l.args[1]),
             z = expr_of_term(l.args[2]);
        dd.const_part = x.const_part + y.const_part - z.const_part;
        dd.z_coeffs.assign(us.size(), Rat(0));
        for (std::size_t i = 0; i < us.size(); ++i)
          dd.z_coeffs[i] = x.z_coeffs[i] + y.z_coeffs[i] - z.z_coeffs[i];
      } else {
        dd = expr_of_term(l.args[0]);
      }
      bool trivial = true;
      for (auto& q : dd.z_coeffs)
        if (q != 0) trivial = false;
      if (!l.negated) {
        // equation must be identically zero on independent data
        if (!trivial || !dd.const_part.is_zero())
          throw PreconditionViolation(
              "local_indist: equation atom non-trivial on independent data");
        continue;
      }
      if (trivial) {
        if (dd.const_part.is_zero())
          throw PreconditionViolation("local_indist: negated atom identically zero");
        continue;
      }
      Constraint c;
      c.cst = dd.const_part;
      c.coeffs = dd.z_coeffs;
      c.strict_neg = false;
      exclusions.push_back(std::move(c));
    }
  }
  // sequential choice with Fourier-Motzkin feasibility on the remaining slots
  std::vector<SparseVec> chosen(us.size());
  std::vector<bool> done(us.size(), false);
  // eliminate from the last slot to the first, then choose in order
  std::function<std::pair<std::optional<SparseVec>, std::optional<SparseVec>>(
      std::vector<Constraint>, std::size_t)>
      interval_for;
  auto substitute = [&](std::vector<Constraint> cs, std::size_t idx,
                        const SparseVec& value) {
    for (auto& c : cs) {
      if (c.coeffs[idx] != 0) {
        c.cst += value.scaled(c.coeffs[idx]);
        c.coeffs[idx] = 0;
      }
    }
    return cs;
  };
  interval_for = [&](std::vector<Constraint> cs, std::size_t idx)
      -> std::pair<std::optional<SparseVec>, std::optional<SparseVec>> {
    // Fourier-Motzkin eliminate slots > idx (unchosen), then read the bounds
    for (std::size_t j = us.size(); j > idx + 1; --j) {
      std::size_t v = j - 1;
      std::vector<Constraint> next;
      std::vector<Constraint> uppers, lowers;
      for (auto& c : cs) {
        if (c.coeffs[v] == 0) {
          next.push_back(c);
          continue;
        }
        // normalize to value(cst' + rest) < 0 form: coeff on v positive = upper
        Constraint n = c;
        if (!n.strict_neg) {
          // flip to < 0
          n.cst = -n.cst;
          for (auto& q : n.coeffs) q = -q;
          n.strict_neg = true;
        }
        if (n.coeffs[v] > 0)
          uppers.push_back(n);
        else
          lowers.push_back(n);
      }
      for (const auto& up : uppers)
        for (const auto& lo2 : lowers) {
          // up: a*v + A < 0; lo2: -b*v + B < 0 (b>0): combine b*A + a*B < 0
          Rat aq = up.coeffs[v], bq = -lo2.coeffs[v];
          Constraint comb;
          comb.strict_neg = true;
          comb.cst = up.cst.scaled(bq) + lo2.cst.scaled(aq);
          comb.coeffs.assign(us.size(), Rat(0));
          for (std::size_t i2 = 0; i2 < us.size(); ++i2)
            comb.coeffs[i2] = up.coeffs[i2] * bq + lo2.coeffs[i2] * aq;
          comb.coeffs[v] = 0;
          next.push_back(std::move(comb));
        }
      cs = std::move(next);
    }
    std::optional<SparseVec> lo, hi;
    for (auto& c : cs) {
      Constraint n = c;
      if (!n.strict_neg) {
        n.cst = -n.cst;
        for (auto& q : n.coeffs) q = -q;
        n.strict_neg = true;
      }
      Rat coeff = n.coeffs[idx];
      if (coeff == 0) {
        if (vsign(pres, n.cst) >= 0)
          throw PreconditionViolation("local_indist: infeasible constraint system");
        continue;
      }
      SparseVec bound = n.cst.scaled(Rat(-1) / coeff);
      if (coeff > 0) {
        if (!hi || vsign(pres, bound - *hi) < 0) hi = bound;
      } else {
        if (!lo || vsign(pres, bound - *lo) > 0) lo = bound;
      }
    }
    return {lo, hi};
  };
  std::vector<Constraint> current = constraints;
  std::vector<Constraint> current_excl = exclusions;
  for (std::size_t i = 0; i < us.size(); ++i) {
    auto [lo, hi] = interval_for(current, i);
    // the original slot value is feasible, pad unbounded sides around it
    SparseVec u_val = u_vecs[i];
    SparseVec pad = cbase;
    if (vsign(pres, pad) < 0) pad = -pad;
    SparseVec wlo = lo ? *lo : u_val - pad;
    SparseVec whi = hi ? *hi : u_val + pad;
    if (lo && hi && vsign(pres, whi - wlo) <= 0)
      throw PreconditionViolation("local_indist: empty value window");
    SparseVec pick;
    for (int attempt = 0; attempt < 64; ++attempt) {
      DensityWitness w = density_witness(pres, cbase, v_vecs[i], wlo, whi);
      SparseVec cand = w.element;
      if (w.t == 0) {
        // need a nonzero v-coefficient: nudge by a small combo with t != 0
        DensityWitness nudge =
            density_witness(pres, cbase, v_vecs[i], SparseVec{}, whi - cand);
        if (nudge.t == 0) {
          wlo = cand;
          continue;
        }
        cand += nudge.element;
        w.t = nudge.t;
      }
      bool clean = true;
      for (const auto& ex : current_excl) {
        SparseVec val = ex.cst;
        for (std::size_t j = 0; j < us.size(); ++j) {
          if (ex.coeffs[j] == 0) continue;
          if (j < i || (j == i)) {
            val += (j == i ? cand : chosen[j]).scaled(ex.coeffs[j]);
          } else {
            val += u_vecs[j].scaled(ex.coeffs[j]);  // provisional
          }
        }
        if (val.is_zero() && ex.coeffs[i] != 0) clean = false;
      }
      if (clean) {
        pick = cand;
        break;
      }
      wlo = cand;
      if (attempt == 63)
        throw BudgetExhausted("local_indist: exclusions not avoidable");
    }
    chosen[i] = pick;
    done[i] = true;
    current = substitute(current, i, pick);
    current_excl = substitute(current_excl, i, pick);
  }
  // final verification: literals, independence over params
  std::vector<SparseVec> vals = c_vecs;
  for (std::size_t i = 0; i < us.size(); ++i) vals.push_back(chosen[i]);
  // recompute witness images from their expressions
  for (std::size_t widx = params.size() + us.size(); widx < exprs.size(); ++widx) {
    SparseVec img = exprs[widx].const_part;
    for (std::size_t i = 0; i < us.size(); ++i)
      img += chosen[i].scaled(exprs[widx].z_coeffs[i]);
    vals.push_back(img);
  }
  if (!all_literals_hold(pres, lits, vals))
    throw std::logic_error("local_indist: literals broken by the choice");
  std::vector<SparseVec> slots(vals.begin() + params.size(),
                               vals.begin() + params.size() + us.size());
  if (!independent_over(slots, c_vecs))
    throw std::logic_error("local_indist: images not independent over params");
  // group membership check
  for (const auto& v : slots)
    for (const auto& [idx, q] : v.entries())
      if (!pres.enumeration().coeff_allowed(idx, q))
        throw std::logic_error("local_indist: image leaves the group");
  return slots;
}

bool AoagConditionG::adjust_targets_(const FiniteFragment& frag, std::vector<LineMove>& moves,
                                     std::span<const Element> kept) const {
  if (moves.empty()) return true;
  const AoagPresentation& pres = *apres_;
  // sort fragment elements by value; minimal adjacent slack between elements
  // whose shift profiles differ bounds the usable window
  std::uint64_t n = frag.size();
  std::vector<Element> order(n);
  for (Element e = 0; e < n; ++e) order[e] = e;
  std::vector<SparseVec> vecs(n);
  for (Element e = 0; e < n; ++e) vecs[e] = pres.vec(e);
  std::sort(order.begin(), order.end(), [&](Element x, Element y) {
    return pres.compare(vecs[x], vecs[y]) < 0;
  });
  auto profile = [&](Element e) {
    std::vector<bool> p(moves.size());
    for (std::size_t m = 0; m < moves.size(); ++m)
      p[m] = vecs[e].coeff(moves[m].src_direction) == moves[m].moved_coeff;
    return p;
  };
  std::optional<SparseVec> min_slack;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    if (profile(order[i]) == profile(order[i + 1])) continue;
    SparseVec gap = vecs[order[i + 1]] - vecs[order[i]];
    if (!min_slack || vsign(pres, gap - *min_slack) < 0) min_slack = gap;
  }
  // choose per-move target values within +- slack/(2*(moves+1)) of the value
  // they replace
  SparseVec eps;
  if (min_slack) {
    eps = min_slack->scaled(Rat(1, 2 * static_cast<long>(moves.size() + 1)));
  } else {
    eps = SparseVec::unit(0, Rat(1));  // no differing pairs: any window works
  }
  // an independent pair for value placement: prefer kept-span elements
  std::vector<SparseVec> pool;
  for (Element e : kept) pool.push_back(pres.vec(e));
  std::int64_t fresh_dir = -1;
  for (Element e = 0; e < n; ++e)
    if (!vecs[e].entries().empty()) fresh_dir = std::max(fresh_dir, vecs[e].max_index());
  for (const auto& mv : moves)
    for (const auto& [d, q] : mv.target.entries()) fresh_dir = std::max(fresh_dir, d);
  for (auto& mv : moves) {
    SparseVec old_part = SparseVec::unit(mv.src_direction, mv.moved_coeff);
    SparseVec val0 = mv.fresh ? old_part : mv.target;  // replacement targets keep beta*nu
    SparseVec base = mv.fresh ? SparseVec{} : mv.target;
    // window for the value of the final target
    SparseVec lo = old_part - eps, hi = old_part + eps;
    if (mv.fresh) {
      // fresh-prime pair for this move
      SparseVec f1 = SparseVec::unit(++fresh_dir, Rat(1));
      SparseVec f2 = SparseVec::unit(++fresh_dir, Rat(1));
      DensityWitness w = density_witness(pres, f1, f2, lo, hi);
      if (w.s == 0 && w.t == 0) return false;  // zero target would collapse the slot
      mv.target = w.element;
    } else {
      // add a kept-span correction to pull beta*nu into the window
      if (pool.size() < 2) return false;
      auto [p1, p2] = independent_pair(pool);
      DensityWitness w = density_witness(pres, p1, p2, lo - base, hi - base);
      mv.target = base + w.element;
    }
  }
  return true;
}

bool AoagConditionG::order_preserved_(const FiniteFragment& frag,
                                      const std::vector<LineMove>& moves) const {
  const AoagPresentation& pres = *apres_;
  std::uint64_t n = frag.size();
  std::vector<Element> order(n);
  for (Element e = 0; e < n; ++e) order[e] = e;
  std::vector<SparseVec> vecs(n);
  for (Element e = 0; e < n; ++e) vecs[e] = pres.vec(e);
  std::sort(order.begin(), order.end(), [&](Element x, Element y) {
    return pres.compare(vecs[x], vecs[y]) < 0;
  });
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    SparseVec a = apply_moves_(moves, vecs[order[i]]);
    SparseVec b = apply_moves_(moves, vecs[order[i + 1]]);
    if (!(pres.compare(a, b) < 0)) return false;
  }
  return true;
}

}  // namespace pregeom
