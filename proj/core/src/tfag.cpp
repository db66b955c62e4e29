#include "pregeom/tfag.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <sstream>

namespace pregeom {

Signature tfag_signature() {
  return Signature({{"add", 3}, {"zero", 1}});
}

TfagPresentation::TfagPresentation(TfagGroupSpec spec, ScramblePlan plan)
    : GroupPresentation(tfag_signature(), spec.kinds(), spec.rest, std::move(plan)),
      spec_(std::move(spec)) {}

bool TfagPresentation::fact(std::size_t rel, std::span<const Element> args) const {
  switch (rel) {
    case kRelAdd: {
      if (args.size() != 3) throw PreconditionViolation("add is ternary");
      return vec(args[0]) + vec(args[1]) == vec(args[2]);
    }
    case kRelZero: {
      if (args.size() != 1) throw PreconditionViolation("zero is unary");
      return vec(args[0]).is_zero();
    }
    default:
      throw PreconditionViolation("tfag: relation index out of range");
  }
}

std::shared_ptr<TfagPresentation> tfag_standard(TfagGroupSpec spec) {
  return std::make_shared<TfagPresentation>(std::move(spec));
}

std::shared_ptr<TfagPresentation> tfag_scrambled(TfagGroupSpec spec, ScramblePlan plan) {
  return std::make_shared<TfagPresentation>(std::move(spec), std::move(plan));
}

namespace {

// rational row reduction returning the inverse of a square matrix whose
// inverse is integral (unimodular input)
std::vector<std::vector<Rat>> invert_unimodular(const std::vector<std::vector<Int>>& m) {
  std::size_t n = m.size();
  std::vector<std::vector<Rat>> a(n, std::vector<Rat>(2 * n, Rat(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = Rat(m[i][j]);
    a[i][n + i] = 1;
  }
  for (std::size_t col = 0, row = 0; col < n && row < n; ++col) {
    std::size_t piv = row;
    while (piv < n && a[piv][col] == 0) ++piv;
    if (piv == n) continue;
    std::swap(a[piv], a[row]);
    Rat d = a[row][col];
    for (auto& x : a[row]) x /= d;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == row || a[i][col] == 0) continue;
      Rat f = a[i][col];
      for (std::size_t j = 0; j < 2 * n; ++j) a[i][j] -= f * a[row][j];
    }
    ++row;
  }
  std::vector<std::vector<Rat>> inv(n, std::vector<Rat>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = a[i][n + j];
  return inv;
}

}  // namespace

std::optional<std::vector<Int>> PureDecomposition::rep(const SparseVec& v) const {
  auto combo = basis_solver_.solve(v);
  if (!combo) return std::nullopt;
  std::size_t r = minv_.size();
  std::vector<Int> out(r, Int(0));
  for (std::size_t j = 0; j < r; ++j) {
    Rat acc(0);
    for (std::size_t i = 0; i < r; ++i) acc += (*combo)[i] * minv_[i][j];
    if (denominator(acc) != 1) return std::nullopt;
    out[j] = numerator(acc);
  }
  return out;
}

PureDecomposition decompose_pure(const std::vector<SparseVec>& x_generators,
                                 const std::vector<SparseVec>& c_elems) {
  // dense coordinates
  std::vector<std::int64_t> dims;
  for (const auto& v : x_generators)
    for (const auto& [i, q] : v.entries()) dims.push_back(i);
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  std::size_t m = dims.size();
  auto dim_index = [&](std::int64_t i) -> std::optional<std::size_t> {
    auto it = std::lower_bound(dims.begin(), dims.end(), i);
    if (it == dims.end() || *it != i) return std::nullopt;
    return static_cast<std::size_t>(it - dims.begin());
  };
  // integerize: D * gens
  Int den = 1;
  for (const auto& v : x_generators)
    for (const auto& [i, q] : v.entries()) den = lcm(den, denominator(q));
  IntMat A(x_generators.size(), m);
  for (std::size_t r = 0; r < x_generators.size(); ++r)
    for (const auto& [i, q] : x_generators[r].entries()) {
      Rat scaled = q * Rat(den);
      A.at(r, *dim_index(i)) = numerator(scaled);
    }
  // lattice basis of the row lattice: with U A V = D, rows d_i * (V^{-1})_i
  SmithResult s = smith_normal_form(A);
  std::size_t rank = s.rank;
  std::vector<std::vector<Int>> vinv_rows;
  {
    std::vector<std::vector<Int>> vmat(m, std::vector<Int>(m));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) vmat[i][j] = s.V.at(i, j);
    auto vinv = invert_unimodular(vmat);
    for (std::size_t i = 0; i < rank; ++i) {
      std::vector<Int> row(m);
      for (std::size_t j = 0; j < m; ++j) {
        if (denominator(vinv[i][j]) != 1)
          throw std::logic_error("decompose_pure: V inverse not integral");
        row[j] = numerator(vinv[i][j]) * s.D.at(i, i);
      }
      vinv_rows.push_back(std::move(row));
    }
  }
  // basis vectors beta_i = (1/den) * row_i
  std::vector<SparseVec> beta;
  for (std::size_t i = 0; i < rank; ++i) {
    std::vector<SparseVec::Entry> es;
    for (std::size_t j = 0; j < m; ++j)
      if (vinv_rows[i][j] != 0) es.push_back({dims[j], Rat(vinv_rows[i][j], den)});
    beta.push_back(SparseVec(std::move(es)));
  }
  PureDecomposition out;
  for (const auto& b : beta) out.basis_solver_.insert(b);
  // c coordinates over the basis (must be integral: c in X)
  IntMat cmat(c_elems.size(), rank);
  for (std::size_t r = 0; r < c_elems.size(); ++r) {
    auto combo = out.basis_solver_.solve(c_elems[r]);
    if (!combo) throw PreconditionViolation("decompose_pure: element outside the subgroup");
    for (std::size_t i = 0; i < rank; ++i) {
      if (denominator((*combo)[i]) != 1)
        throw PreconditionViolation("decompose_pure: element outside the subgroup");
      cmat.at(r, i) = numerator((*combo)[i]);
    }
  }
  std::vector<std::vector<Int>> c_rows = saturation_basis(cmat);
  std::vector<std::vector<Int>> w_rows = complement_basis(c_rows, rank);
  // map back
  auto combine = [&](const std::vector<Int>& coords) {
    SparseVec acc;
    for (std::size_t i = 0; i < rank; ++i)
      if (coords[i] != 0) acc += beta[i].scaled(Rat(coords[i]));
    return acc;
  };
  for (const auto& row : c_rows) out.g.push_back(combine(row));
  for (const auto& row : w_rows) out.h.push_back(combine(row));
  // change of basis: M = [C; W] unimodular, rep_gh = rep_basis * M^{-1}
  std::vector<std::vector<Int>> mrows = c_rows;
  mrows.insert(mrows.end(), w_rows.begin(), w_rows.end());
  out.minv_ = invert_unimodular(mrows);
  return out;
}

namespace {

using Literal = GroupLiteral;

// The finite-exclusion reduction: replaces the complement generators of
// X = <x_gens> over the pure closure of `keep` by integer multiples of u,
// preserving all (in)equational literals. `tracked` values are rewritten in
// place. Order literals are not supported here (the ordered class reduces
// through value intervals instead).
void reduce_complement_into_span(const GroupPresentation& pres,
                                 const std::vector<SparseVec>& x_gens,
                                 const std::vector<SparseVec>& keep, const SparseVec& u,
                                 const std::vector<Literal>& lits,
                                 std::vector<SparseVec>& tracked) {
  PureDecomposition dec = decompose_pure(x_gens, keep);
  if (dec.h.empty()) return;
  std::size_t gs = dec.g.size();
  for (std::size_t kk = dec.h.size(); kk > 0; --kk) {
    std::size_t hk = kk - 1;
    const SparseVec hvec = dec.h[hk];
    // exclusions: integer multiples m with some negated literal collapsing
    std::set<Int> bad;
    auto literal_diff = [&](const Literal& l) -> std::optional<SparseVec> {
      if (l.rel == kRelAdd)
        return literal_term_value(pres, l.args[0], tracked) +
               literal_term_value(pres, l.args[1], tracked) -
               literal_term_value(pres, l.args[2], tracked);
      if (l.rel == kRelZero) return literal_term_value(pres, l.args[0], tracked);
      return std::nullopt;  // order literals handled by the ordered class
    };
    for (const auto& l : lits) {
      if (!l.negated) continue;
      auto d = literal_diff(l);
      if (!d) continue;
      auto drep = dec.rep(*d);
      if (!drep) continue;  // outside X: substitution cannot zero it
      Int dk = (*drep)[gs + hk];
      if (dk == 0) continue;
      // residual O = d - dk*h_k; bad m solves O + dk*m*u = 0
      SparseVec O = *d - hvec.scaled(Rat(dk));
      if (O.is_zero()) {
        bad.insert(Int(0));
        continue;
      }
      // O must be a rational multiple of u
      if (u.is_zero()) continue;
      Rat ratio = 0;
      bool multiple = true;
      // O = lambda * u?
      const auto& ue = u.entries();
      ratio = O.coeff(ue.front().first) / ue.front().second;
      if (!(u.scaled(ratio) == O)) multiple = false;
      if (!multiple) continue;
      Rat mbad = -ratio / Rat(dk);
      if (denominator(mbad) == 1) bad.insert(numerator(mbad));
    }
    Int m = 1;
    while (bad.count(m)) ++m;
    SparseVec replacement = u.scaled(Rat(m));
    // rewrite tracked values: v -> v - rep_hk(v)*h_k + rep_hk(v)*m*u
    for (auto& v : tracked) {
      auto r = dec.rep(v);
      if (!r) throw std::logic_error("reduce: tracked value outside X");
      Int coefficient = (*r)[gs + hk];
      if (coefficient == 0) continue;
      v = v - hvec.scaled(Rat(coefficient)) + replacement.scaled(Rat(coefficient));
    }
  }
}

}  // namespace

WitnessSubstitution tfag_dependent_witness(const GroupPresentation& pres,
                                           std::span<const Element> params, Element a,
                                           const ExistFormula& psi,
                                           const std::vector<SparseVec>* witness_hint,
                                           std::uint64_t search_budget, bool verify) {
  if (params.empty()) throw PreconditionViolation("dependent_witness: params must be non-empty");
  std::vector<SparseVec> c_vecs;
  for (Element c : params) c_vecs.push_back(pres.vec(c));
  SparseVec a_vec = pres.vec(a);
  std::vector<Literal> lits = matrix_literals(psi.matrix);
  // witnesses for the existential block
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
  // tracked values: [params..., a, witnesses...] matching variable indices
  std::vector<SparseVec> tracked = c_vecs;
  tracked.push_back(a_vec);
  for (auto& w : w_vecs) tracked.push_back(w);
  // X = <params, a, witnesses>; u = first nonzero parameter
  std::vector<SparseVec> x_gens = tracked;
  const SparseVec* u = nullptr;
  for (const auto& c : c_vecs)
    if (!c.is_zero()) {
      u = &c;
      break;
    }
  if (!u) throw PreconditionViolation("dependent_witness: params span is trivial");
  reduce_complement_into_span(pres, x_gens, c_vecs, *u, lits, tracked);
  WitnessSubstitution out;
  out.b = tracked[params.size()];
  for (std::size_t i = params.size() + 1; i < tracked.size(); ++i)
    out.witness_images.push_back(tracked[i]);
  if (verify) {
    // b must lie in the span of the parameters
    LinSolver span;
    for (const auto& c : c_vecs) span.insert(c);
    if (!span.in_span(out.b))
      throw std::logic_error("dependent_witness: image not in parameter span");
    if (!all_literals_hold(pres, lits, tracked))
      throw std::logic_error("dependent_witness: literals broken by substitution");
  }
  // least-coded tie-break: scan ids below the constructive witness
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
        // keep the constructive witness images (they already satisfy psi)
        break;
      }
    }
  }
  return out;
}

std::vector<SparseVec> tfag_local_indist_witness(const GroupPresentation& pres,
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
  // tracked = [params..., us..., witnesses...]
  std::vector<SparseVec> tracked = c_vecs;
  tracked.insert(tracked.end(), u_vecs.begin(), u_vecs.end());
  tracked.insert(tracked.end(), w_vecs.begin(), w_vecs.end());
  // step 1: pull the witnesses into span(params, us)
  std::vector<SparseVec> keep = c_vecs;
  keep.insert(keep.end(), u_vecs.begin(), u_vecs.end());
  const SparseVec* u0 = nullptr;
  for (const auto& c : keep)
    if (!c.is_zero()) {
      u0 = &c;
      break;
    }
  if (!u0) throw PreconditionViolation("local_indist_witness: trivial span");
  reduce_complement_into_span(pres, tracked, keep, *u0, lits, tracked);
  // step 2: Q-linear map fixing span(params) and sending u_i to m*v_i, with m
  // clearing denominators so images stay in the group
  LinSolver cspan;
  std::vector<SparseVec> cbasis;
  for (const auto& c : c_vecs)
    if (cspan.insert(c)) cbasis.push_back(c);
  LinSolver full = cspan;
  for (const auto& u : u_vecs) full.insert(u);
  auto map_with_multiplier = [&](const Int& mult) -> std::optional<std::vector<SparseVec>> {
    std::vector<SparseVec> images;
    for (const auto& tv : tracked) {
      auto combo = full.solve(tv);
      if (!combo) return std::nullopt;  // outside span(c, u): reduction failed
      SparseVec img;
      for (std::size_t i = 0; i < cbasis.size(); ++i)
        img += cbasis[i].scaled((*combo)[i]);
      for (std::size_t i = 0; i < u_vecs.size(); ++i)
        img += v_vecs[i].scaled((*combo)[cbasis.size() + i] * Rat(mult));
      // group membership: every coordinate must be allowed
      for (const auto& [idx, coeff] : img.entries())
        if (!pres.enumeration().coeff_allowed(idx, coeff)) return std::nullopt;
      images.push_back(std::move(img));
    }
    return images;
  };
  for (Int mult = 1; mult <= 4096; mult *= 2) {
    auto images = map_with_multiplier(mult);
    if (!images) continue;
    // verify: literals hold, images of the u-slots independent over params
    std::vector<SparseVec> w_slots(images->begin() + params.size(),
                                   images->begin() + params.size() + us.size());
    if (!independent_over(w_slots, c_vecs)) continue;
    std::vector<SparseVec> vals = c_vecs;
    vals.insert(vals.end(), images->begin() + params.size(), images->end());
    if (!all_literals_hold(pres, lits, vals)) continue;
    return w_slots;
  }
  throw PreconditionViolation("local_indist_witness: no valid multiplier found");
}

std::string PartialSubgroupCertificate::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["k"] = k.str();
  auto vecs = [](const std::vector<SparseVec>& vs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& v : vs) {
      nlohmann::ordered_json e = nlohmann::ordered_json::array();
      for (const auto& [i, q] : v.entries()) {
        e.push_back({{"i", i},
                     {"n", numerator(q).str()},
                     {"d", denominator(q).str()}});
      }
      arr.push_back(std::move(e));
    }
    return arr;
  };
  auto reps = [](const std::vector<std::vector<Int>>& rs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rs) {
      nlohmann::ordered_json e = nlohmann::ordered_json::array();
      for (const auto& x : r) e.push_back(x.str());
      arr.push_back(std::move(e));
    }
    return arr;
  };
  j["g"] = vecs(g);
  j["h"] = vecs(h);
  j["c_reps"] = reps(c_reps);
  j["a_reps"] = reps(a_reps);
  j["w_reps"] = reps(w_reps);
  return j.dump();
}

PartialSubgroupCertificate PartialSubgroupCertificate::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PartialSubgroupCertificate cert;
  cert.k = Int(j.at("k").get<std::string>());
  auto vecs = [](const nlohmann::json& arr) {
    std::vector<SparseVec> out;
    for (const auto& e : arr) {
      std::vector<SparseVec::Entry> entries;
      for (const auto& t : e) {
        entries.push_back({t.at("i").get<std::int64_t>(),
                           Rat(Int(t.at("n").get<std::string>()),
                               Int(t.at("d").get<std::string>()))});
      }
      out.push_back(SparseVec(std::move(entries)));
    }
    return out;
  };
  auto reps = [](const nlohmann::json& arr) {
    std::vector<std::vector<Int>> out;
    for (const auto& e : arr) {
      std::vector<Int> row;
      for (const auto& x : e) row.push_back(Int(x.get<std::string>()));
      out.push_back(std::move(row));
    }
    return out;
  };
  cert.g = vecs(j.at("g"));
  cert.h = vecs(j.at("h"));
  cert.c_reps = reps(j.at("c_reps"));
  cert.a_reps = reps(j.at("a_reps"));
  cert.w_reps = reps(j.at("w_reps"));
  return cert;
}

namespace {

bool in_box(const std::vector<Int>& rep, const Int& k) {
  for (const auto& x : rep)
    if (abs_int(x) > k) return false;
  return true;
}

}  // namespace

bool certificate_check(const GroupPresentation& pres, const PartialSubgroupCertificate& cert,
                       std::span<const Element> params, const ExistFormula& psi) {
  std::size_t p = cert.g.size(), q = cert.h.size();
  std::size_t dim = p + q;
  if (cert.k < 1) throw PreconditionViolation("certificate: box bound must be positive");
  auto check_rep_shape = [&](const std::vector<std::vector<Int>>& reps) {
    for (const auto& r : reps)
      if (r.size() != dim) throw PreconditionViolation("certificate: rep width mismatch");
  };
  check_rep_shape(cert.c_reps);
  check_rep_shape(cert.a_reps);
  check_rep_shape(cert.w_reps);
  if (cert.c_reps.size() != params.size())
    throw PreconditionViolation("certificate: parameter count mismatch");
  if (psi.free_vars != params.size() + cert.a_reps.size())
    throw PreconditionViolation("certificate: formula arity mismatch");
  if (psi.bound_vars() > cert.w_reps.size())
    throw PreconditionViolation("certificate: missing witness reps");
  // generators actually independent in the structure
  std::vector<SparseVec> gens = cert.g;
  gens.insert(gens.end(), cert.h.begin(), cert.h.end());
  if (rank_of(gens) != dim) return false;
  // (2) params inside C: reps supported on the g-block and matching the
  // actual elements
  for (std::size_t i = 0; i < params.size(); ++i) {
    SparseVec acc;
    for (std::size_t j = 0; j < dim; ++j) {
      if (j >= p && cert.c_reps[i][j] != 0) return false;
      if (cert.c_reps[i][j] != 0) acc += gens[j].scaled(Rat(cert.c_reps[i][j]));
    }
    if (!(acc == pres.vec(params[i]))) return false;
    if (!in_box(cert.c_reps[i], cert.k)) return false;
  }
  // (3) box form
  for (const auto& r : cert.a_reps)
    if (!in_box(r, cert.k)) return false;
  for (const auto& r : cert.w_reps)
    if (!in_box(r, cert.k)) return false;
  // (4) slot reps linearly independent over the parameter reps
  {
    LinSolver s;
    auto to_vec = [&](const std::vector<Int>& r) {
      std::vector<SparseVec::Entry> es;
      for (std::size_t j = 0; j < dim; ++j)
        if (r[j] != 0) es.push_back({static_cast<std::int64_t>(j), Rat(r[j])});
      return SparseVec(std::move(es));
    };
    for (const auto& r : cert.c_reps) s.insert(to_vec(r));
    for (const auto& r : cert.a_reps)
      if (!s.insert(to_vec(r))) return false;
  }
  // H |= psi with the given witnesses and all intermediate terms in the box:
  // evaluate each literal over box reps (absent elements make atoms false)
  auto rep_of_var = [&](std::uint32_t var) -> const std::vector<Int>* {
    if (var < params.size()) return &cert.c_reps[var];
    std::uint32_t slot = var - static_cast<std::uint32_t>(params.size());
    if (slot < cert.a_reps.size()) return &cert.a_reps[slot];
    std::uint32_t w = slot - static_cast<std::uint32_t>(cert.a_reps.size());
    if (w < cert.w_reps.size()) return &cert.w_reps[w];
    return nullptr;
  };
  auto value_of_rep = [&](const std::vector<Int>& rep) {
    SparseVec acc;
    for (std::size_t j = 0; j < dim; ++j)
      if (rep[j] != 0) acc += gens[j].scaled(Rat(rep[j]));
    return acc;
  };
  std::function<bool(const QFFormula&)> eval = [&](const QFFormula& f) -> bool {
    switch (f.kind()) {
      case QFFormula::Kind::True:
        return true;
      case QFFormula::Kind::Not:
        return !eval(f.children().front());
      case QFFormula::Kind::And: {
        for (const auto& c : f.children())
          if (!eval(c)) return false;
        return true;
      }
      case QFFormula::Kind::Or: {
        for (const auto& c : f.children())
          if (eval(c)) return true;
        return false;
      }
      case QFFormula::Kind::Atom: {
        std::vector<std::vector<Int>> reps;
        for (const Term& t : f.args()) {
          if (t.kind == Term::Kind::Const)
            throw PreconditionViolation("certificate formulas must be constant-free");
          const auto* r = rep_of_var(t.var);
          if (!r) throw PreconditionViolation("certificate: unassigned variable");
          reps.push_back(*r);
        }
        for (const auto& r : reps)
          if (!in_box(r, cert.k)) return false;
        if (f.rel() == kRelAdd) {
          std::vector<Int> sum(dim);
          for (std::size_t j = 0; j < dim; ++j) sum[j] = reps[0][j] + reps[1][j];
          if (!in_box(sum, cert.k)) return false;  // intermediate term missing
          return sum == reps[2];
        }
        if (f.rel() == kRelZero) {
          for (const auto& x : reps[0])
            if (x != 0) return false;
          return true;
        }
        if (f.rel() == kRelLess) {
          if (!pres.is_ordered())
            throw PreconditionViolation("order atom in an unordered class");
          return pres.compare(value_of_rep(reps[0]), value_of_rep(reps[1])) < 0;
        }
        throw PreconditionViolation("certificate: unknown relation");
      }
    }
    return false;
  };
  return eval(psi.matrix);
}

DiagramSemidecision indep_diagram_semidecide(const GroupPresentation& pres,
                                             std::span<const Element> params,
                                             const ExistFormula& phi, std::uint64_t budget) {
  DiagramSemidecision out;
  std::size_t arity = phi.free_vars - params.size();
  if (phi.free_vars < params.size())
    throw PreconditionViolation("semidecide: formula has fewer frees than params");
  auto self = std::const_pointer_cast<const Presentation>(
      std::shared_ptr<Presentation>(const_cast<GroupPresentation*>(&pres), [](auto*) {}));
  std::vector<SparseVec> c_vecs;
  for (Element c : params) c_vecs.push_back(pres.vec(c));
  std::uint64_t used = 0;
  for (std::uint64_t b = 4;; b *= 2) {
    if (used >= budget) break;
    std::uint64_t bound = std::min<std::uint64_t>(b, 1 + (budget - used));
    bool params_in = true;
    for (Element c : params)
      if (c >= bound) params_in = false;
    if (params_in) {
      FiniteFragment frag(self, bound);
      // enumerate slot tuples by increasing max element
      std::vector<Element> tuple(arity, 0);
      std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
        if (used >= budget) return false;
        if (i == arity) {
          ++used;
          std::vector<Element> asg(params.begin(), params.end());
          asg.insert(asg.end(), tuple.begin(), tuple.end());
          auto wit = eval_exists_bounded_witness(frag, phi, asg, bound);
          if (!wit) return false;
          std::vector<SparseVec> a_vecs;
          for (Element e : tuple) a_vecs.push_back(pres.vec(e));
          if (!independent_over(a_vecs, c_vecs)) return false;
          // construct the certificate from the found data
          std::vector<SparseVec> w_vecs;
          for (Element e : *wit) w_vecs.push_back(pres.vec(e));
          std::vector<SparseVec> gens = c_vecs;
          gens.insert(gens.end(), a_vecs.begin(), a_vecs.end());
          gens.insert(gens.end(), w_vecs.begin(), w_vecs.end());
          PureDecomposition dec = decompose_pure(gens, c_vecs);
          PartialSubgroupCertificate cert;
          cert.g = dec.g;
          cert.h = dec.h;
          Int kmax = 1;
          auto rep_or_throw = [&](const SparseVec& v) {
            auto r = dec.rep(v);
            if (!r) throw std::logic_error("semidecide: rep failure");
            for (const auto& x : *r) kmax = std::max(kmax, abs_int(x));
            return *r;
          };
          for (const auto& v : c_vecs) cert.c_reps.push_back(rep_or_throw(v));
          for (const auto& v : a_vecs) cert.a_reps.push_back(rep_or_throw(v));
          for (const auto& v : w_vecs) cert.w_reps.push_back(rep_or_throw(v));
          // the box must also contain the intermediate sums of the literals;
          // doubling the bound is enough for one addition
          cert.k = 2 * kmax;
          if (!certificate_check(pres, cert, params, phi)) return false;
          out.yes = true;
          out.certificate = std::move(cert);
          return true;
        }
        for (Element e = 0; e < bound; ++e) {
          tuple[i] = e;
          if (rec(i + 1)) return true;
        }
        return false;
      };
      if (rec(0)) break;
    }
    if (b >= budget) break;
  }
  out.budget_used = used;
  return out;
}

SemiDecision GroupConditionG::indep_diagram_semidecide(std::span<const Element> params,
                                                       const ExistFormula& phi,
                                                       std::uint64_t budget) const {
  auto r = pregeom::indep_diagram_semidecide(*pres_, params, phi, budget);
  return SemiDecision{r.yes, r.budget_used};
}

std::optional<bool> GroupConditionG::certify_independent(std::span<const Element> tuple,
                                                         std::span<const Element> over) const {
  std::vector<SparseVec> ts, os;
  for (Element e : tuple) ts.push_back(pres_->vec(e));
  for (Element e : over) os.push_back(pres_->vec(e));
  return independent_over(ts, os);
}

std::optional<std::vector<GroupConditionG::LineMove>> GroupConditionG::plan_moves_(
    const FiniteFragment& frag, std::span<const Element> kept, std::span<const Element> slots,
    std::span<const Element> replacement_basis) const {
  // which slots are dependent over kept (plus the independent earlier slots)?
  LinSolver span;
  for (Element e : kept) span.insert(pres_->vec(e));
  std::vector<std::size_t> moved;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!span.insert(pres_->vec(slots[i]))) moved.push_back(i);
  }
  if (moved.empty()) return std::vector<LineMove>{};
  // fresh directions start beyond every support in the fragment
  std::int64_t max_dir = -1;
  for (Element e = 0; e < frag.size(); ++e) {
    SparseVec v = pres_->vec(e);
    if (!v.entries().empty()) max_dir = std::max(max_dir, v.max_index());
  }
  std::vector<LineMove> out;
  std::size_t next_replacement = 0;
  std::int64_t next_fresh = max_dir + 1;
  for (std::size_t idx : moved) {
    SparseVec v = pres_->vec(slots[idx]);
    if (v.support_size() != 1) return std::nullopt;  // not a single-line slot
    auto [dir, coeff] = v.entries().front();
    LineMove mv;
    mv.src_direction = dir;
    mv.moved_coeff = coeff;
    if (next_replacement < replacement_basis.size()) {
      // aim at a multiple of the replacement line, scaled past the
      // fragment's coefficient bound for injectivity
      SparseVec nu = pres_->vec(replacement_basis[next_replacement++]);
      if (nu.is_zero()) return std::nullopt;
      // functional f: vanishes on span(kept), f(nu) = 1; bound |f| on fragment
      // handled by verify; here pick beta from the nu-leading coefficient
      mv.target = nu;  // scaled once the coefficient bound is known
      mv.fresh = false;
    } else {
      mv.target = SparseVec::unit(next_fresh++, coeff);
      mv.fresh = true;
    }
    out.push_back(std::move(mv));
  }
  return out;
}

bool GroupConditionG::verify_moves_(const FiniteFragment& frag,
                                    const std::vector<LineMove>& moves,
                                    std::uint64_t* scanned) const {
  // visible coordinates on each moved direction must stay inside the
  // decomposable set {0, kept_coeff..., moved_coeff} so that the re-homing is
  // additive on every visible fact; here the allowed set is all coordinates
  // whose unit count of moved_coeff is 0 or 1 with no other contributions.
  std::uint64_t n = frag.size();
  if (scanned) *scanned = n;
  for (Element e = 0; e < n; ++e) {
    SparseVec v = pres_->vec(e);
    for (const auto& mv : moves) {
      Rat a = v.coeff(mv.src_direction);
      if (a == 0 || a == mv.moved_coeff) continue;
      // coordinates from the kept part of the same line are fine only if they
      // cannot combine with the moved coefficient inside the fragment; the
      // scramble schedules guarantee a two-value coordinate set, so anything
      // else blocks the move
      bool kept_value = false;
      for (const auto& c : pres_->plan().collapses) {
        if (c.direction == mv.src_direction && a == Rat(c.coeff_first)) kept_value = true;
      }
      if (!kept_value) return false;
    }
    // fresh targets must not collide with directions present in the fragment
    for (const auto& mv : moves) {
      if (!mv.fresh) continue;
      for (const auto& [dir, coeff] : mv.target.entries())
        if (v.coeff(dir) != 0) return false;
    }
  }
  return true;
}

SparseVec GroupConditionG::apply_moves_(const std::vector<LineMove>& moves,
                                        const SparseVec& v) const {
  SparseVec out = v;
  for (const auto& mv : moves) {
    Rat a = out.coeff(mv.src_direction);
    if (a == mv.moved_coeff) {
      out -= SparseVec::unit(mv.src_direction, mv.moved_coeff);
      out += mv.target;
    }
  }
  return out;
}

SemiDecision GroupConditionG::safeness_in_diagram(const FiniteFragment& frag,
                                                  const SafenessFormula& psi,
                                                  std::uint64_t budget) const {
  const auto& params = psi.partition.params;
  const auto& slots = psi.partition.frees;
  // tier 1: the slot images themselves are exactly independent over the
  // parameters, so the identity assignment witnesses membership
  std::vector<SparseVec> svecs, pvecs;
  for (Element e : slots) svecs.push_back(pres_->vec(e));
  for (Element e : params) pvecs.push_back(pres_->vec(e));
  if (independent_over(svecs, pvecs)) return SemiDecision{true, 1};
  // tier 2: re-home the hidden-dependent slots onto fresh lines and verify
  // the re-assignment against the visible fragment
  auto moves = plan_moves_(frag, params, slots, {});
  if (!moves) return SemiDecision{false, 1};
  std::uint64_t scanned = 0;
  if (frag.size() > budget) return SemiDecision{false, 1};
  if (!adjust_targets_(frag, *moves, params)) return SemiDecision{false, 1};
  if (!verify_moves_(frag, *moves, &scanned)) return SemiDecision{false, scanned};
  if (!order_preserved_(frag, *moves)) return SemiDecision{false, scanned};
  // parameters must be fixed by the move
  for (Element e : params) {
    if (!(apply_moves_(*moves, pres_->vec(e)) == pres_->vec(e)))
      return SemiDecision{false, scanned};
  }
  std::vector<SparseVec> images;
  for (Element e : slots) images.push_back(apply_moves_(*moves, pres_->vec(e)));
  if (!independent_over(images, pvecs)) return SemiDecision{false, scanned};
  return SemiDecision{true, scanned};
}

std::optional<ConditionGOracle::Rehoming> GroupConditionG::local_witness(
    const FiniteFragment& frag, const SafenessFormula& psi,
    std::span<const Element> replacement_basis, std::span<const Element> extras) const {
  const auto& params = psi.partition.params;
  const auto& slots = psi.partition.frees;
  auto moves = plan_moves_(frag, params, slots, replacement_basis);
  if (!moves) return std::nullopt;
  // scale replacement-line targets past the fragment coefficient bound
  for (auto& mv : *moves) {
    if (mv.fresh) continue;  // fresh-direction move, already sized
    // functional bound: coefficient of the target line over the fragment
    const SparseVec& nu = mv.target;
    auto [lead, leadc] = nu.entries().front();
    Rat maxf(0);
    for (Element e = 0; e < frag.size(); ++e) {
      Rat c = pres_->vec(e).coeff(lead);
      if (c < 0) c = -c;
      if (c > maxf) maxf = c;
    }
    Rat betaq = Rat(3) * maxf / (leadc < 0 ? -leadc : leadc) + 1;
    Int beta = numerator(betaq) / denominator(betaq) + 1;
    mv.target = nu.scaled(Rat(beta));
  }
  if (!adjust_targets_(frag, *moves, params)) return std::nullopt;
  std::uint64_t scanned = 0;
  if (!verify_moves_(frag, *moves, &scanned)) return std::nullopt;
  if (!order_preserved_(frag, *moves)) return std::nullopt;
  for (Element e : params)
    if (!(apply_moves_(*moves, pres_->vec(e)) == pres_->vec(e))) return std::nullopt;
  std::vector<SparseVec> pvecs;
  for (Element e : params) pvecs.push_back(pres_->vec(e));
  std::vector<SparseVec> images;
  for (Element e : slots) images.push_back(apply_moves_(*moves, pres_->vec(e)));
  if (!independent_over(images, pvecs)) return std::nullopt;
  Rehoming out;
  for (const auto& img : images) {
    auto id = pres_->id_of(img);
    if (!id) return std::nullopt;
    out.slot_images.push_back(*id);
  }
  for (Element e : extras) {
    SparseVec img = apply_moves_(*moves, pres_->vec(e));
    auto id = pres_->id_of(img);
    if (!id) return std::nullopt;
    out.extra_images.push_back(*id);
  }
  return out;
}

}  // namespace pregeom
