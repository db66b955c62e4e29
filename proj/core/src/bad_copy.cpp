#include "pregeom/bad_copy.hpp"

#include "pregeom/aoag.hpp"
#include "pregeom/closure.hpp"
#include "pregeom/tfag.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace pregeom {

namespace {

/// Presentation adapter over a committed fact set (closed world: absent
/// facts are false). Lets guessers run the generic formula machinery on the
/// copy as an honest computable structure.
class FactSetPresentation final : public Presentation {
 public:
  explicit FactSetPresentation(const FactSet& facts)
      : Presentation(facts.signature()), facts_(facts) {}
  bool fact(std::size_t rel, std::span<const Element> args) const override {
    if (rel >= facts_.relation_limit()) return false;
    for (Element a : args)
      if (a >= facts_.size()) return false;
    return facts_.fact(rel, args);
  }

 private:
  const FactSet& facts_;
};

class EagerGuesser final : public DependenceGuesser {
 public:
  std::string name() const override { return "eager"; }
  Verdict query(const FragmentView&, std::span<const Element>, Element,
                std::uint64_t) override {
    return Verdict::Independent;
  }
};

// visible dependence in the committed diagram: some dependence chain of the
// source signature evaluates inside the fragment
bool visible_dependence(const FragmentView& committed, std::span<const Element> params,
                        Element x, std::uint64_t code_budget) {
  FactSet materialized(committed.signature(), committed.size(), [&] {
    std::vector<Fact> fs;
    // relations: add (pairs scan), zero, less are all enumerable by tuples
    for (std::size_t r = 0; r < committed.relation_limit(); ++r) {
      std::size_t arity = committed.signature().relation(r).arity;
      std::vector<Element> tup(arity, 0);
      std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (pos == arity) {
          if (committed.fact(r, tup)) fs.push_back(Fact{r, tup});
          return;
        }
        for (Element v = 0; v < committed.size(); ++v) {
          tup[pos] = v;
          rec(pos + 1);
        }
      };
      if (committed.size() > 0) rec(0);
    }
    return fs;
  }());
  auto pres = std::make_shared<FactSetPresentation>(materialized);
  // scan the shared dependence-formula codes with the generic evaluator; the
  // formula builder needs no presentation (acceleration is never used here)
  TokenCodec codec(TokenAutomaton::odd_at_least_3());
  std::uint64_t t = committed.size();
  std::vector<Element> asg;
  asg.push_back(x);
  asg.insert(asg.end(), params.begin(), params.end());
  FiniteFragment frag(pres, t);
  // zero formula
  if (t >= 2 && x < t) {
    std::vector<Element> a{x};
    if (materialized.fact(kRelZero, a)) return true;
  }
  for (std::uint64_t k = 1; k <= std::min(code_budget, t); ++k) {
    auto tokens = codec.unrank(k - 1);
    if (!tokens) continue;
    // decode into a pattern; positions beyond |params| invalid
    Int c = Int((*tokens)[0]) + 1;
    std::vector<std::pair<std::size_t, Int>> terms;
    std::size_t pos = 0;
    bool ok = true;
    for (std::size_t i = 1; i + 1 < tokens->size(); i += 2) {
      pos += (*tokens)[i] + 1;
      std::uint64_t mc = (*tokens)[i + 1];
      Int m = (mc % 2 == 0) ? Int(mc / 2 + 1) : -Int((mc + 1) / 2);
      if (pos > params.size()) ok = false;
      terms.push_back({pos, m});
    }
    if (!ok || terms.empty()) continue;
    GroupDependenceFamily::Pattern p;
    p.x_coeff = c;
    p.terms = std::move(terms);
    static const GroupDependenceFamily formula_builder{
        std::shared_ptr<const GroupPresentation>{}};
    ExistFormula f = formula_builder.chain_formula(p, params.size());
    bool out_of_range = false;
    for (Element e : asg)
      if (e >= t) out_of_range = true;
    if (out_of_range) continue;
    if (eval_exists_bounded(frag, f, asg, t)) return true;
  }
  return false;
}

class ThresholdGuesser final : public DependenceGuesser {
 public:
  explicit ThresholdGuesser(std::uint64_t threshold) : threshold_(threshold) {}
  std::string name() const override { return "threshold"; }
  Verdict query(const FragmentView& committed, std::span<const Element> params, Element x,
                std::uint64_t budget) override {
    auto key = std::make_pair(std::vector<Element>(params.begin(), params.end()), x);
    auto it = resolved_.find(key);
    if (it != resolved_.end()) return it->second;
    if (committed.size() < threshold_) return Verdict::Undecided;
    Verdict v = visible_dependence(committed, params, x, std::min(budget, threshold_))
                    ? Verdict::Dependent
                    : Verdict::Independent;
    resolved_[key] = v;
    return v;
  }

 private:
  std::uint64_t threshold_;
  std::map<std::pair<std::vector<Element>, Element>, Verdict> resolved_;
};

class ExactGuesser final : public DependenceGuesser {
 public:
  std::string name() const override { return "exact"; }
  Verdict query(const FragmentView& committed, std::span<const Element> params, Element x,
                std::uint64_t budget) override {
    // sound semidecision: dependence is affirmed once visible; independence
    // is never declared
    if (visible_dependence(committed, params, x, budget)) return Verdict::Dependent;
    return Verdict::Undecided;
  }
};

class RandomGuesser final : public DependenceGuesser {
 public:
  explicit RandomGuesser(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {}
  std::string name() const override { return "random"; }
  Verdict query(const FragmentView&, std::span<const Element> params, Element x,
                std::uint64_t) override {
    auto key = std::make_pair(std::vector<Element>(params.begin(), params.end()), x);
    auto it = resolved_.find(key);
    if (it != resolved_.end()) return it->second;
    state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
    std::uint64_t roll = (state_ >> 33) % 3;
    Verdict v = roll == 0   ? Verdict::Independent
                : roll == 1 ? Verdict::Dependent
                            : Verdict::Undecided;
    if (v != Verdict::Undecided) resolved_[key] = v;
    return v;
  }

 private:
  std::uint64_t state_;
  std::map<std::pair<std::vector<Element>, Element>, Verdict> resolved_;
};

class BrokenGuesser final : public DependenceGuesser {
 public:
  std::string name() const override { return "broken"; }
  Verdict query(const FragmentView&, std::span<const Element>, Element,
                std::uint64_t) override {
    throw std::runtime_error("broken guesser plugin misbehaved");
  }
};

class TfagConditionB final : public ConditionBOracle {
 public:
  explicit TfagConditionB(std::shared_ptr<const GroupPresentation> pres)
      : pres_(std::move(pres)) {}
  Witness dependent_witness(std::span<const Element> params, Element a,
                            const ExistFormula& psi,
                            std::span<const Element> witness_hint) const override {
    std::vector<SparseVec> hint;
    for (Element e : witness_hint) hint.push_back(pres_->vec(e));
    WitnessSubstitution sub =
        tfag_dependent_witness(*pres_, params, a, psi, witness_hint.empty() ? nullptr : &hint);
    Witness out;
    auto id = pres_->id_of(sub.b);
    if (!id) throw BudgetExhausted("dependent_witness image beyond the id horizon");
    out.b = *id;
    for (const auto& w : sub.witness_images) {
      auto wid = pres_->id_of(w);
      if (!wid) throw BudgetExhausted("witness image beyond the id horizon");
      out.witness_images.push_back(*wid);
    }
    return out;
  }

 private:
  std::shared_ptr<const GroupPresentation> pres_;
};

class AoagConditionB final : public ConditionBOracle {
 public:
  explicit AoagConditionB(std::shared_ptr<const AoagPresentation> pres)
      : pres_(std::move(pres)) {}
  Witness dependent_witness(std::span<const Element> params, Element a,
                            const ExistFormula& psi,
                            std::span<const Element> witness_hint) const override {
    std::vector<SparseVec> hint;
    for (Element e : witness_hint) hint.push_back(pres_->vec(e));
    WitnessSubstitution sub =
        aoag_dependent_witness(*pres_, params, a, psi, witness_hint.empty() ? nullptr : &hint);
    Witness out;
    auto id = pres_->id_of(sub.b);
    if (!id) throw BudgetExhausted("dependent_witness image beyond the id horizon");
    out.b = *id;
    for (const auto& w : sub.witness_images) {
      auto wid = pres_->id_of(w);
      if (!wid) throw BudgetExhausted("witness image beyond the id horizon");
      out.witness_images.push_back(*wid);
    }
    return out;
  }

 private:
  std::shared_ptr<const AoagPresentation> pres_;
};

}  // namespace

std::shared_ptr<DependenceGuesser> make_eager_guesser() { return std::make_shared<EagerGuesser>(); }
std::shared_ptr<DependenceGuesser> make_threshold_guesser(std::uint64_t threshold) {
  return std::make_shared<ThresholdGuesser>(threshold);
}
std::shared_ptr<DependenceGuesser> make_exact_guesser() { return std::make_shared<ExactGuesser>(); }
std::shared_ptr<DependenceGuesser> make_random_guesser(std::uint64_t seed) {
  return std::make_shared<RandomGuesser>(seed);
}
std::shared_ptr<DependenceGuesser> make_broken_guesser() {
  return std::make_shared<BrokenGuesser>();
}
std::shared_ptr<DependenceGuesser> make_guesser(const std::string& name, std::uint64_t seed) {
  if (name == "eager") return make_eager_guesser();
  if (name == "threshold") return make_threshold_guesser(24);
  if (name == "exact") return make_exact_guesser();
  if (name == "random") return make_random_guesser(seed);
  if (name == "broken") return make_broken_guesser();
  throw PreconditionViolation("unknown guesser plugin: " + name);
}

std::shared_ptr<ConditionBOracle> make_tfag_condition_b(
    std::shared_ptr<const GroupPresentation> pres) {
  return std::make_shared<TfagConditionB>(std::move(pres));
}
std::shared_ptr<ConditionBOracle> make_aoag_condition_b(
    std::shared_ptr<const AoagPresentation> pres) {
  return std::make_shared<AoagConditionB>(std::move(pres));
}

BadCopy::BadCopy(std::shared_ptr<const GroupPresentation> pres,
                 std::function<Element(std::size_t)> basis,
                 std::vector<std::shared_ptr<DependenceGuesser>> guessers,
                 std::shared_ptr<const ConditionBOracle> oracle, BadCopyConfig config)
    : pres_(std::move(pres)),
      basis_(std::move(basis)),
      guessers_(std::move(guessers)),
      oracle_(std::move(oracle)),
      config_(config) {}

namespace {

struct CopyState {
  // copy element -> source element (the evolving map, inverted)
  std::vector<Element> preimage;
  std::map<Element, Element> image;  // source -> copy
  std::vector<Fact> committed;       // positive facts over copy ids

  Element create(Element source) {
    Element b = preimage.size();
    preimage.push_back(source);
    image[source] = b;
    return b;
  }

  void rehome(Element copy_elem, Element new_source) {
    image.erase(preimage[copy_elem]);
    preimage[copy_elem] = new_source;
    image[new_source] = copy_elem;
  }
};

// recompute the positive diagram of the current preimages
std::vector<Fact> diagram_of(const GroupPresentation& pres, const std::vector<Element>& pre) {
  std::vector<Fact> facts;
  std::size_t n = pre.size();
  std::unordered_map<std::size_t, std::vector<std::size_t>> by_hash;
  std::vector<SparseVec> vecs(n);
  for (std::size_t i = 0; i < n; ++i) {
    vecs[i] = pres.vec(pre[i]);
    by_hash[vecs[i].hash()].push_back(i);
  }
  bool ordered = pres.is_ordered();
  for (std::size_t i = 0; i < n; ++i) {
    if (vecs[i].is_zero()) facts.push_back(Fact{kRelZero, {i}});
    for (std::size_t j = 0; j < n; ++j) {
      SparseVec sum = vecs[i] + vecs[j];
      auto it = by_hash.find(sum.hash());
      if (it != by_hash.end()) {
        for (std::size_t k : it->second)
          if (vecs[k] == sum) facts.push_back(Fact{kRelAdd, {i, j, k}});
      }
      if (ordered && i != j && pres.compare(vecs[i], vecs[j]) < 0)
        facts.push_back(Fact{kRelLess, {i, j}});
    }
    if (ordered) {
      // also the diagonal handled above (i == j gives no less-fact)
    }
  }
  std::sort(facts.begin(), facts.end());
  facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
  return facts;
}

}  // namespace

BadCopyResult BadCopy::run() {
  BadCopyResult res;
  CopyState st;
  std::size_t m = config_.anchors;
  try {
    // anchors and witnesses: b_i = image of basis a_i for i < m + #guessers
    std::size_t prefix = m + guessers_.size();
    std::vector<Element> basis_prefix;
    for (std::size_t i = 0; i < prefix; ++i) basis_prefix.push_back(basis_(i));
    {
      std::vector<SparseVec> vs;
      for (Element e : basis_prefix) vs.push_back(pres_->vec(e));
      if (!independent_over(vs, {}))
        throw PreconditionViolation("bad_copy: supplied enumeration prefix is not a basis");
    }
    for (std::size_t i = 0; i < prefix; ++i) st.create(basis_prefix[i]);
    for (std::size_t j = 0; j < guessers_.size(); ++j) {
      Requirement r;
      r.e = m + j;
      r.guesser = j;
      r.witness = static_cast<Element>(m + j);
      res.requirements.push_back(r);
    }
    st.committed = diagram_of(*pres_, st.preimage);

    for (std::uint64_t stage = 0; stage < config_.stages; ++stage) {
      // copy one more source element
      Element next_source = 0;
      while (st.image.count(next_source)) ++next_source;
      st.create(next_source);
      st.committed = diagram_of(*pres_, st.preimage);
      // query the requirements in priority order
      for (auto& req : res.requirements) {
        if (req.status != Requirement::Status::Waiting) continue;
        std::vector<Element> cs;
        for (std::size_t i = 0; i < req.e; ++i) cs.push_back(static_cast<Element>(i));
        FactSet committed_view(pres_->signature(), st.preimage.size(), st.committed);
        DependenceGuesser::Verdict v;
        try {
          v = guessers_[req.guesser]->query(committed_view, cs, req.witness,
                                            config_.guesser_budget);
        } catch (const std::exception&) {
          req.status = Requirement::Status::Disqualified;
          continue;
        }
        res.queries.push_back(GuesserQuery{req.guesser, req.e, cs, req.witness, v, stage});
        if (v != DependenceGuesser::Verdict::Independent) continue;
        // act: make the witness dependent on the earlier special elements
        std::vector<Element> params_src;
        for (Element c : cs) params_src.push_back(st.preimage[c]);
        Element a_src = st.preimage[req.witness];
        // psi: committed atoms mentioning the witness, existentially
        // quantifying every other mentioned non-parameter element; refined
        // with extra literals if the substitution breaks unrelated atoms
        std::set<Element> mentioned;  // copy ids other than params/witness
        for (const Fact& f : st.committed) {
          bool touches = false;
          for (Element arg : f.args)
            if (arg == req.witness) touches = true;
          if (!touches) continue;
          for (Element arg : f.args) {
            if (arg == req.witness) continue;
            if (std::find(cs.begin(), cs.end(), arg) == cs.end()) mentioned.insert(arg);
          }
        }
        std::vector<Element> aux(mentioned.begin(), mentioned.end());
        std::map<Element, std::uint32_t> var_of;  // copy id -> psi variable
        for (std::size_t i = 0; i < cs.size(); ++i) var_of[cs[i]] = i;
        var_of[req.witness] = static_cast<std::uint32_t>(cs.size());
        for (std::size_t i = 0; i < aux.size(); ++i)
          var_of[aux[i]] = static_cast<std::uint32_t>(cs.size() + 1 + i);
        std::vector<QFFormula> literals;
        auto add_literal = [&](std::size_t rel, const std::vector<Element>& args, bool neg) {
          std::vector<Term> ts;
          for (Element arg : args) ts.push_back(Term::variable(var_of.at(arg)));
          QFFormula atom = QFFormula::atom(rel, std::move(ts));
          literals.push_back(neg ? QFFormula::negate(std::move(atom)) : std::move(atom));
        };
        FactSet committed_set(pres_->signature(), st.preimage.size(), st.committed);
        auto in_scope = [&](Element arg) {
          return var_of.count(arg) > 0;
        };
        // both signs of every atom within scope that mentions the witness
        std::function<void(std::size_t, std::vector<Element>&)> tuples =
            [&](std::size_t rel, std::vector<Element>& tup) {
              std::size_t arity = pres_->signature().relation(rel).arity;
              if (tup.size() == arity) {
                bool touches = false;
                for (Element arg : tup)
                  if (arg == req.witness) touches = true;
                if (!touches) return;
                add_literal(rel, tup, !committed_set.fact(rel, tup));
                return;
              }
              for (const auto& [arg, var] : var_of) {
                tup.push_back(arg);
                tuples(rel, tup);
                tup.pop_back();
              }
            };
        for (std::size_t rel = 0; rel < pres_->signature().size(); ++rel) {
          std::vector<Element> tup;
          tuples(rel, tup);
        }
        ExistFormula psi;
        psi.free_vars = static_cast<std::uint32_t>(cs.size() + 1);
        psi.matrix = QFFormula::conj(literals);
        std::vector<Element> hint;
        for (Element arg : aux) hint.push_back(st.preimage[arg]);
        ConditionBOracle::Witness w;
        try {
          w = oracle_->dependent_witness(params_src, a_src, psi, hint);
        } catch (const std::exception& ex) {
          res.status = BadCopyStatus::InvalidWitness;
          res.counterexample = std::string("oracle failure: ") + ex.what();
          res.message = res.counterexample;
          break;
        }
        // validate the witness before committing anything
        {
          std::vector<SparseVec> ps;
          for (Element e : params_src) ps.push_back(pres_->vec(e));
          LinSolver span;
          for (auto& v2 : ps) span.insert(v2);
          bool ok = span.in_span(pres_->vec(w.b));
          if (ok) {
            std::vector<SparseVec> vals = ps;
            vals.push_back(pres_->vec(w.b));
            for (Element e : w.witness_images) vals.push_back(pres_->vec(e));
            // psi variable order: params, slot, aux
            std::vector<SparseVec> ordered(vals.begin(), vals.begin() + ps.size() + 1);
            for (std::size_t i = 0; i < w.witness_images.size(); ++i)
              ordered.push_back(vals[ps.size() + 1 + i]);
            ok = all_literals_hold(*pres_, matrix_literals(psi.matrix), ordered);
          }
          if (!ok) {
            std::ostringstream os;
            os << "dependent witness " << w.b << " fails its contract for requirement "
               << req.e;
            res.status = BadCopyStatus::InvalidWitness;
            res.counterexample = os.str();
            res.message = res.counterexample;
            break;
          }
        }
        // apply: re-home the witness and the mentioned auxiliaries, give the
        // anchor a fresh image, and verify the whole committed diagram
        std::vector<Element> saved_pre = st.preimage;
        st.rehome(req.witness, w.b);
        for (std::size_t i = 0; i < aux.size() && i < w.witness_images.size(); ++i) {
          if (st.preimage[aux[i]] != w.witness_images[i]) st.rehome(aux[i], w.witness_images[i]);
        }
        Element fresh_b = st.create(a_src);
        auto new_diagram = diagram_of(*pres_, st.preimage);
        // the previously committed atoms must all persist
        bool preserved = std::includes(new_diagram.begin(), new_diagram.end(),
                                       st.committed.begin(), st.committed.end());
        if (preserved) {
          // and previously false atoms must stay false on the old horizon
          std::size_t old_n = saved_pre.size();
          for (const Fact& f : new_diagram) {
            bool old_scope = true;
            for (Element arg : f.args)
              if (arg >= old_n) old_scope = false;
            if (old_scope && !std::binary_search(st.committed.begin(), st.committed.end(), f)) {
              preserved = false;
              break;
            }
          }
        }
        if (!preserved) {
          std::ostringstream os;
          os << "act on requirement " << req.e << " cannot preserve the committed diagram";
          res.status = BadCopyStatus::InvalidWitness;
          res.counterexample = os.str();
          res.message = res.counterexample;
          break;
        }
        st.committed = std::move(new_diagram);
        req.status = Requirement::Status::Acted;
        res.acts.push_back(ActEvent{req.e, req.witness, w.b, fresh_b, req.guesser});
      }
      if (res.status != BadCopyStatus::Complete) break;
      res.map_trace.push_back(st.preimage);
    }
  } catch (const BudgetExhausted& e) {
    res.status = BadCopyStatus::Resumable;
    res.message = e.what();
  } catch (const std::logic_error& e) {
    res.status = BadCopyStatus::PropertyViolation;
    res.message = e.what();
  }
  res.final_preimages = st.preimage;
  res.committed = FactSet(pres_->signature(), st.preimage.size(), st.committed);
  return res;
}

bool BadCopy::verify_defeated(const GroupPresentation& pres, const BadCopyResult& result,
                              std::size_t e) {
  const Requirement* req = nullptr;
  for (const auto& r : result.requirements)
    if (r.e == e) req = &r;
  if (!req || req->status != Requirement::Status::Acted) return false;
  for (const auto& q : result.queries) {
    if (q.requirement != e || q.verdict != DependenceGuesser::Verdict::Independent) continue;
    // exact dependence of the tuple in the final committed fragment
    std::vector<SparseVec> over;
    for (Element c : q.params) over.push_back(pres.vec(result.final_preimages.at(c)));
    SparseVec xv = pres.vec(result.final_preimages.at(q.x));
    LinSolver span;
    for (auto& v : over) span.insert(v);
    if (span.in_span(xv)) return true;
  }
  return false;
}

}  // namespace pregeom
