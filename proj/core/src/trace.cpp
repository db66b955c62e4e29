#include "pregeom/trace.hpp"

#include <json.hpp>

#include <sstream>

namespace pregeom {

using Json = nlohmann::ordered_json;

namespace {

std::string kind_name(CoordCodec::Kind k) {
  switch (k) {
    case CoordCodec::Kind::Z:
      return "z";
    case CoordCodec::Kind::Q:
      return "q";
    case CoordCodec::Kind::ZHalf:
      return "z_half";
  }
  return "?";
}

CoordCodec::Kind kind_of(const std::string& s) {
  if (s == "z") return CoordCodec::Kind::Z;
  if (s == "q") return CoordCodec::Kind::Q;
  if (s == "z_half") return CoordCodec::Kind::ZHalf;
  throw PreconditionViolation("unknown divisibility kind: " + s);
}

Json scramble_json(const ScramblePlan& plan) {
  Json arr = Json::array();
  for (const auto& c : plan.collapses) {
    Json j;
    j["direction"] = c.direction;
    j["coeff_first"] = c.coeff_first.str();
    j["coeff_second"] = c.coeff_second.str();
    j["id_first"] = c.id_first;
    j["id_second"] = c.id_second;
    j["reveal"] = c.reveal;
    arr.push_back(std::move(j));
  }
  return arr;
}

ScramblePlan scramble_of(const Json& arr) {
  ScramblePlan plan;
  for (const auto& j : arr) {
    Collapse c;
    c.direction = j.at("direction").get<std::int64_t>();
    c.coeff_first = Int(j.at("coeff_first").get<std::string>());
    c.coeff_second = Int(j.at("coeff_second").get<std::string>());
    c.id_first = j.at("id_first").get<std::uint64_t>();
    c.id_second = j.at("id_second").get<std::uint64_t>();
    c.reveal = j.at("reveal").get<std::uint64_t>();
    plan.collapses.push_back(std::move(c));
  }
  return plan;
}

}  // namespace

std::string RunConfig::to_json() const {
  Json j;
  j["schema"] = 1;
  Json cls;
  cls["kind"] = class_kind;
  if (class_kind == "tfag") {
    cls["rest"] = kind_name(tfag_spec.rest);
    Json gens = Json::array();
    for (auto k : tfag_spec.generators) gens.push_back(kind_name(k));
    cls["generators"] = std::move(gens);
  } else {
    Json primes = Json::array();
    for (auto p : aoag_spec.prime_prefix) primes.push_back(p);
    cls["primes"] = std::move(primes);
  }
  j["class"] = std::move(cls);
  j["construction"] = construction;
  j["stages"] = stages;
  j["budgets"] = Json{{"p5", p5_budget}, {"witness_search", witness_budget}};
  j["scramble"] = scramble_json(scramble);
  Json gs = Json::array();
  for (const auto& g : guessers) gs.push_back(g);
  j["guessers"] = std::move(gs);
  j["seed"] = seed;
  j["out"] = Json{{"trace", out_trace}, {"diagram", out_diagram}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  Json j = Json::parse(text);
  if (j.value("schema", 0) != 1) throw PreconditionViolation("config: schema must be 1");
  RunConfig c;
  const Json& cls = j.at("class");
  c.class_kind = cls.at("kind").get<std::string>();
  if (c.class_kind == "tfag") {
    c.tfag_spec.rest = kind_of(cls.value("rest", std::string("q")));
    c.tfag_spec.generators.clear();
    if (cls.contains("generators"))
      for (const auto& g : cls.at("generators"))
        c.tfag_spec.generators.push_back(kind_of(g.get<std::string>()));
  } else if (c.class_kind == "aoag") {
    if (cls.contains("primes"))
      for (const auto& p : cls.at("primes"))
        c.aoag_spec.prime_prefix.push_back(p.get<std::uint64_t>());
  } else {
    throw PreconditionViolation("config: unknown class kind " + c.class_kind);
  }
  c.construction = j.value("construction", std::string("good-copy"));
  c.stages = j.value("stages", std::uint64_t{5});
  if (j.contains("budgets")) {
    c.p5_budget = j.at("budgets").value("p5", c.p5_budget);
    c.witness_budget = j.at("budgets").value("witness_search", c.witness_budget);
  }
  if (j.contains("scramble")) c.scramble = scramble_of(j.at("scramble"));
  if (j.contains("guessers"))
    for (const auto& g : j.at("guessers")) c.guessers.push_back(g.get<std::string>());
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("out")) {
    c.out_trace = j.at("out").value("trace", std::string());
    c.out_diagram = j.at("out").value("diagram", std::string());
  }
  return c;
}

Workbench build_workbench(const RunConfig& config) {
  Workbench w;
  if (config.class_kind == "tfag") {
    auto pres = std::make_shared<TfagPresentation>(config.tfag_spec, config.scramble);
    w.pres = pres;
    w.g_oracle = std::make_shared<GroupConditionG>(pres);
    w.b_oracle = make_tfag_condition_b(pres);
    w.anchors = 1;
  } else {
    auto pres = std::make_shared<AoagPresentation>(config.aoag_spec, config.scramble);
    w.pres = pres;
    w.aoag = pres;
    w.g_oracle = std::make_shared<AoagConditionG>(pres);
    w.b_oracle = make_aoag_condition_b(pres);
    w.anchors = 2;
  }
  auto family = std::make_shared<GroupDependenceFamily>(w.pres);
  w.closure = std::make_shared<ClosureApprox>(w.pres, family);
  w.brute = std::make_shared<OracleContext>(w.pres);
  return w;
}

namespace {

Json stage_event(const StageEvent& ev) {
  Json j;
  j["event"] = "stage";
  j["s"] = ev.state.stage;
  Json tau = Json::array();
  for (Element e : ev.state.tau.images()) tau.push_back(e);
  j["tau"] = std::move(tau);
  Json des = Json::array();
  for (std::size_t a : ev.state.designated) des.push_back(a);
  j["designated"] = std::move(des);
  j["t"] = ev.state.t;
  return j;
}

}  // namespace

std::string good_copy_trace_jsonl(const RunConfig& config, const GoodCopyResult& result) {
  std::ostringstream os;
  Json header;
  header["event"] = "header";
  header["schema"] = 1;
  header["construction"] = "good-copy";
  header["class"] = config.class_kind;
  header["stages"] = config.stages;
  os << header.dump() << "\n";
  for (const auto& ev : result.trace) {
    os << stage_event(ev).dump() << "\n";
    if (!ev.moved.empty()) {
      Json inj;
      inj["event"] = "injury";
      Json moved = Json::array();
      for (std::size_t b : ev.moved) moved.push_back(b);
      inj["moved"] = std::move(moved);
      os << inj.dump() << "\n";
    }
    for (const auto& [i, used] : ev.p5_budgets) {
      Json p5;
      p5["event"] = "p5_confirmed";
      p5["i"] = i;
      p5["budget_used"] = used;
      os << p5.dump() << "\n";
    }
    Json cert;
    cert["event"] = "certified";
    cert["s"] = ev.state.stage;
    cert["prefix"] = ev.certified_prefix;
    Json gov = Json::array();
    for (std::size_t b : ev.governed) gov.push_back(b);
    cert["governed"] = std::move(gov);
    os << cert.dump() << "\n";
  }
  Json done;
  done["event"] = "result";
  done["status"] = result.status == RunStatus::Complete      ? "complete"
                   : result.status == RunStatus::Resumable   ? "resumable"
                                                             : "property-violation";
  if (!result.message.empty()) done["message"] = result.message;
  os << done.dump() << "\n";
  return os.str();
}

std::string bad_copy_trace_jsonl(const RunConfig& config, const BadCopyResult& result) {
  std::ostringstream os;
  Json header;
  header["event"] = "header";
  header["schema"] = 1;
  header["construction"] = "bad-copy";
  header["class"] = config.class_kind;
  header["stages"] = config.stages;
  os << header.dump() << "\n";
  std::size_t next_act = 0;
  for (std::size_t s = 0; s < result.map_trace.size(); ++s) {
    Json stage;
    stage["event"] = "map";
    stage["s"] = s;
    Json pre = Json::array();
    for (Element e : result.map_trace[s]) pre.push_back(e);
    stage["preimages"] = std::move(pre);
    os << stage.dump() << "\n";
    (void)next_act;
  }
  for (const auto& q : result.queries) {
    Json query;
    query["event"] = "query";
    query["guesser"] = q.guesser;
    query["e"] = q.requirement;
    query["x"] = q.x;
    query["verdict"] = q.verdict == DependenceGuesser::Verdict::Independent ? "independent"
                       : q.verdict == DependenceGuesser::Verdict::Dependent ? "dependent"
                                                                            : "undecided";
    query["s"] = q.stage;
    os << query.dump() << "\n";
  }
  for (const auto& a : result.acts) {
    Json act;
    act["event"] = "act";
    act["e"] = a.e;
    act["old_witness"] = a.old_witness;
    act["new_dependent_value"] = a.new_dependent_value;
    act["new_image_of_a_e"] = a.new_image_of_anchor;
    os << act.dump() << "\n";
  }
  Json done;
  done["event"] = "result";
  done["status"] = result.status == BadCopyStatus::Complete    ? "complete"
                   : result.status == BadCopyStatus::Resumable ? "resumable"
                   : result.status == BadCopyStatus::InvalidWitness ? "invalid-witness"
                                                                    : "property-violation";
  if (!result.message.empty()) done["message"] = result.message;
  os << done.dump() << "\n";
  return os.str();
}

namespace {

VerifyReport verify_good_copy(const RunConfig& config, const std::vector<Json>& events) {
  VerifyReport rep;
  Workbench w = build_workbench(config);
  GoodCopy gc(w.pres, w.closure, w.g_oracle, GoodCopyBudgets{config.p5_budget, 0});
  std::optional<StageState> prev;
  for (const auto& j : events) {
    if (j.value("event", "") != "stage") continue;
    StageState st;
    st.stage = j.at("s").get<std::uint64_t>();
    std::vector<Element> images;
    for (const auto& e : j.at("tau")) images.push_back(e.get<Element>());
    st.tau = PartialMap(std::move(images));
    for (const auto& a : j.at("designated")) st.designated.push_back(a.get<std::size_t>());
    st.t = j.at("t").get<std::uint64_t>();
    PropertyReport pr =
        gc.check_properties(prev ? &*prev : nullptr, st, config.p5_budget, nullptr);
    std::ostringstream line;
    line << "stage " << st.stage << ": ";
    if (pr.ok()) {
      line << "P1-P6 ok";
    } else {
      rep.ok = false;
      if (!pr.violated.empty()) {
        rep.failed_property = to_string(pr.violated.front());
        line << "violates " << rep.failed_property;
      } else {
        rep.failed_property = "P5";
        line << "P5 unconfirmed";
      }
    }
    rep.lines.push_back(line.str());
    if (!rep.ok) return rep;
    prev = std::move(st);
  }
  return rep;
}

VerifyReport verify_bad_copy(const RunConfig& config, const std::vector<Json>& events) {
  VerifyReport rep;
  Workbench w = build_workbench(config);
  // requirements act at most once
  std::map<std::uint64_t, int> acts;
  std::vector<std::vector<Element>> maps;
  for (const auto& j : events) {
    std::string ev = j.value("event", "");
    if (ev == "act") {
      if (++acts[j.at("e").get<std::uint64_t>()] > 1) {
        rep.ok = false;
        rep.failed_property = "finite-injury";
        rep.lines.push_back("requirement acted twice");
        return rep;
      }
    } else if (ev == "map") {
      std::vector<Element> pre;
      for (const auto& e : j.at("preimages")) pre.push_back(e.get<Element>());
      maps.push_back(std::move(pre));
    }
  }
  // the map changes each element finitely often and settles
  if (!maps.empty()) {
    const auto& fin = maps.back();
    std::size_t changes_total = 0;
    for (std::size_t b = 0; b < fin.size(); ++b) {
      Element last = UINT64_MAX;
      std::size_t changes = 0;
      for (const auto& mp : maps) {
        if (b < mp.size() && mp[b] != last) {
          last = mp[b];
          ++changes;
        }
      }
      changes_total += changes;
      if (changes > 1 + acts.size()) {
        rep.ok = false;
        rep.failed_property = "finite-injury";
        rep.lines.push_back("an element moved more often than the acts allow");
        return rep;
      }
    }
    std::ostringstream line;
    line << "map settles; " << changes_total - fin.size() << " moves beyond first definitions";
    rep.lines.push_back(line.str());
    // final pullback is a partial isomorphism onto the source fragment
    std::uint64_t horizon = 0;
    for (Element e : fin) horizon = std::max(horizon, e + 1);
    FiniteFragment src(w.pres, horizon);
    std::vector<Fact> facts;
    // rebuild the committed diagram from the final preimages
    {
      std::vector<SparseVec> vecs(fin.size());
      for (std::size_t i = 0; i < fin.size(); ++i) vecs[i] = w.pres->vec(fin[i]);
      for (std::size_t i = 0; i < fin.size(); ++i) {
        if (vecs[i].is_zero()) facts.push_back(Fact{kRelZero, {i}});
        for (std::size_t jj = 0; jj < fin.size(); ++jj) {
          SparseVec sum = vecs[i] + vecs[jj];
          for (std::size_t k = 0; k < fin.size(); ++k)
            if (vecs[k] == sum) facts.push_back(Fact{kRelAdd, {i, jj, k}});
          if (w.pres->is_ordered() && i != jj && w.pres->compare(vecs[i], vecs[jj]) < 0)
            facts.push_back(Fact{kRelLess, {i, jj}});
        }
      }
    }
    FactSet copy(w.pres->signature(), fin.size(), std::move(facts));
    std::vector<std::pair<Element, Element>> map_pairs;
    for (std::size_t b = 0; b < fin.size(); ++b) map_pairs.push_back({b, fin[b]});
    if (!is_partial_isomorphism(copy, src, map_pairs)) {
      rep.ok = false;
      rep.failed_property = "pullback";
      rep.lines.push_back("final diagram is not a partial pullback of the source");
      return rep;
    }
    rep.lines.push_back("final pullback is a partial isomorphism");
  }
  return rep;
}

}  // namespace

VerifyReport verify_trace(const RunConfig& config, const std::string& jsonl) {
  VerifyReport rep;
  std::vector<Json> events;
  std::istringstream is(jsonl);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    events.push_back(Json::parse(line));
  }
  if (events.empty()) {
    rep.lines.push_back("empty trace: vacuously valid");
    return rep;
  }
  std::string construction = config.construction;
  for (const auto& j : events)
    if (j.value("event", "") == "header")
      construction = j.value("construction", construction);
  if (construction == "good-copy") return verify_good_copy(config, events);
  return verify_bad_copy(config, events);
}

}  // namespace pregeom
