// Command-line driver: run the constructions, verify traces, export
// diagrams, and compare the engine against the brute-force oracle.

#include <CLI11.hpp>

#include "pregeom/closure.hpp"
#include "pregeom/trace.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace pregeom;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

struct CommonFlags {
  std::string config_path;
  std::string class_kind;
  std::string out_trace;
  std::string out_diagram;
  std::int64_t stages = -1;
  std::int64_t p5_budget = -1;
  std::int64_t witness_budget = -1;
  std::vector<std::string> guessers;
  std::int64_t seed = -1;

  RunConfig resolve(const std::string& construction) const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_json(read_file(config_path));
    cfg.construction = construction;
    // flags override the file
    if (!class_kind.empty()) cfg.class_kind = class_kind;
    if (stages >= 0) cfg.stages = static_cast<std::uint64_t>(stages);
    if (p5_budget >= 0) cfg.p5_budget = static_cast<std::uint64_t>(p5_budget);
    if (witness_budget >= 0) cfg.witness_budget = static_cast<std::uint64_t>(witness_budget);
    if (!guessers.empty()) cfg.guessers = guessers;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_trace.empty()) cfg.out_trace = out_trace;
    if (!out_diagram.empty()) cfg.out_diagram = out_diagram;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--class", f.class_kind, "structure class (tfag | aoag)");
  cmd->add_option("--stages", f.stages, "construction stages");
  cmd->add_option("--p5-budget", f.p5_budget, "safeness semidecision budget");
  cmd->add_option("--witness-budget", f.witness_budget, "witness search budget");
  cmd->add_option("--guessers", f.guessers, "guesser plugins (bad-copy)");
  cmd->add_option("--seed", f.seed, "seed for test-instance generation");
  cmd->add_option("--out-trace", f.out_trace, "trace output path (JSONL)");
  cmd->add_option("--out-diagram", f.out_diagram, "diagram output path (CSV)");
}

int run_good_copy(const RunConfig& cfg) {
  Workbench w = build_workbench(cfg);
  GoodCopy gc(w.pres, w.closure, w.g_oracle,
              GoodCopyBudgets{cfg.p5_budget, cfg.witness_budget});
  GoodCopyResult res = gc.run(cfg.stages);
  if (!cfg.out_trace.empty()) write_file(cfg.out_trace, good_copy_trace_jsonl(cfg, res));
  if (!cfg.out_diagram.empty()) write_file(cfg.out_diagram, fragment_to_csv(res.committed));
  switch (res.status) {
    case RunStatus::Complete:
      std::cout << "complete: " << res.trace.size() << " stages committed\n";
      return 0;
    case RunStatus::Resumable:
      std::cout << "resumable: " << res.message << "\n";
      return 2;
    case RunStatus::PropertyViolation:
      std::cout << "property violation: " << res.message << "\n";
      // dump the final state the run reached
      std::cout << good_copy_trace_jsonl(cfg, res);
      return 3;
  }
  return 3;
}

// test-only decorator exercising the invalid-witness path (exit 4)
class BrokenOracle final : public ConditionBOracle {
 public:
  explicit BrokenOracle(std::shared_ptr<const GroupPresentation> pres)
      : pres_(std::move(pres)) {}
  Witness dependent_witness(std::span<const Element> params, Element a, const ExistFormula&,
                            std::span<const Element>) const override {
    (void)params;
    Witness w;
    w.b = a;  // not in cl(params): deliberately invalid
    return w;
  }

 private:
  std::shared_ptr<const GroupPresentation> pres_;
};

int run_bad_copy(const RunConfig& cfg, bool broken_oracle) {
  Workbench w = build_workbench(cfg);
  std::vector<std::shared_ptr<DependenceGuesser>> guessers;
  for (std::size_t i = 0; i < cfg.guessers.size(); ++i)
    guessers.push_back(make_guesser(cfg.guessers[i], cfg.seed + i));
  auto oracle = broken_oracle
                    ? std::static_pointer_cast<const ConditionBOracle>(
                          std::make_shared<BrokenOracle>(w.pres))
                    : w.b_oracle;
  OracleContext brute(w.pres);
  // basis: the omega-least basis stream per the exact oracle
  auto basis = [&brute](std::size_t i) -> Element {
    std::vector<Element> acc;
    Element e = 0;
    for (;; ++e) {
      if (!brute.brute_cl(e, acc)) {
        acc.push_back(e);
        if (acc.size() > i) return e;
      }
      if (e > 1u << 20) throw BudgetExhausted("basis stream exhausted");
    }
  };
  BadCopyConfig bc;
  bc.anchors = w.anchors;
  bc.guesser_budget = cfg.witness_budget;
  bc.stages = cfg.stages;
  BadCopy bad(w.pres, basis, guessers, oracle, bc);
  BadCopyResult res = bad.run();
  if (!cfg.out_trace.empty()) write_file(cfg.out_trace, bad_copy_trace_jsonl(cfg, res));
  if (!cfg.out_diagram.empty()) write_file(cfg.out_diagram, fragment_to_csv(res.committed));
  switch (res.status) {
    case BadCopyStatus::Complete:
      std::cout << "complete: " << res.acts.size() << " acts over " << cfg.stages
                << " stages\n";
      return 0;
    case BadCopyStatus::Resumable:
      std::cout << "resumable: " << res.message << "\n";
      return 2;
    case BadCopyStatus::PropertyViolation:
      std::cout << "property violation: " << res.message << "\n";
      return 3;
    case BadCopyStatus::InvalidWitness:
      std::cout << "invalid oracle witness: " << res.counterexample << "\n";
      return 4;
  }
  return 3;
}

int run_verify(const RunConfig& cfg, const std::string& trace_path) {
  VerifyReport rep = verify_trace(cfg, read_file(trace_path));
  for (const auto& line : rep.lines) std::cout << line << "\n";
  if (!rep.ok) {
    std::cout << "verification failed: " << rep.failed_property << "\n";
    return 1;
  }
  std::cout << "verification passed\n";
  return 0;
}

int run_oracle_compare(const RunConfig& cfg, std::uint64_t fragment, std::uint64_t tuple_max) {
  Workbench w = build_workbench(cfg);
  OracleContext& brute = *w.brute;
  std::uint64_t agree = 0, unresolved = 0, disagree = 0;
  // closure grid: every (x, Y) with elements below the fragment bound
  std::vector<Element> pool;
  for (Element e = 0; e < fragment; ++e) pool.push_back(e);
  std::vector<std::vector<Element>> ysets;
  ysets.push_back({});
  for (std::size_t size = 1; size <= tuple_max; ++size) {
    std::vector<Element> pick(size, 0);
    std::function<void(std::size_t, Element)> rec = [&](std::size_t i, Element from) {
      if (i == size) {
        ysets.push_back(pick);
        return;
      }
      for (Element e = from; e < fragment; ++e) {
        pick[i] = e;
        rec(i + 1, e + 1);
      }
    };
    rec(0, 0);
  }
  for (Element x = 0; x < fragment; ++x) {
    for (const auto& ys : ysets) {
      bool truth = brute.brute_cl(x, ys);
      MinFire mf = w.closure->min_fire(x, ys, 4096);
      switch (mf.kind) {
        case MinFire::Kind::At:
          truth ? ++agree : ++disagree;
          break;
        case MinFire::Kind::Never:
          truth ? ++disagree : ++agree;
          break;
        case MinFire::Kind::BeyondCap:
          ++unresolved;
          break;
      }
    }
  }
  std::cout << "closure grid: agree=" << agree << " unresolved=" << unresolved
            << " disagree=" << disagree << "\n";
  return disagree == 0 ? 0 : 1;
}

int run_diagram(const RunConfig& cfg, std::uint64_t size, const std::string& out) {
  Workbench w = build_workbench(cfg);
  FiniteFragment frag(w.pres, size);
  std::string csv = fragment_to_csv(frag);
  if (out.empty())
    std::cout << csv;
  else
    write_file(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"workbench for computable presentations with enumerated pregeometries"};
  app.require_subcommand(1);

  CommonFlags gc_flags, bc_flags, ver_flags, oc_flags, dg_flags;
  bool broken_oracle = false;
  std::string trace_path;
  std::uint64_t oc_fragment = 12, oc_tuple = 3;
  std::uint64_t dg_size = 10;
  std::string dg_out;

  auto* gc = app.add_subcommand("good-copy", "build a copy with a computable basis");
  add_common(gc, gc_flags);
  auto* bc = app.add_subcommand("bad-copy", "build a copy defeating the supplied guessers");
  add_common(bc, bc_flags);
  bc->add_flag("--broken-oracle", broken_oracle,
               "test hook: replace the witness oracle with a broken one");
  auto* ver = app.add_subcommand("verify", "re-check a recorded trace offline");
  add_common(ver, ver_flags);
  ver->add_option("--trace", trace_path, "trace file (JSONL)")->required();
  auto* oc = app.add_subcommand("oracle-compare", "engine vs brute-force agreement grids");
  add_common(oc, oc_flags);
  oc->add_option("--fragment", oc_fragment, "fragment bound for the grids");
  oc->add_option("--tuple", oc_tuple, "maximum parameter-set size");
  auto* dg = app.add_subcommand("diagram", "export a fragment of the presentation as CSV");
  add_common(dg, dg_flags);
  dg->add_option("--size", dg_size, "fragment size");
  dg->add_option("--out", dg_out, "output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gc->parsed()) return run_good_copy(gc_flags.resolve("good-copy"));
    if (bc->parsed()) return run_bad_copy(bc_flags.resolve("bad-copy"), broken_oracle);
    if (ver->parsed()) return run_verify(ver_flags.resolve("verify"), trace_path);
    if (oc->parsed())
      return run_oracle_compare(oc_flags.resolve("oracle-compare"), oc_fragment, oc_tuple);
    if (dg->parsed()) return run_diagram(dg_flags.resolve("diagram"), dg_size, dg_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
