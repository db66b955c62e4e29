#pragma once

#include "pregeom/aoag.hpp"
#include "pregeom/bad_copy.hpp"
#include "pregeom/good_copy.hpp"
#include "pregeom/oracle.hpp"
#include "pregeom/tfag.hpp"

#include <string>

namespace pregeom {

/// One run of a construction: fully serializable; a config plus the code
/// version determines the trace bit-exactly. The seed is used only for
/// test-instance generation, never inside the constructions.
struct RunConfig {
  std::string class_kind = "tfag";  // "tfag" | "aoag"
  TfagGroupSpec tfag_spec = TfagGroupSpec::full_divisibility();
  AoagGroupSpec aoag_spec;
  std::string construction = "good-copy";
  std::uint64_t stages = 5;
  std::uint64_t p5_budget = 1u << 22;
  std::uint64_t witness_budget = 4096;
  ScramblePlan scramble;
  std::vector<std::string> guessers;
  std::uint64_t seed = 0;
  std::string out_trace;
  std::string out_diagram;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

/// Everything a construction needs, assembled from a config.
struct Workbench {
  std::shared_ptr<const GroupPresentation> pres;
  std::shared_ptr<const AoagPresentation> aoag;  // set when ordered
  std::shared_ptr<ClosureApprox> closure;
  std::shared_ptr<const ConditionGOracle> g_oracle;
  std::shared_ptr<const ConditionBOracle> b_oracle;
  std::shared_ptr<OracleContext> brute;
  std::size_t anchors = 1;
};
Workbench build_workbench(const RunConfig& config);

std::string good_copy_trace_jsonl(const RunConfig& config, const GoodCopyResult& result);
std::string bad_copy_trace_jsonl(const RunConfig& config, const BadCopyResult& result);

struct VerifyReport {
  bool ok = true;
  std::string failed_property;  // named property on failure
  std::vector<std::string> lines;
};
VerifyReport verify_trace(const RunConfig& config, const std::string& jsonl);

}  // namespace pregeom
