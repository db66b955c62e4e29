#pragma once

#include "pregeom/good_copy.hpp"
#include "pregeom/groups.hpp"

#include <functional>
#include <memory>
#include <random>

namespace pregeom {

/// Step-bounded candidate dependence algorithm. Answers are monotone in the
/// budget: undecided may resolve later; resolved answers never change. The
/// guesser sees only the committed diagram of the copy under construction.
class DependenceGuesser {
 public:
  enum class Verdict { Independent, Dependent, Undecided };
  virtual ~DependenceGuesser() = default;
  virtual std::string name() const = 0;
  virtual Verdict query(const FragmentView& committed, std::span<const Element> params,
                        Element x, std::uint64_t step_budget) = 0;
};

struct Requirement {
  std::size_t e = 0;
  std::size_t guesser = 0;  // index into the guesser list
  Element witness = 0;      // b_e
  enum class Status { Waiting, Acted, Disqualified } status = Status::Waiting;
};

/// Condition-B witness provider: b in cl(params) realizing the existential
/// type psi (free vars = |params| + 1, slot last), plus re-homed images for
/// the existential block.
class ConditionBOracle {
 public:
  virtual ~ConditionBOracle() = default;
  struct Witness {
    Element b = 0;
    std::vector<Element> witness_images;
  };
  virtual Witness dependent_witness(std::span<const Element> params, Element a,
                                    const ExistFormula& psi,
                                    std::span<const Element> witness_hint) const = 0;
};

struct ActEvent {
  std::size_t e = 0;
  Element old_witness = 0;           // b_e (copy side)
  Element new_dependent_value = 0;   // its new source-side value
  Element new_image_of_anchor = 0;   // fresh copy element imaging a_e
  std::size_t guesser = 0;
};

struct GuesserQuery {
  std::size_t guesser = 0;
  std::size_t requirement = 0;
  std::vector<Element> params;  // copy-side
  Element x = 0;                // copy-side
  DependenceGuesser::Verdict verdict = DependenceGuesser::Verdict::Undecided;
  std::uint64_t stage = 0;
};

enum class BadCopyStatus { Complete, Resumable, PropertyViolation, InvalidWitness };

struct BadCopyResult {
  BadCopyStatus status = BadCopyStatus::Complete;
  std::string message;
  FactSet committed;                       // final committed copy diagram
  std::vector<Element> final_preimages;    // copy element -> source element
  std::vector<std::vector<Element>> map_trace;  // per stage preimages
  std::vector<ActEvent> acts;
  std::vector<GuesserQuery> queries;
  std::vector<Requirement> requirements;
  std::string counterexample;  // set on InvalidWitness
};

struct BadCopyConfig {
  std::size_t anchors = 1;          // independent anchors b_0..b_{m-1}
  std::uint64_t guesser_budget = 4096;
  std::uint64_t stages = 100;
};

class BadCopy {
 public:
  BadCopy(std::shared_ptr<const GroupPresentation> pres,
          std::function<Element(std::size_t)> basis,
          std::vector<std::shared_ptr<DependenceGuesser>> guessers,
          std::shared_ptr<const ConditionBOracle> oracle, BadCopyConfig config);

  BadCopyResult run();

  /// Did the requirement's guesser declare independent a tuple the exact
  /// oracle certifies dependent in the final committed fragment?
  static bool verify_defeated(const GroupPresentation& pres, const BadCopyResult& result,
                              std::size_t e);

 private:
  std::shared_ptr<const GroupPresentation> pres_;
  std::function<Element(std::size_t)> basis_;
  std::vector<std::shared_ptr<DependenceGuesser>> guessers_;
  std::shared_ptr<const ConditionBOracle> oracle_;
  BadCopyConfig config_;
};

/// The shipped guesser suite.
std::shared_ptr<DependenceGuesser> make_eager_guesser();
std::shared_ptr<DependenceGuesser> make_threshold_guesser(std::uint64_t threshold);
std::shared_ptr<DependenceGuesser> make_exact_guesser();
std::shared_ptr<DependenceGuesser> make_random_guesser(std::uint64_t seed);
std::shared_ptr<DependenceGuesser> make_broken_guesser();
std::shared_ptr<DependenceGuesser> make_guesser(const std::string& name, std::uint64_t seed);

/// Condition-B oracles for the concrete classes.
std::shared_ptr<ConditionBOracle> make_tfag_condition_b(
    std::shared_ptr<const GroupPresentation> pres);
std::shared_ptr<ConditionBOracle> make_aoag_condition_b(
    std::shared_ptr<const class AoagPresentation> pres);

}  // namespace pregeom
