#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pregeom {

using Element = std::uint64_t;

struct PreconditionViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Relational signature with a fixed, immutable relation order.
/// Function symbols are represented by the graphs of the functions.
class Signature {
 public:
  struct Relation {
    std::string name;
    std::size_t arity;
  };

  Signature() = default;
  explicit Signature(std::vector<Relation> relations);

  std::size_t size() const { return relations_.size(); }
  const Relation& relation(std::size_t i) const { return relations_.at(i); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  bool operator==(const Signature& o) const;

 private:
  std::vector<Relation> relations_;
};

/// A countable structure presented by a total atomic-fact oracle on natural
/// number labels. Implementations must be deterministic and safe for
/// concurrent read queries.
class Presentation {
 public:
  virtual ~Presentation() = default;
  const Signature& signature() const { return sig_; }
  virtual bool fact(std::size_t rel, std::span<const Element> args) const = 0;

 protected:
  explicit Presentation(Signature sig) : sig_(std::move(sig)) {}
  Signature sig_;
};

/// Read access to the atomic facts of a finite piece of a structure:
/// elements 0..size-1 over the first relation_limit relation symbols.
class FragmentView {
 public:
  virtual ~FragmentView() = default;
  virtual const Signature& signature() const = 0;
  virtual std::uint64_t size() const = 0;
  virtual std::size_t relation_limit() const = 0;
  virtual bool fact(std::size_t rel, std::span<const Element> args) const = 0;

  bool in_bounds(std::size_t rel, std::span<const Element> args) const;
  /// Bounds-checked fact query; throws PreconditionViolation out of range.
  bool fact_checked(std::size_t rel, std::span<const Element> args) const;
};

struct Fact {
  std::size_t rel;
  std::vector<Element> args;
  auto operator<=>(const Fact&) const = default;
};

/// Materialized finite fragment: explicit positive-fact set.
class FactSet : public FragmentView {
 public:
  FactSet() = default;
  FactSet(Signature sig, std::uint64_t size, std::vector<Fact> facts);

  const Signature& signature() const override { return sig_; }
  std::uint64_t size() const override { return size_; }
  std::size_t relation_limit() const override;
  bool fact(std::size_t rel, std::span<const Element> args) const override;
  const std::vector<Fact>& facts() const { return facts_; }
  bool operator==(const FactSet& o) const;

 private:
  Signature sig_;
  std::uint64_t size_ = 0;
  std::vector<Fact> facts_;  // sorted
};

/// The first t elements of a presentation with all atomic facts among them,
/// over the first t relation symbols. Fact queries are lazy; use materialize()
/// for explicit enumeration at small sizes.
class FiniteFragment : public FragmentView {
 public:
  FiniteFragment() = default;
  FiniteFragment(std::shared_ptr<const Presentation> p, std::uint64_t t)
      : pres_(std::move(p)), t_(t) {}

  const Signature& signature() const override { return pres_->signature(); }
  std::uint64_t size() const override { return t_; }
  std::size_t relation_limit() const override {
    return std::min<std::uint64_t>(t_, pres_->signature().size());
  }
  bool fact(std::size_t rel, std::span<const Element> args) const override;

  const Presentation& presentation() const { return *pres_; }
  std::shared_ptr<const Presentation> presentation_ptr() const { return pres_; }

  /// Explicit positive-fact enumeration. Cost is sum over relations of
  /// size^arity; refuses beyond tuple_cap.
  FactSet materialize(std::uint64_t tuple_cap = 100000000ull) const;

 private:
  std::shared_ptr<const Presentation> pres_;
  std::uint64_t t_ = 0;
};

inline FiniteFragment fragment(std::shared_ptr<const Presentation> p, std::uint64_t t) {
  return FiniteFragment(std::move(p), t);
}

/// Injective finite map from an initial segment of naturals (the domain) into
/// elements of another structure.
class PartialMap {
 public:
  PartialMap() = default;
  explicit PartialMap(std::vector<Element> images);

  std::size_t domain_size() const { return images_.size(); }
  Element image(std::size_t i) const { return images_.at(i); }
  const std::vector<Element>& images() const { return images_; }
  std::optional<std::size_t> preimage(Element e) const;
  bool injective() const;
  void push_back(Element e);
  bool operator==(const PartialMap&) const = default;

 private:
  std::vector<Element> images_;
};

/// Pullback of a fragment through an injective map: fact (R, x̄) holds in the
/// result iff (R, τ(x̄)) holds in the source fragment.
FactSet pullback(const FragmentView& source, const PartialMap& tau);

/// Do atomic facts correspond both ways on the mapped part?
/// map is given as (a -> b) pairs: a in A, b in B.
bool is_partial_isomorphism(const FragmentView& a, const FragmentView& b,
                            const std::vector<std::pair<Element, Element>>& map);

/// CSV export: one row per positive fact, "relname,e1,...,ek", relations in
/// signature order, tuples lexicographic.
std::string fragment_to_csv(const FragmentView& f, std::uint64_t tuple_cap = 100000000ull);

}  // namespace pregeom
