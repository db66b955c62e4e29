#pragma once

#include "pregeom/exact.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pregeom {

/// Validity automaton over token counts. Transitions do not depend on token
/// values, only on how many tokens have been read.
struct TokenAutomaton {
  int n_states = 0;
  int start = 0;
  std::vector<int> next;     // per state
  std::vector<bool> accept;  // per state

  /// Accepts exactly the even-length token sequences (vectors: gap/coord pairs).
  static TokenAutomaton pairs();
  /// Accepts odd token counts >= 3 (dependence formulas: c, then gap/coeff pairs).
  static TokenAutomaton odd_at_least_3();
};

/// Bijection between natural numbers and valid token sequences.
///
/// Each token t >= 0 is written as the Elias gamma code of t+1 (for v = t+1
/// with z = floor(log2 v): z zero bits followed by the z+1 bits of v). A code
/// word is the concatenation of its tokens; words are ordered by (bit length,
/// lexicographic) and indexed by rank among the words the automaton accepts.
/// Ranks above the 2^62 cap report as "beyond horizon" (nullopt).
class TokenCodec {
 public:
  TokenCodec(TokenAutomaton automaton, int max_bits = 124);

  std::optional<std::uint64_t> rank(const std::vector<std::uint64_t>& tokens) const;
  std::optional<std::vector<std::uint64_t>> unrank(std::uint64_t index) const;

  static std::vector<bool> encode_bits(const std::vector<std::uint64_t>& tokens);
  static std::optional<std::vector<std::uint64_t>> decode_bits(const std::vector<bool>& bits);

  /// Number of accepted words with bit length < len.
  Int cumulative_count(int len) const;
  static int gamma_len(std::uint64_t token);
  int max_bits() const { return max_bits_; }

  static constexpr std::uint64_t kRankCap = (std::uint64_t{1} << 62);

 private:
  const Int& word_count(int state, int len) const;  // A[s][len]
  Int zero_state_count(int state, int zeros, int len) const;

  TokenAutomaton aut_;
  int max_bits_;
  std::vector<std::vector<Int>> table_;  // [state][len]
  std::vector<Int> pow2_;
};

/// Deterministic bijection between naturals and the allowed nonzero
/// coordinates of a rank-1 factor (ordered by height, then denominator,
/// then |numerator|, positives first).
class CoordCodec {
 public:
  enum class Kind { Z, Q, ZHalf };
  explicit CoordCodec(Kind kind) : kind_(kind) {}

  Rat coord(std::uint64_t id) const;
  /// Exact id, or nullopt when the coordinate's height exceeds the counting
  /// cap (in which case the id is guaranteed to exceed 2^40).
  std::optional<std::uint64_t> id_of(const Rat& coord) const;
  bool allowed(const Rat& coord) const;
  Kind kind() const { return kind_; }

  static constexpr std::uint64_t kHeightCap = 4000000;

 private:
  bool allowed_den(const Int& den) const;
  void extend_to_height(std::uint64_t h) const;
  std::uint64_t height_count(std::uint64_t h) const;  // #coords of height exactly h
  Kind kind_;
  mutable std::vector<Rat> cache_;           // by id
  mutable std::uint64_t cached_height_ = 0;  // heights fully enumerated
  mutable std::vector<std::uint32_t> phi_;   // totient sieve, lazily built
};

/// Bijection between naturals and finite-support vectors with per-generator
/// allowed coordinates: token stream (gap_1, coord_1, gap_2, coord_2, ...)
/// with gaps encoding strictly increasing support indices.
class VectorCodec {
 public:
  explicit VectorCodec(CoordCodec coords)
      : coords_(std::move(coords)), codec_(TokenAutomaton::pairs()) {}

  std::optional<std::uint64_t> rank(const SparseVec& v) const;
  std::optional<SparseVec> unrank(std::uint64_t index) const;
  const CoordCodec& coords() const { return coords_; }

 private:
  CoordCodec coords_;
  TokenCodec codec_;
};

}  // namespace pregeom
