#include "pregeom/codec.hpp"

#include <algorithm>
#include <stdexcept>

namespace pregeom {

TokenAutomaton TokenAutomaton::pairs() {
  TokenAutomaton a;
  a.n_states = 2;
  a.start = 0;
  a.next = {1, 0};
  a.accept = {true, false};
  return a;
}

TokenAutomaton TokenAutomaton::odd_at_least_3() {
  // states: 0,1,2 tokens read; 3 = odd >= 3; 4 = even >= 4
  TokenAutomaton a;
  a.n_states = 5;
  a.start = 0;
  a.next = {1, 2, 3, 4, 3};
  a.accept = {false, false, false, true, false};
  return a;
}

int TokenCodec::gamma_len(std::uint64_t token) {
  std::uint64_t v = token + 1;
  int z = 0;
  while (z < 63 && (std::uint64_t{1} << (z + 1)) <= v) ++z;
  return 2 * z + 1;
}

Int TokenCodec::cumulative_count(int len) const {
  Int total = 0;
  for (int l = 0; l < std::min(len, max_bits_ + 1); ++l) total += table_[aut_.start][l];
  return total;
}

namespace {

void append_gamma(std::vector<bool>& bits, std::uint64_t token) {
  std::uint64_t v = token + 1;
  int z = 0;
  while ((std::uint64_t{1} << (z + 1)) <= v) ++z;
  for (int i = 0; i < z; ++i) bits.push_back(false);
  for (int i = z; i >= 0; --i) bits.push_back((v >> i) & 1);
}

}  // namespace

TokenCodec::TokenCodec(TokenAutomaton automaton, int max_bits)
    : aut_(std::move(automaton)), max_bits_(max_bits) {
  pow2_.resize(max_bits_ + 1);
  pow2_[0] = 1;
  for (int i = 1; i <= max_bits_; ++i) pow2_[i] = pow2_[i - 1] * 2;
  table_.assign(aut_.n_states, std::vector<Int>(max_bits_ + 1, Int(0)));
  for (int s = 0; s < aut_.n_states; ++s) table_[s][0] = aut_.accept[s] ? 1 : 0;
  for (int len = 1; len <= max_bits_; ++len) {
    for (int s = 0; s < aut_.n_states; ++s) {
      Int total = 0;
      for (int z = 0; 2 * z + 1 <= len; ++z) {
        total += pow2_[z] * table_[aut_.next[s]][len - 2 * z - 1];
      }
      table_[s][len] = std::move(total);
    }
  }
}

const Int& TokenCodec::word_count(int state, int len) const { return table_[state][len]; }

std::vector<bool> TokenCodec::encode_bits(const std::vector<std::uint64_t>& tokens) {
  std::vector<bool> bits;
  for (auto t : tokens) append_gamma(bits, t);
  return bits;
}

std::optional<std::vector<std::uint64_t>> TokenCodec::decode_bits(const std::vector<bool>& bits) {
  std::vector<std::uint64_t> tokens;
  std::size_t i = 0;
  while (i < bits.size()) {
    int z = 0;
    while (i < bits.size() && !bits[i]) {
      ++z;
      ++i;
    }
    if (i >= bits.size()) return std::nullopt;  // ran out inside zeros
    // bits[i] == 1 starts the payload of z+1 bits total
    if (i + z >= bits.size()) return std::nullopt;
    std::uint64_t v = 1;
    ++i;
    for (int k = 0; k < z; ++k) {
      v = (v << 1) | (bits[i] ? 1 : 0);
      ++i;
    }
    tokens.push_back(v - 1);
  }
  return tokens;
}

Int TokenCodec::zero_state_count(int state, int zeros, int len) const {
  // completions given we are inside a token (started at `state`) having read
  // `zeros` zero bits, with `len` bits remaining.
  Int total = 0;
  int z = zeros;
  int remaining = len;
  // choosing k more zeros then a 1 then z+k payload bits
  for (int k = 0;; ++k) {
    int cost = k + 1 + (z + k);
    if (cost > remaining) break;
    total += pow2_[z + k] * word_count(aut_.next[state], remaining - cost);
  }
  return total;
}

std::optional<std::uint64_t> TokenCodec::rank(const std::vector<std::uint64_t>& tokens) const {
  std::vector<bool> bits = encode_bits(tokens);
  int L = static_cast<int>(bits.size());
  if (L > max_bits_) return std::nullopt;
  Int r = 0;
  for (int l = 0; l < L; ++l) r += word_count(aut_.start, l);
  // lexicographic rank within length L
  int state = aut_.start;
  int phase = 0;  // 0 = zeros, 1 = payload
  int zeros = 0, payload_left = 0;
  for (int i = 0; i < L; ++i) {
    int rem = L - i - 1;
    bool bit = bits[i];
    if (phase == 0) {
      if (bit) {
        // smaller option: 0 (continue zeros)
        // completions: inside token with zeros+1 zeros read, rem bits left
        r += zero_state_count(state, zeros + 1, rem);
        payload_left = zeros;
        if (payload_left == 0) {
          state = aut_.next[state];
          phase = 0;
          zeros = 0;
        } else {
          phase = 1;
        }
      } else {
        ++zeros;  // bit 0: nothing smaller
      }
    } else {
      if (bit) {
        // smaller option: 0 at this payload position, rest free
        if (rem >= payload_left - 1)
          r += pow2_[payload_left - 1] * word_count(aut_.next[state], rem - (payload_left - 1));
      }
      --payload_left;
      if (payload_left == 0) {
        state = aut_.next[state];
        phase = 0;
        zeros = 0;
      }
    }
  }
  if (r >= Int(kRankCap)) return std::nullopt;
  return static_cast<std::uint64_t>(r);
}

std::optional<std::vector<std::uint64_t>> TokenCodec::unrank(std::uint64_t index) const {
  Int rem = index;
  int L = -1;
  for (int l = 0; l <= max_bits_; ++l) {
    if (rem < word_count(aut_.start, l)) {
      L = l;
      break;
    }
    rem -= word_count(aut_.start, l);
  }
  if (L < 0) return std::nullopt;
  std::vector<bool> bits;
  int state = aut_.start;
  int phase = 0, zeros = 0, payload_left = 0;
  for (int i = 0; i < L; ++i) {
    int rem_bits = L - i - 1;
    if (phase == 0) {
      // option 0: continue zeros
      Int c0 = zero_state_count(state, zeros + 1, rem_bits);
      if (rem < c0) {
        bits.push_back(false);
        ++zeros;
      } else {
        rem -= c0;
        bits.push_back(true);
        payload_left = zeros;
        if (payload_left == 0) {
          state = aut_.next[state];
          zeros = 0;
        } else {
          phase = 1;
        }
      }
    } else {
      Int c0 = 0;
      if (rem_bits >= payload_left - 1)
        c0 = pow2_[payload_left - 1] * word_count(aut_.next[state], rem_bits - (payload_left - 1));
      if (rem < c0) {
        bits.push_back(false);
      } else {
        rem -= c0;
        bits.push_back(true);
      }
      --payload_left;
      if (payload_left == 0) {
        state = aut_.next[state];
        phase = 0;
        zeros = 0;
      }
    }
  }
  if (rem != 0) throw std::logic_error("TokenCodec::unrank: inconsistent remainder");
  return decode_bits(bits);
}

bool CoordCodec::allowed_den(const Int& den) const {
  switch (kind_) {
    case Kind::Z:
      return den == 1;
    case Kind::Q:
      return true;
    case Kind::ZHalf: {
      Int d = den;
      while (d % 2 == 0) d /= 2;
      return d == 1;
    }
  }
  return false;
}

bool CoordCodec::allowed(const Rat& coord) const {
  return coord != 0 && allowed_den(denominator(coord));
}

void CoordCodec::extend_to_height(std::uint64_t h) const {
  for (std::uint64_t hh = cached_height_ + 1; hh <= h; ++hh) {
    // all reduced p/q with max(|p|, q) == hh, allowed denominator
    for (Int q = 1; q <= Int(hh); ++q) {
      if (!allowed_den(q)) continue;
      for (Int ap = (q == Int(hh)) ? Int(1) : Int(hh); ap <= Int(hh); ++ap) {
        if (gcd(ap, q) != 1) continue;
        if (ap != Int(hh) && q != Int(hh)) continue;  // height must be exactly hh
        cache_.push_back(Rat(ap, q));
        cache_.push_back(Rat(-ap, q));
      }
    }
    cached_height_ = hh;
  }
}

Rat CoordCodec::coord(std::uint64_t id) const {
  while (cache_.size() <= id) {
    if (cached_height_ >= kHeightCap)
      throw std::length_error("CoordCodec::coord beyond height cap");
    extend_to_height(cached_height_ + 1);
  }
  return cache_[id];
}

std::uint64_t CoordCodec::height_count(std::uint64_t h) const {
  // number of allowed reduced coords p/q with max(|p|, q) == h (both signs)
  if (h == 0) return 0;
  switch (kind_) {
    case Kind::Z:
      return 2;  // ±h
    case Kind::Q: {
      if (h == 1) return 2;
      // q < h with |p| = h (gcd(h,q)=1): phi(h) choices; q == h: phi(h) numerators
      return 4 * phi_[h];
    }
    case Kind::ZHalf: {
      std::uint64_t c = 0;
      for (std::uint64_t q = 1; q < h; q *= 2) {
        Int g = gcd(Int(h), Int(q));
        if (g == 1) c += 2;  // p = ±h over q
        if (q > (std::uint64_t{1} << 62) / 2) break;
      }
      // q == h: h must be a power of two; numerators odd (coprime) in [1..h]
      std::uint64_t hh = h;
      while (hh % 2 == 0) hh /= 2;
      if (hh == 1) c += 2 * (h == 1 ? 1 : h / 2);  // odd p in [1..h]
      return c;
    }
  }
  return 0;
}

std::optional<std::uint64_t> CoordCodec::id_of(const Rat& c) const {
  if (!allowed(c)) return std::nullopt;
  Int num_i = abs_int(numerator(c));
  Int den_i = denominator(c);
  Int h_i = std::max(num_i, den_i);
  if (h_i > Int(kHeightCap)) return std::nullopt;  // id certainly exceeds 2^40
  std::uint64_t h = static_cast<std::uint64_t>(h_i);
  std::uint64_t num = static_cast<std::uint64_t>(num_i);
  std::uint64_t den = static_cast<std::uint64_t>(den_i);
  bool positive = c > 0;
  if (kind_ == Kind::Q && phi_.size() <= h) {
    std::size_t n = std::max<std::size_t>(h + 1, 1024);
    phi_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) phi_[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 2; i <= n; ++i) {
      if (phi_[i] == i) {  // prime
        for (std::size_t j = i; j <= n; j += i) phi_[j] -= phi_[j] / i;
      }
    }
  }
  std::uint64_t id = 0;
  for (std::uint64_t j = 1; j < h; ++j) id += height_count(j);
  // within height h: q ascending; q < h carries |p| = h; q == h carries |p| ascending
  for (std::uint64_t q = 1; q < den; ++q) {
    if (!allowed_den(Int(q))) continue;
    if (q < h) {
      if (gcd(Int(h), Int(q)) == 1) id += 2;
    }
  }
  if (den < h) {
    // entry is (±h)/den
    id += positive ? 0 : 1;
    return id;
  }
  // den == h: skip the q<h block entirely (handled above), now numerators < num
  for (std::uint64_t p = 1; p < num; ++p)
    if (gcd(Int(p), Int(h)) == 1) id += 2;
  id += positive ? 0 : 1;
  return id;
}

std::optional<std::uint64_t> VectorCodec::rank(const SparseVec& v) const {
  std::vector<std::uint64_t> tokens;
  std::int64_t prev = -1;
  for (const auto& [idx, coeff] : v.entries()) {
    auto cid = coords_.id_of(coeff);
    if (!cid) return std::nullopt;
    tokens.push_back(static_cast<std::uint64_t>(idx - prev - 1));
    tokens.push_back(*cid);
    prev = idx;
  }
  return codec_.rank(tokens);
}

std::optional<SparseVec> VectorCodec::unrank(std::uint64_t index) const {
  auto tokens = codec_.unrank(index);
  if (!tokens) return std::nullopt;
  std::vector<SparseVec::Entry> entries;
  std::int64_t idx = -1;
  for (std::size_t i = 0; i + 1 < tokens->size(); i += 2) {
    idx += static_cast<std::int64_t>((*tokens)[i]) + 1;
    entries.push_back({idx, coords_.coord((*tokens)[i + 1])});
  }
  return SparseVec(std::move(entries));
}

}  // namespace pregeom
