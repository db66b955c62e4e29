#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pregeom {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

/// Finite-support vector over Q, indexed by generator number.
/// Entries are kept sorted by index and never zero (canonical form).
class SparseVec {
 public:
  using Entry = std::pair<std::int64_t, Rat>;

  SparseVec() = default;
  explicit SparseVec(std::vector<Entry> entries);
  static SparseVec unit(std::int64_t index, Rat coeff = Rat(1));

  bool is_zero() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  std::int64_t max_index() const;
  Rat coeff(std::int64_t index) const;

  SparseVec& operator+=(const SparseVec& o);
  SparseVec& operator-=(const SparseVec& o);
  friend SparseVec operator+(SparseVec a, const SparseVec& b) { return a += b; }
  friend SparseVec operator-(SparseVec a, const SparseVec& b) { return a -= b; }
  SparseVec scaled(const Rat& q) const;
  SparseVec operator-() const { return scaled(Rat(-1)); }

  bool operator==(const SparseVec& o) const { return entries_ == o.entries_; }
  bool operator!=(const SparseVec& o) const { return !(*this == o); }
  // Deterministic total order (by support then coefficients); used for tie-breaks.
  bool operator<(const SparseVec& o) const;

  std::string to_string() const;
  std::size_t hash() const;

 private:
  std::vector<Entry> entries_;
};

struct SparseVecHash {
  std::size_t operator()(const SparseVec& v) const { return v.hash(); }
};

/// Incremental echelon form over Q with expression tracking.
/// insert() returns true when the vector enlarged the span; reduce() returns
/// the residual of a vector modulo the current span together with the
/// combination of inserted vectors realizing the reduced part.
class LinSolver {
 public:
  bool insert(const SparseVec& v);
  std::size_t rank() const { return rows_.size(); }
  bool in_span(const SparseVec& v) const;
  // Coefficients over the *inserted* vectors expressing v, if v lies in the span.
  std::optional<std::vector<Rat>> solve(const SparseVec& v) const;
  std::size_t inserted_count() const { return n_inserted_; }

 private:
  struct Row {
    SparseVec vec;              // echelonized
    std::vector<Rat> combo;     // over inserted vectors
    std::int64_t pivot = 0;
  };
  // Reduces v against rows; returns residual and combination used.
  std::pair<SparseVec, std::vector<Rat>> reduce_(const SparseVec& v) const;
  std::vector<Row> rows_;
  std::size_t n_inserted_ = 0;
};

std::size_t rank_of(const std::vector<SparseVec>& vecs);
/// rank({over} ∪ {vecs}) == rank(over) + vecs.size() ?
bool independent_over(const std::vector<SparseVec>& vecs,
                      const std::vector<SparseVec>& over);

/// Dense integer matrix, row major; small sizes only.
class IntMat {
 public:
  IntMat() = default;
  IntMat(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols) {}
  std::size_t rows() const { return r_; }
  std::size_t cols() const { return c_; }
  Int& at(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
  const Int& at(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
  static IntMat identity(std::size_t n);
  IntMat mul(const IntMat& o) const;

 private:
  std::size_t r_ = 0, c_ = 0;
  std::vector<Int> a_;
};

/// Smith normal form: returns (U, D, V) with U*A*V = D, U and V unimodular,
/// D diagonal with d_i | d_{i+1}.
struct SmithResult {
  IntMat U, D, V;
  std::size_t rank = 0;
};
SmithResult smith_normal_form(const IntMat& A);

/// Lattice utilities over the row space of integer matrices.
/// Basis of the saturation of the row lattice of A inside Z^cols:
/// { x in Z^cols : k*x in rowspace_Z(A) for some k != 0 }.
std::vector<std::vector<Int>> saturation_basis(const IntMat& A);
/// Completes a saturated (pure) sublattice basis C to a basis of Z^n,
/// returning the complement part W (so C ∪ W is a basis of Z^n).
std::vector<std::vector<Int>> complement_basis(const std::vector<std::vector<Int>>& C,
                                               std::size_t n);

inline Int abs_int(const Int& x) { return x < 0 ? Int(-x) : x; }

}  // namespace pregeom
