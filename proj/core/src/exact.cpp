#include "pregeom/exact.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace pregeom {

SparseVec::SparseVec(std::vector<Entry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  std::vector<Entry> out;
  for (auto& e : entries_) {
    if (!out.empty() && out.back().first == e.first) {
      out.back().second += e.second;
    } else {
      out.push_back(e);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const Entry& e) { return e.second == 0; }),
            out.end());
  entries_ = std::move(out);
}

SparseVec SparseVec::unit(std::int64_t index, Rat coeff) {
  SparseVec v;
  if (coeff != 0) v.entries_.push_back({index, std::move(coeff)});
  return v;
}

std::int64_t SparseVec::max_index() const {
  return entries_.empty() ? -1 : entries_.back().first;
}

Rat SparseVec::coeff(std::int64_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const Entry& e, std::int64_t i) { return e.first < i; });
  if (it != entries_.end() && it->first == index) return it->second;
  return Rat(0);
}

SparseVec& SparseVec::operator+=(const SparseVec& o) {
  std::vector<Entry> out;
  out.reserve(entries_.size() + o.entries_.size());
  auto a = entries_.cbegin();
  auto b = o.entries_.cbegin();
  while (a != entries_.end() || b != o.entries_.end()) {
    if (b == o.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      out.push_back(*a++);
    } else if (a == entries_.end() || b->first < a->first) {
      out.push_back(*b++);
    } else {
      Rat s = a->second + b->second;
      if (s != 0) out.push_back({a->first, std::move(s)});
      ++a;
      ++b;
    }
  }
  entries_ = std::move(out);
  return *this;
}

SparseVec& SparseVec::operator-=(const SparseVec& o) { return *this += o.scaled(Rat(-1)); }

SparseVec SparseVec::scaled(const Rat& q) const {
  SparseVec v;
  if (q == 0) return v;
  v.entries_.reserve(entries_.size());
  for (auto& e : entries_) v.entries_.push_back({e.first, e.second * q});
  return v;
}

bool SparseVec::operator<(const SparseVec& o) const {
  auto a = entries_.cbegin();
  auto b = o.entries_.cbegin();
  for (; a != entries_.end() && b != o.entries_.end(); ++a, ++b) {
    if (a->first != b->first) return a->first < b->first;
    if (a->second != b->second) return a->second < b->second;
  }
  return entries_.size() < o.entries_.size();
}

std::string SparseVec::to_string() const {
  if (entries_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& e : entries_) {
    if (!first) os << "+";
    first = false;
    os << e.second << "*e" << e.first;
  }
  return os.str();
}

std::size_t SparseVec::hash() const {
  std::size_t h = 1469598103934665603ull;
  auto mix = [&h](std::size_t x) {
    h ^= x;
    h *= 1099511628211ull;
  };
  for (auto& e : entries_) {
    mix(static_cast<std::size_t>(e.first));
    mix(std::hash<std::string>{}(e.second.str()));
  }
  return h;
}

std::pair<SparseVec, std::vector<Rat>> LinSolver::reduce_(const SparseVec& v) const {
  SparseVec r = v;
  std::vector<Rat> combo(n_inserted_, Rat(0));
  for (const auto& row : rows_) {
    Rat c = r.coeff(row.pivot);
    if (c == 0) continue;
    Rat f = c / row.vec.coeff(row.pivot);
    r -= row.vec.scaled(f);
    for (std::size_t i = 0; i < row.combo.size(); ++i) combo[i] += f * row.combo[i];
  }
  combo.resize(n_inserted_, Rat(0));
  return {std::move(r), std::move(combo)};
}

bool LinSolver::insert(const SparseVec& v) {
  auto [r, combo] = reduce_(v);
  ++n_inserted_;
  if (r.is_zero()) return false;
  Row row;
  row.pivot = r.entries().front().first;
  row.vec = std::move(r);
  combo.resize(n_inserted_, Rat(0));
  for (auto& c : combo) c = -c;
  combo[n_inserted_ - 1] = Rat(1);
  row.combo = std::move(combo);
  rows_.push_back(std::move(row));
  return true;
}

bool LinSolver::in_span(const SparseVec& v) const { return reduce_(v).first.is_zero(); }

std::optional<std::vector<Rat>> LinSolver::solve(const SparseVec& v) const {
  auto [r, combo] = reduce_(v);
  if (!r.is_zero()) return std::nullopt;
  return combo;
}

std::size_t rank_of(const std::vector<SparseVec>& vecs) {
  LinSolver s;
  for (auto& v : vecs) s.insert(v);
  return s.rank();
}

bool independent_over(const std::vector<SparseVec>& vecs,
                      const std::vector<SparseVec>& over) {
  LinSolver s;
  for (auto& v : over) s.insert(v);
  for (auto& v : vecs) {
    if (!s.insert(v)) return false;
  }
  return true;
}

IntMat IntMat::identity(std::size_t n) {
  IntMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

IntMat IntMat::mul(const IntMat& o) const {
  if (c_ != o.r_) throw std::invalid_argument("IntMat::mul shape mismatch");
  IntMat out(r_, o.c_);
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t k = 0; k < c_; ++k) {
      if (at(i, k) == 0) continue;
      for (std::size_t j = 0; j < o.c_; ++j) out.at(i, j) += at(i, k) * o.at(k, j);
    }
  return out;
}

namespace {

void swap_rows(IntMat& A, IntMat& U, std::size_t i, std::size_t j) {
  for (std::size_t k = 0; k < A.cols(); ++k) std::swap(A.at(i, k), A.at(j, k));
  for (std::size_t k = 0; k < U.cols(); ++k) std::swap(U.at(i, k), U.at(j, k));
}
void swap_cols(IntMat& A, IntMat& V, std::size_t i, std::size_t j) {
  for (std::size_t k = 0; k < A.rows(); ++k) std::swap(A.at(k, i), A.at(k, j));
  for (std::size_t k = 0; k < V.rows(); ++k) std::swap(V.at(k, i), V.at(k, j));
}
// row_i -= f*row_j
void add_row(IntMat& A, IntMat& U, std::size_t i, std::size_t j, const Int& f) {
  for (std::size_t k = 0; k < A.cols(); ++k) A.at(i, k) -= f * A.at(j, k);
  for (std::size_t k = 0; k < U.cols(); ++k) U.at(i, k) -= f * U.at(j, k);
}
void add_col(IntMat& A, IntMat& V, std::size_t i, std::size_t j, const Int& f) {
  for (std::size_t k = 0; k < A.rows(); ++k) A.at(k, i) -= f * A.at(k, j);
  for (std::size_t k = 0; k < V.rows(); ++k) V.at(k, i) -= f * V.at(k, j);
}

}  // namespace

SmithResult smith_normal_form(const IntMat& A0) {
  SmithResult res;
  res.D = A0;
  res.U = IntMat::identity(A0.rows());
  res.V = IntMat::identity(A0.cols());
  IntMat& D = res.D;
  IntMat& U = res.U;
  IntMat& V = res.V;
  std::size_t n = std::min(D.rows(), D.cols());
  std::size_t t = 0;
  for (; t < n; ++t) {
    // find pivot: smallest nonzero |entry| in submatrix
    std::size_t pi = t, pj = t;
    bool found = false;
    for (std::size_t i = t; i < D.rows(); ++i)
      for (std::size_t j = t; j < D.cols(); ++j) {
        if (D.at(i, j) == 0) continue;
        if (!found || abs_int(D.at(i, j)) < abs_int(D.at(pi, pj))) {
          pi = i;
          pj = j;
          found = true;
        }
      }
    if (!found) break;
    swap_rows(D, U, t, pi);
    swap_cols(D, V, t, pj);
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t i = t + 1; i < D.rows(); ++i) {
        if (D.at(i, t) == 0) continue;
        Int f = D.at(i, t) / D.at(t, t);
        add_row(D, U, i, t, f);
        if (D.at(i, t) != 0) {
          // remainder smaller than pivot: swap up and restart
          swap_rows(D, U, t, i);
          again = true;
        }
      }
      for (std::size_t j = t + 1; j < D.cols(); ++j) {
        if (D.at(t, j) == 0) continue;
        Int f = D.at(t, j) / D.at(t, t);
        add_col(D, V, j, t, f);
        if (D.at(t, j) != 0) {
          swap_cols(D, V, t, j);
          again = true;
        }
      }
    }
    if (D.at(t, t) < 0) {
      // normalize sign via row scaling by -1 (unimodular)
      for (std::size_t k = 0; k < D.cols(); ++k) D.at(t, k) = -D.at(t, k);
      for (std::size_t k = 0; k < U.cols(); ++k) U.at(t, k) = -U.at(t, k);
    }
  }
  res.rank = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (D.at(i, i) != 0) ++res.rank;
  // enforce divisibility chain
  for (std::size_t i = 0; i + 1 < res.rank; ++i) {
    for (std::size_t j = i + 1; j < res.rank; ++j) {
      if (D.at(j, j) % D.at(i, i) == 0) continue;
      // standard trick: add col j to col i, re-reduce the 2x2 block
      add_col(D, V, i, j, Int(-1));
      // now D.at(j,i) == D.at(j,j); reduce rows i,j on cols i,j
      // run a mini euclid on the 2x2 block
      while (true) {
        if (D.at(j, i) != 0) {
          Int f = D.at(i, i) / D.at(j, i);
          add_row(D, U, i, j, f);
          if (D.at(i, i) == 0) swap_rows(D, U, i, j);
          if (D.at(j, i) == 0) break;
        } else {
          break;
        }
      }
      // clear off-diagonals of the block
      if (D.at(i, j) != 0) {
        Int f = D.at(i, j) / D.at(i, i);
        add_col(D, V, j, i, f);
      }
      if (D.at(j, i) != 0) {
        Int f = D.at(j, i) / D.at(i, i);
        add_row(D, U, j, i, f);
      }
      if (D.at(i, i) < 0) {
        for (std::size_t k = 0; k < D.cols(); ++k) D.at(i, k) = -D.at(i, k);
        for (std::size_t k = 0; k < U.cols(); ++k) U.at(i, k) = -U.at(i, k);
      }
      if (D.at(j, j) < 0) {
        for (std::size_t k = 0; k < D.cols(); ++k) D.at(j, k) = -D.at(j, k);
        for (std::size_t k = 0; k < U.cols(); ++k) U.at(j, k) = -U.at(j, k);
      }
    }
  }
  return res;
}

std::vector<std::vector<Int>> saturation_basis(const IntMat& A) {
  // rowspace_Q(A) ∩ Z^n. With U A V = D: rows of A generate L; saturation of L
  // has basis rows given by (D', 0) V^{-1} with D' = identity on the rank block.
  // Equivalently: x in saturation iff x V has support in first r coords.
  // Basis: rows e_i V^{-1}, i < r.  We get V^{-1} by running SNF bookkeeping on V.
  SmithResult s = smith_normal_form(A);
  std::size_t n = A.cols();
  std::size_t r = s.rank;
  // invert V (unimodular, small) by integer Gauss-Jordan via SNF of V:
  // easier: solve V * X = I over Q and round (entries are integers).
  // We do fraction-free elimination using Rat.
  std::vector<std::vector<Rat>> m(n, std::vector<Rat>(2 * n, Rat(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = Rat(s.V.at(i, j));
    m[i][n + i] = 1;
  }
  for (std::size_t col = 0, row = 0; col < n && row < n; ++col) {
    std::size_t piv = row;
    while (piv < n && m[piv][col] == 0) ++piv;
    if (piv == n) continue;
    std::swap(m[piv], m[row]);
    Rat d = m[row][col];
    for (auto& x : m[row]) x /= d;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == row || m[i][col] == 0) continue;
      Rat f = m[i][col];
      for (std::size_t j = 0; j < 2 * n; ++j) m[i][j] -= f * m[row][j];
    }
    ++row;
  }
  std::vector<std::vector<Int>> out;
  for (std::size_t i = 0; i < r; ++i) {
    std::vector<Int> rowv(n);
    for (std::size_t j = 0; j < n; ++j) {
      // (V^{-1})_{ij} lives at m[i][n+j]; entries are integers
      const Rat& q = m[i][n + j];
      if (denominator(q) != 1) throw std::logic_error("saturation: V inverse not integral");
      rowv[j] = numerator(q);
    }
    out.push_back(std::move(rowv));
  }
  return out;
}

std::vector<std::vector<Int>> complement_basis(const std::vector<std::vector<Int>>& C,
                                               std::size_t n) {
  if (C.empty()) {
    std::vector<std::vector<Int>> out;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Int> e(n, Int(0));
      e[i] = 1;
      out.push_back(std::move(e));
    }
    return out;
  }
  IntMat A(C.size(), n);
  for (std::size_t i = 0; i < C.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) A.at(i, j) = C[i][j];
  SmithResult s = smith_normal_form(A);
  for (std::size_t i = 0; i < s.rank; ++i) {
    if (abs_int(s.D.at(i, i)) != 1)
      throw std::invalid_argument("complement_basis: C is not saturated");
  }
  // With U A V = D = (I_r | 0): rows of A and rows e_i V^{-1} (i<r) span the same
  // lattice; the complement is spanned by e_i V^{-1} for i >= r.
  std::vector<std::vector<Rat>> m(n, std::vector<Rat>(2 * n, Rat(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = Rat(s.V.at(i, j));
    m[i][n + i] = 1;
  }
  for (std::size_t col = 0, row = 0; col < n && row < n; ++col) {
    std::size_t piv = row;
    while (piv < n && m[piv][col] == 0) ++piv;
    if (piv == n) continue;
    std::swap(m[piv], m[row]);
    Rat d = m[row][col];
    for (auto& x : m[row]) x /= d;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == row || m[i][col] == 0) continue;
      Rat f = m[i][col];
      for (std::size_t j = 0; j < 2 * n; ++j) m[i][j] -= f * m[row][j];
    }
    ++row;
  }
  std::vector<std::vector<Int>> out;
  for (std::size_t i = s.rank; i < n; ++i) {
    std::vector<Int> rowv(n);
    for (std::size_t j = 0; j < n; ++j) {
      const Rat& q = m[i][n + j];
      if (denominator(q) != 1) throw std::logic_error("complement: V inverse not integral");
      rowv[j] = numerator(q);
    }
    out.push_back(std::move(rowv));
  }
  return out;
}

}  // namespace pregeom
