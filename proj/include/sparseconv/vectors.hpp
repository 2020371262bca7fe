// Sparse and dense nonnegative vectors, folding, hashing of vectors, the
// derivative and bullet operators, and the quadratic-time reference product.
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparseconv/numeric.hpp"

namespace sparseconv {

constexpr u64 kMaxValue = (static_cast<u64>(1) << 63) - 1;  // entries are < 2^63
constexpr u64 kMaxLength = static_cast<u64>(1) << 60;       // universes are <= 2^60

using DenseVec = std::vector<u64>;

struct Entry {
  u64 index;
  u64 value;
  bool operator==(const Entry& o) const { return index == o.index && value == o.value; }
};

// Sorted (index, value) pairs over a universe [0, length). In integer mode the
// values are < 2^63; in field mode they are residues of some FieldCtx.
struct SparseVec {
  u64 length = 0;
  std::vector<Entry> entries;

  SparseVec() = default;
  explicit SparseVec(u64 len) : length(len) {}
  SparseVec(u64 len, std::vector<Entry> e) : length(len), entries(std::move(e)) {}

  std::size_t nnz() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  u64 max_value() const;
  u64 max_index() const { return entries.empty() ? 0 : entries.back().index; }
  u64 at(u64 index) const;  // 0 when absent (binary search)
  // Strictly increasing indices below length, no stored zeros.
  bool valid() const;
  std::vector<u64> support() const;

  static SparseVec from_dense(const DenseVec& d);
  DenseVec to_dense() const;

  bool operator==(const SparseVec& o) const { return length == o.length && entries == o.entries; }
  bool operator!=(const SparseVec& o) const { return !(*this == o); }
};

// Build a SparseVec from unsorted pairs; equal indices are summed (integer
// mode, overflow-checked) and zeros dropped.
SparseVec make_sparse(u64 length, std::vector<Entry> pairs);
// Field-mode variant: equal indices are summed modulo q, zero residues dropped.
SparseVec make_sparse_mod(u64 length, std::vector<Entry> pairs, const FieldCtx& ctx);

// (dA)_i = i * A_i.
SparseVec derivative(const SparseVec& a);
SparseVec derivative_mod(const SparseVec& a, const FieldCtx& ctx);

// (omega . A)_i = omega^i * A_i over Z_q; powers come from bulk_pow.
SparseVec bullet(u128 omega, const SparseVec& a, const FieldCtx& ctx);

// Residue-class sums (A mod m).
DenseVec fold_mod(const SparseVec& a, u64 m);
DenseVec fold_mod_q(const SparseVec& a, u64 m, const FieldCtx& ctx);
// Same operation on a sparse vector, returning a sparse vector of length m.
SparseVec fold_sparse_mod_q(const SparseVec& a, u64 m, const FieldCtx& ctx);

using IndexMap = std::function<u64(u64)>;
// f(A)_{j} = sum over f(i) = j of A_i.
DenseVec apply_hash(const IndexMap& f, const SparseVec& a, u64 m);
// Sparse, field-mode variant used inside the reductions.
SparseVec apply_hash_sparse_mod(const IndexMap& f, const SparseVec& a, u64 m, const FieldCtx& ctx);

// Exact A * B by summing over all support pairs (guard: nnz(A)*nnz(B) <= 1e8).
SparseVec brute_conv(const SparseVec& a, const SparseVec& b);
SparseVec brute_conv_mod(const SparseVec& a, const SparseVec& b, const FieldCtx& ctx);
// Exact cyclic convolution of two length-m vectors.
DenseVec brute_cyclic_conv(const DenseVec& a, const DenseVec& b, u64 m);

// Canonical text format: "SPARSEVEC 1 <U> <nnz>" then "<index> <value>" lines.
void write_sparsevec(std::ostream& os, const SparseVec& a);
SparseVec read_sparsevec(std::istream& is);
void save_sparsevec(const std::string& path, const SparseVec& a);
SparseVec load_sparsevec(const std::string& path);

}  // namespace sparseconv
