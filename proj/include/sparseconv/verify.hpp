// Randomized identity testing of convolution results by evaluating the three
// generating polynomials at a random point of a prime field.
#pragma once

#include "sparseconv/numeric.hpp"
#include "sparseconv/vectors.hpp"

namespace sparseconv {

// Accepts every correct C; rejects a wrong C except with probability at most
// (|A|+|B|)/p <= 2^-32.
bool verify_dense(const DenseVec& a, const DenseVec& b, const DenseVec& c, Rng& rng);

// Sparse variant: rejects outright when ||C||_inf > k ||A||_inf ||B||_inf
// (k the largest of the three sparsities), otherwise evaluates at a random
// point of a prime field via bulk exponentiation. One-sided error below 1/k.
bool verify_sparse(const SparseVec& a, const SparseVec& b, const SparseVec& c, Rng& rng);

// Identity test over Z_q for residue vectors: checks A * B = C (linear
// convolution, |C| = |A|+|B|-1) at `points` random points; error <= (deg/q)^points.
bool verify_dense_modq(const DenseVec& a, const DenseVec& b, const DenseVec& c, const FieldCtx& ctx,
                       Rng& rng, int points = 1);

}  // namespace sparseconv
