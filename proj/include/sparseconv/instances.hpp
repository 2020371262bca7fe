// Seeded random instance generators for tests, benchmarks and the CLI.
#pragma once

#include <string>

#include "sparseconv/numeric.hpp"
#include "sparseconv/vectors.hpp"

namespace sparseconv {

enum class Structure { Uniform, Clustered, ArithmeticProgression, AdversarialHeights };

// Accepts "uniform" / "uniform-random", "clustered", "ap" /
// "arithmetic-progression", "adversarial" / "adversarial-heights".
Structure parse_structure(const std::string& s);
std::string structure_name(Structure s);

struct InstanceSpec {
  u64 n = 1 << 20;   // universe of A and B
  u64 k = 1 << 10;   // target output sparsity
  u64 delta = 1;     // value bound: entries in [1, delta]
  Structure structure = Structure::Uniform;
  u64 seed = 1;
};

struct Instance {
  SparseVec a, b;
  u64 output_nnz = 0;  // ||A * B||_0
  u64 resamples = 0;
};

// Generates (A, B) with ||A * B||_0 in [k/2, 2k] and entries in [1, delta],
// resampling (and rescaling the support sizes) until the window is hit.
// Deterministic in the spec. Throws std::invalid_argument if k > 2n - 1.
Instance generate_instance(const InstanceSpec& spec);

// |supp(A) + supp(B)|.
u64 sumset_size(const SparseVec& a, const SparseVec& b);

}  // namespace sparseconv
