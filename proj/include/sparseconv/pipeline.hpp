// Output-sensitive sparse nonnegative convolution: folding / unfolding with
// Fourier-like coefficients, the approximate set query, support
// approximation, the reductions small -> tiny universe and large -> small
// universe, error correction, and sparsity estimation.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sparseconv/hashing.hpp"
#include "sparseconv/numeric.hpp"
#include "sparseconv/vectors.hpp"

namespace sparseconv {

enum class DenseBox { Exact, Faulty };

struct PipelineStats;

struct PipelineConfig {
  double delta = 1.0 / 64;  // target failure probability, 0 < delta <= 1/3
  double gamma = 0;         // error fraction; 0 means gamma = delta
  u64 seed = 1;

  // Hidden constants of the reductions (see README, "Calibration").
  double vote_rounds_scale = 0.125;   // R = ceil(scale * (ceil log 1/gamma + ceil log 1/delta)), R >= 3
  double universe_cube_exponent = 3;  // m = (|A| |B|)^e in the large-universe step
  double small_hash_factor = 5;       // m = ceil(factor * k / delta) in the small-universe step
  double correction_repeat_scale = 0.5;  // repeats ceil(scale * log2(2L/delta) / 1.5^(l-1))
  u64 set_query_load = 16;            // minimum average occupancy |X~| / m of the set-query buckets
  double flatness_fraction = 1.0 / 256;  // flatness budget floor, as a fraction of k
  u64 support_budget_factor = 4;      // abort an estimation step when |X| > factor * k*
  u64 max_attempts = 3;               // restarts of the large-universe step on rejection

  DenseBox box = DenseBox::Exact;
  double fail_prob = 0;  // for DenseBox::Faulty

  // Called after every error-correction level with the level number and the
  // current integer approximation of each target (level 0 = initial guess).
  std::function<void(int level, const SparseVec& current)> level_hook;

  double effective_gamma() const { return gamma > 0 ? gamma : delta; }
};

struct PipelineStats {
  u64 dense_calls = 0;           // calls to the dense convolution box
  u64 hash_loop_iterations = 0;  // set-query hash draws
  u64 omega_resamples = 0;
  u64 estimate_steps = 0;        // exponential-search steps
  u64 attempts = 0;              // large-universe attempts
  u64 brute_fallbacks = 0;
  std::vector<u64> level_support;  // per error-correction level: max_g ||V||_0 of the kept draw
  bool verified = false;
  std::vector<std::string> warnings;
};

// Raised when omega has too small a multiplicative order (duplicate points).
struct OmegaOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- folding ----

// out[t] = ((omega^t . A) mod m) for t < T, A over Z_q. Each residue class is
// cut into chunks of at most T indices and handled by one power-sum
// (transposed Vandermonde) product.
std::vector<DenseVec> fold(const SparseVec& a, u128 omega, u64 m, u64 T, const FieldCtx& ctx);
// Recovers a vector supported in X from C^t = (omega^t . A) mod m, t < T:
// classes of X with more than T members are skipped, the others are solved
// as transposed Vandermonde systems (one field inversion overall).
SparseVec unfold(const std::vector<DenseVec>& c, u128 omega, u64 m, const std::vector<u64>& xs, u64 length,
                 const FieldCtx& ctx);

// Position recovery behind the hashing reductions. Given, over Z_q,
// V = (h(A) * h(B)) mod m and W = (h(dA) * h(B) + h(A) * h(dB)) mod m, returns
// the entries (W_i / V_i, V_i) over buckets i != 0 of V whose quotient is
// below `length` and hashes back to bucket i (up to the offsets -p, 0, p).
// Every index isolated under h is recovered with its exact value.
SparseVec hash_recover(const SparseVec& v, const SparseVec& w, const LinearHash& h, u64 length,
                       const FieldCtx& ctx);

// ---- sumsets and support approximation ----

enum class SumsetMode { Exact, Subsampled };
// Returns O subset of Y + Z (sorted). Exact mode returns Y + Z; subsampled
// mode unions a few rounds of half-density subsamples of Y.
std::vector<u64> indyk_sumset(const std::vector<u64>& y, const std::vector<u64>& z, Rng& rng,
                              SumsetMode mode = SumsetMode::Exact);
// Approximates Y + Z for Y, Z within [0, U): |X| = O(k) and at most gamma k
// elements of Y + Z are missed with probability 1 - delta.
std::vector<u64> approx_supp(const std::vector<u64>& y, const std::vector<u64>& z, u64 U, u64 k, double gamma,
                             double delta, Rng& rng);

// ---- the reduction chain on integer vectors ----

// Approximate set query: ||A * B - C~||_0 <= gamma k w.h.p., given X covering
// almost all of supp(A * B). Output universe |A| + |B| - 1.
SparseVec set_query(const SparseVec& a, const SparseVec& b, u64 k, const std::vector<u64>& xs,
                    const PipelineConfig& cfg, PipelineStats* stats = nullptr);
SparseVec tiny_approx_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                           PipelineStats* stats = nullptr);
SparseVec small_approx_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                            PipelineStats* stats = nullptr);
// Exact with probability 1 - delta given ||A * B||_0 <= k; the result is
// checked with verify_sparse (stats->verified).
SparseVec small_sparse_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                            PipelineStats* stats = nullptr);
// Exponential search over the output sparsity.
SparseVec estimate_and_conv(const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg,
                            PipelineStats* stats = nullptr);
// Top-level entry: A * B for arbitrary universes (<= 2^60). Throws
// std::runtime_error if no attempt passes verification.
SparseVec sparse_conv(const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg,
                      PipelineStats* stats = nullptr);

// Default delta = min(1/64, 2^-ceil(sqrt(log2 k))).
double default_delta(u64 k);

}  // namespace sparseconv
