// Linear hashing h(x) = ((sigma x + tau) mod p) mod m, hashing modulo a random
// prime, flatness / isolation predicates, heights of rationals, and the
// concentration experiments for linear hashing in small universes.
#pragma once

#include <array>
#include <memory>
#include <vector>

#include "sparseconv/numeric.hpp"

namespace sparseconv {

struct LinearHash {
  u128 p = 2;  // prime
  u64 m = 1;   // buckets, m <= p
  u128 sigma = 0, tau = 0;
  // Arithmetic context for p >= 2^64 (filled by lh_sample; built on demand otherwise).
  std::shared_ptr<const FieldCtx> wide;

  // pi(x) = (sigma x + tau) mod p
  u128 pi(u128 x) const;
  u64 operator()(u128 x) const { return static_cast<u64>(pi(x) % m); }
  // Inverse of pi on [0, p); requires sigma != 0.
  u128 pi_invert(u128 y) const;
};

// sigma, tau uniform in [0, p). With nonzero_sigma, sigma is uniform in [1, p).
LinearHash lh_sample(u128 p, u64 m, Rng& rng, bool nonzero_sigma = false);

// The offset o in {-p, 0, p} with h(x) + h(y) = h(0) + h(x+y) + o (mod m),
// i.e. pi(x) + pi(y) = pi(0) + pi(x+y) + o over the integers. Requires x, y, x+y < p.
int offsets_for(const LinearHash& h, u128 x, u128 y);  // returns -1, 0 or +1 (multiples of p)

struct PrimeModHash {
  u64 p = 2;
  u64 operator()(u64 x) const { return x % p; }
};
PrimeModHash pmh_sample(u64 m, Rng& rng);  // p a random prime in [m, 2m]

// F_m(X): number of x in X whose residue class mod m holds more than 2|X|/m
// elements of X.
u64 flatness(const std::vector<u64>& xs, u64 m);

// Elements x of S for which no other element y of S has bucket(y) in
// bucket(x) + offsets (mod m). `buckets[i]` is the bucket of S[i].
std::vector<u64> isolated_indices(const std::vector<u64>& s, const std::vector<u64>& buckets, u64 m,
                                  const std::vector<u64>& offsets);
// Convenience form for a linear hash with the window {-2p, -p, 0, p, 2p}.
std::vector<u64> isolated_indices(const std::vector<u64>& s, const LinearHash& h);

// H(x/y) = max(|a|, |b|) for x/y = a/b in lowest terms.
u64 height(i64 x, i64 y);
// Sum over ordered pairs (x, y) in X^2 of 1 / H(x/y) (compensated summation,
// relative error far below 1e-9). |X| <= 10^4.
long double inverse_height_sum(const std::vector<u64>& xs);

struct LowerBoundSet {
  std::vector<u64> keys;        // sorted, |keys| = k
  std::vector<u64> primes;      // p_0 .. p_{n-1}
  u64 n = 0, S = 0, core = 0;   // core = |X'|
  double C = 0, epsilon = 0;
};
// Keys of the form s * prod_{i in I} p_i (|I| = n/2, 1 <= s <= S) padded with
// the smallest unused positive integers to exactly k keys in [1, U].
LowerBoundSet lower_bound_set(u64 k, u64 U, Rng& rng);

struct ConcentrationStats {
  u64 trials = 0;
  double cond_prob = 0;      // empirical Pr(h(y) = h(z) = b | h(x) = a), y, z uniform in X
  double mean_F = 0;         // empirical E(F | h(x) = a)
  double fitted_c = 0;       // (cond_prob - 1/m^2) * m k^2 / (U log2 U)
  std::array<double, 4> tail_mass{};  // Pr(|F - E F| >= lambda sqrt(E F)), lambda = 1, 2, 4, 8
  static constexpr std::array<double, 4> lambdas{1, 2, 4, 8};
};
// Draws `trials` hash functions conditioned on h(x) = a (sigma uniform, pi(x)
// uniform in the residue class of a) and measures the bucket b. Requires
// p > 4U^2, m <= U, x not in X.
ConcentrationStats concentration_experiment(const std::vector<u64>& xs, u64 U, u128 p, u64 m, u64 x,
                                            u64 a, u64 b, u64 trials, Rng& rng);

}  // namespace sparseconv
