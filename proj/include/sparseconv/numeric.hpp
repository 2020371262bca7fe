// Prime generation, modular arithmetic for moduli below 2^126, and the bulk
// exponentiation / bulk inversion primitives.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparseconv {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i64 = std::int64_t;

// The single random-source type used throughout the library.
using Rng = std::mt19937_64;

// Raised when a requested modulus or value does not fit the supported widths.
struct SizingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string to_string(u128 v);
u128 parse_u128(const std::string& s);
int bit_length(u128 v);

// Uniform integer in [lo, hi] (inclusive).
u64 rand_range(Rng& rng, u64 lo, u64 hi);
u128 rand_range128(Rng& rng, u128 lo, u128 hi);
// Derive an independent child seed (splitmix64 on the parent's output).
u64 derive_seed(u64 seed, u64 stream);

bool is_prime(u128 n);
// Rejection-sampled random prime in [lo, hi]; throws std::runtime_error when
// the candidate budget (512 * log2(hi)^2) is exhausted.
u128 find_prime(u128 lo, u128 hi, Rng& rng);
// Random prime in [lo, hi] of the form c * 2^s + 1 (NTT-friendly).
u64 find_ntt_prime(u64 lo, u64 hi, int s, Rng& rng);

// Counters used to instrument the bulk primitives. They are thread-local so
// concurrent workers do not interfere.
struct OpCounters {
  u64 inversions = 0;  // extended-Euclid inversions
  u64 ring_ops = 0;    // multiplications performed inside bulk_pow
};
OpCounters& op_counters();

// Prime field Z_q with q < 2^126. Values are plain integers in [0, q).
class FieldCtx {
 public:
  explicit FieldCtx(u128 q);

  u128 q() const { return q_; }
  bool word() const { return word_; }  // q < 2^64
  u64 q64() const { return static_cast<u64>(q_); }

  u128 add(u128 a, u128 b) const {
    u128 s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  u128 sub(u128 a, u128 b) const { return a >= b ? a - b : a + q_ - b; }
  u128 neg(u128 a) const { return a == 0 ? 0 : q_ - a; }
  u128 mul(u128 a, u128 b) const {
    if (word_) return mul64(static_cast<u64>(a), static_cast<u64>(b));
    return mul_wide(a, b);
  }
  u64 mul64(u64 a, u64 b) const {
    if (mont_) {
      u64 t = redc(static_cast<u128>(a) * b);
      return redc(static_cast<u128>(t) * r2_);
    }
    return static_cast<u64>((static_cast<u128>(a) * b) % q64());
  }
  u128 reduce(u128 a) const { return a % q_; }
  u128 pow(u128 base, u128 e) const;
  // Modular inverse by the extended Euclidean algorithm; counted.
  u128 inv(u128 a) const;

 private:
  u64 redc(u128 t) const {
    u64 m = static_cast<u64>(t) * nqinv_;
    u128 r = (t + static_cast<u128>(m) * q64()) >> 64;
    u64 x = static_cast<u64>(r);
    return x >= q64() ? x - q64() : x;
  }
  u128 mul_wide(u128 a, u128 b) const;

  u128 q_;
  bool word_ = false;
  bool mont_ = false;
  u64 nqinv_ = 0;  // -q^{-1} mod 2^64
  u64 r2_ = 0;     // 2^128 mod q
  // 128-bit Montgomery data (R = 2^128) for q >= 2^64.
  u128 nqinv128_ = 0;
  u128 r2w_ = 0;
};

// x^{e_i} for every exponent, by base-n digit tables.
std::vector<u128> bulk_pow(u128 x, const std::vector<u128>& exps, const FieldCtx& ctx);
std::vector<u64> bulk_pow64(u64 x, const std::vector<u64>& exps, const FieldCtx& ctx);

// Element-wise inverses using prefix products and exactly one inversion.
// Throws std::invalid_argument naming the first zero position.
std::vector<u128> bulk_inverse(const std::vector<u128>& a, const FieldCtx& ctx);
std::vector<u64> bulk_inverse64(const std::vector<u64>& a, const FieldCtx& ctx);

// Uniform element of {1, ..., q-1}.
u128 rand_unit(const FieldCtx& ctx, Rng& rng);

}  // namespace sparseconv
