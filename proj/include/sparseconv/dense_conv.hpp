// Exact dense convolution engine (number-theoretic transforms over fixed
// word-size primes plus CRT), cyclic and Z_q variants, a fault-injecting
// wrapper and the verify-and-repeat loop.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sparseconv/numeric.hpp"
#include "sparseconv/vectors.hpp"

namespace sparseconv {

// Prime field with q < 2^62, Montgomery arithmetic and power-of-two roots of
// unity. Twiddle tables are grown lazily and shared between threads.
class NttField {
 public:
  explicit NttField(u64 q);
  u64 q() const { return q_; }
  int two_adicity() const { return s_; }
  // Lazy Montgomery product: inputs < 2q (one may be up to 4q), output < 2q.
  u64 mmul(u64 a, u64 b) const {
    u128 t = static_cast<u128>(a) * b;
    u64 m = static_cast<u64>(t) * nqinv_;
    return static_cast<u64>((t + static_cast<u128>(m) * q_) >> 64);
  }
  u64 to_mont(u64 a) const { return reduce(mmul(a % q_, r2_)); }
  u64 reduce(u64 a) const { return a >= q_ ? a - q_ : a; }  // [0,2q) -> [0,q)
  u64 pow(u64 b, u64 e) const;

  struct Tables {
    std::vector<u64> rt, irt;  // rt[len + j] = mont(w_{2 len}^j)
  };
  std::shared_ptr<const Tables> tables(int log_n) const;

  // In-place transforms of a length-2^log_n array with entries < 2q.
  // forward: natural order -> bit-reversed; inverse: bit-reversed -> natural,
  // scaled by `scale_mont` (a Montgomery-form constant). Output of inverse < q.
  void forward(u64* a, int log_n, bool parallel) const;
  void inverse(u64* a, int log_n, u64 scale_mont, bool parallel) const;
  // Constant that, passed to inverse(), undoes one Montgomery factor R^{-1}
  // and divides by n: mont(mont(n^{-1})).
  u64 inverse_scale(int log_n) const;

 private:
  u64 q_, nqinv_, r2_, root_;  // root_ has order exactly 2^s_
  int s_;
  mutable std::mutex mu_;
  mutable std::shared_ptr<const Tables> cache_;
  mutable int cache_log_ = -1;
};

// The three fixed NTT primes (< 2^62, all = 1 mod 2^28).
const std::array<u64, 3>& ntt_primes();
const NttField& ntt_field(int i);

// 192-bit unsigned integer (little-endian words) for exact wide results.
struct U192 {
  u64 w[3] = {0, 0, 0};
  bool operator==(const U192& o) const { return w[0] == o.w[0] && w[1] == o.w[1] && w[2] == o.w[2]; }
  bool fits_u63() const { return w[1] == 0 && w[2] == 0 && w[0] <= kMaxValue; }
  std::string str() const;
};

// Number of calls made to the dense convolution box on this thread.
u64& dense_call_counter();

// Exact linear convolution |A|+|B|-1 with full-width coefficients.
std::vector<U192> dense_conv_wide(const DenseVec& a, const DenseVec& b);
// Exact linear convolution; throws SizingError if a coefficient is >= 2^63.
DenseVec dense_conv(const DenseVec& a, const DenseVec& b);
// Single-threaded reference implementation (same results).
DenseVec dense_conv_serial(const DenseVec& a, const DenseVec& b);
// Cyclic convolution of two length-m vectors (exact integers).
DenseVec cyclic_conv(const DenseVec& a, const DenseVec& b, u64 m);

// Transform-domain convolution modulo an arbitrary prime q < 2^64. Uses a
// single transform when q itself supports the needed power-of-two size and
// otherwise three fixed primes with CRT reduction modulo q.
class ModqConvolver {
 public:
  explicit ModqConvolver(const FieldCtx& ctx);
  struct Spectrum {
    int log_n = 0;
    std::vector<std::vector<u64>> lanes;
  };
  const FieldCtx& field() const { return ctx_; }
  bool single_lane(int log_n) const { return direct_ && log_n <= direct_field_->two_adicity(); }
  // Transform of `len` residues (< q) zero-padded to 2^log_n.
  Spectrum forward(const u64* data, u64 len, int log_n) const;
  Spectrum zero(int log_n) const;
  // acc += x * y pointwise.
  void mul_acc(Spectrum& acc, const Spectrum& x, const Spectrum& y) const;
  // Back to coefficients mod q (length 2^log_n).
  DenseVec inverse(const Spectrum& s) const;

 private:
  FieldCtx ctx_;
  bool direct_ = false;
  std::unique_ptr<NttField> direct_field_;
  // CRT constants for the three-prime path.
  u64 inv_p0_mod_p1_ = 0, inv_p0_mod_p2_ = 0, inv_p1_mod_p2_ = 0;
  u64 p0_mod_q_ = 0, p0p1_mod_q_ = 0;
};

int ceil_log2(u64 n);

// Linear convolution of residue vectors modulo q (length |A|+|B|-1).
DenseVec conv_modq(const DenseVec& a, const DenseVec& b, const FieldCtx& ctx);
// Cyclic convolution of length-m residue vectors modulo q.
DenseVec cyclic_conv_modq(const DenseVec& a, const DenseVec& b, u64 m, const FieldCtx& ctx);

// With probability fail_prob, returns the exact product with one uniformly
// chosen coefficient increased by one.
DenseVec faulty_dense_conv(const DenseVec& a, const DenseVec& b, double fail_prob, Rng& rng);

using ConvBox = std::function<DenseVec(const DenseVec&, const DenseVec&)>;
using ConvVerifier = std::function<bool(const DenseVec&, const DenseVec&, const DenseVec&)>;

// Calls the box and the verifier until the verifier accepts; at most 64
// attempts (std::runtime_error afterwards). `calls` receives the number of
// box invocations.
DenseVec reliable_conv(const DenseVec& a, const DenseVec& b, const ConvBox& box,
                       const ConvVerifier& verifier, u64* calls = nullptr);

}  // namespace sparseconv
