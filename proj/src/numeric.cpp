#include "sparseconv/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace sparseconv {

namespace {

void mul_full(u128 a, u128 b, u128& hi, u128& lo) {
  const u64 a0 = static_cast<u64>(a), a1 = static_cast<u64>(a >> 64);
  const u64 b0 = static_cast<u64>(b), b1 = static_cast<u64>(b >> 64);
  u128 p00 = static_cast<u128>(a0) * b0;
  u128 p01 = static_cast<u128>(a0) * b1;
  u128 p10 = static_cast<u128>(a1) * b0;
  u128 p11 = static_cast<u128>(a1) * b1;
  u128 mid = (p00 >> 64) + static_cast<u64>(p01) + static_cast<u64>(p10);
  lo = (mid << 64) | static_cast<u64>(p00);
  hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
}

u128 mod_double(u128 x, u128 q) {  // 2x mod q for x < q < 2^127
  u128 y = x << 1;
  return y >= q ? y - q : y;
}

u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr unsigned kSmallPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                     41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

bool miller_rabin_round(const FieldCtx& f, u128 n, u128 d, int s, u128 a) {
  a %= n;
  if (a == 0) return true;
  u128 x = f.pow(a, d);
  if (x == 1 || x == n - 1) return true;
  for (int r = 1; r < s; ++r) {
    x = f.mul(x, x);
    if (x == n - 1) return true;
    if (x == 1) return false;
  }
  return false;
}

}  // namespace

std::string to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

u128 parse_u128(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty integer");
  u128 v = 0;
  const u128 limit = ~static_cast<u128>(0) / 10;
  for (char c : s) {
    if (c < '0' || c > '9') throw std::invalid_argument("not a decimal integer: " + s);
    if (v > limit) throw std::out_of_range("integer too large: " + s);
    v = v * 10 + static_cast<u128>(c - '0');
  }
  return v;
}

int bit_length(u128 v) {
  int b = 0;
  while (v > 0) {
    ++b;
    v >>= 1;
  }
  return b;
}

u64 rand_range(Rng& rng, u64 lo, u64 hi) {
  std::uniform_int_distribution<u64> d(lo, hi);
  return d(rng);
}

u128 rand_range128(Rng& rng, u128 lo, u128 hi) {
  if (hi < lo) throw std::invalid_argument("rand_range128: empty range");
  u128 span = hi - lo;
  if (span <= ~static_cast<u64>(0)) return lo + rand_range(rng, 0, static_cast<u64>(span));
  int bits = bit_length(span);
  u128 mask = bits >= 128 ? ~static_cast<u128>(0) : ((static_cast<u128>(1) << bits) - 1);
  while (true) {
    u128 r = (static_cast<u128>(rng()) << 64) | rng();
    r &= mask;
    if (r <= span) return lo + r;
  }
}

u64 derive_seed(u64 seed, u64 stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

OpCounters& op_counters() {
  thread_local OpCounters c;
  return c;
}

FieldCtx::FieldCtx(u128 q) : q_(q) {
  if (q < 2) throw std::invalid_argument("FieldCtx: modulus must be >= 2");
  if (bit_length(q) > 126) throw SizingError("FieldCtx: modulus exceeds 2^126");
  word_ = (q >> 64) == 0;
  if (word_) {
    u64 qq = static_cast<u64>(q);
    mont_ = (qq & 1) && qq < (static_cast<u64>(1) << 63);
    if (mont_) {
      u64 inv = qq;
      for (int i = 0; i < 6; ++i) inv *= 2 - qq * inv;
      nqinv_ = ~inv + 1;
      u128 r = (static_cast<u128>(1) << 64) % qq;
      r2_ = static_cast<u64>((r * r) % qq);
    }
  } else {
    if ((q & 1) == 0) throw std::invalid_argument("FieldCtx: even wide modulus");
    u128 inv = q;
    for (int i = 0; i < 7; ++i) inv *= 2 - q * inv;
    nqinv128_ = ~inv + 1;
    u128 r = (~static_cast<u128>(0) - q + 1) % q;  // 2^128 mod q
    u128 x = r;
    for (int i = 0; i < 128; ++i) x = mod_double(x, q);
    r2w_ = x;  // 2^256 mod q
  }
}

u128 FieldCtx::mul_wide(u128 a, u128 b) const {
  auto redc128 = [&](u128 hi, u128 lo) {
    u128 m = lo * nqinv128_;
    u128 mh, ml;
    mul_full(m, q_, mh, ml);
    u128 l = lo + ml;
    u128 carry = l < lo ? 1 : 0;
    u128 r = hi + mh + carry;
    return r >= q_ ? r - q_ : r;
  };
  u128 hi, lo;
  mul_full(a, b, hi, lo);
  u128 t = redc128(hi, lo);
  mul_full(t, r2w_, hi, lo);
  return redc128(hi, lo);
}

u128 FieldCtx::pow(u128 base, u128 e) const {
  u128 result = 1 % q_;
  base %= q_;
  while (e > 0) {
    if (e & 1) result = mul(result, base);
    base = mul(base, base);
    e >>= 1;
  }
  return result;
}

u128 FieldCtx::inv(u128 a) const {
  a %= q_;
  if (a == 0) throw std::invalid_argument("FieldCtx::inv: zero has no inverse");
  ++op_counters().inversions;
  u128 old_r = a, r = q_;
  u128 old_s = 1, s = 0;
  while (r != 0) {
    u128 quot = old_r / r;
    u128 nr = old_r - quot * r;
    old_r = r;
    r = nr;
    u128 ns = sub(old_s, mul(quot % q_, s));
    old_s = s;
    s = ns;
  }
  if (old_r != 1) throw std::invalid_argument("FieldCtx::inv: element not invertible");
  return old_s;
}

bool is_prime(u128 n) {
  if (n < 2) return false;
  for (unsigned p : kSmallPrimes) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  if (n < 97 * 97) return true;
  u128 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  if (bit_length(n) > 126) throw SizingError("is_prime: argument exceeds 2^126");
  FieldCtx f(n);
  if ((n >> 64) == 0) {
    static constexpr u64 kWitnesses[] = {2, 325, 9375, 28178, 450775, 9780504, 1795265022};
    for (u64 a : kWitnesses)
      if (!miller_rabin_round(f, n, d, s, a)) return false;
    return true;
  }
  Rng rng(static_cast<u64>(n) ^ static_cast<u64>(n >> 64) ^ 0x5bd1e995ULL);
  for (int round = 0; round < 40; ++round) {
    u128 a = rand_range128(rng, 2, n - 2);
    if (!miller_rabin_round(f, n, d, s, a)) return false;
  }
  return true;
}

u128 find_prime(u128 lo, u128 hi, Rng& rng) {
  if (lo > hi) throw std::invalid_argument("find_prime: empty range");
  if (bit_length(hi) > 126) throw SizingError("find_prime: range exceeds 2^126");
  double lg = std::max(1.0, static_cast<double>(bit_length(hi)));
  u64 budget = std::max<u64>(64, static_cast<u64>(512.0 * lg * lg));
  for (u64 it = 0; it < budget; ++it) {
    u128 c = rand_range128(rng, lo, hi);
    if (c > 2 && (c & 1) == 0) {
      if (c + 1 <= hi) ++c;
      else if (c - 1 >= lo) --c;
    }
    if (is_prime(c)) return c;
  }
  throw std::runtime_error("find_prime: no prime found in [" + to_string(lo) + ", " +
                           to_string(hi) + "] within the candidate budget");
}

u64 find_ntt_prime(u64 lo, u64 hi, int s, Rng& rng) {
  const u64 step = static_cast<u64>(1) << s;
  if (hi < 1 + step) throw std::invalid_argument("find_ntt_prime: range too small");
  u64 clo = lo <= 1 ? 1 : (lo - 1 + step - 1) / step;
  u64 chi = (hi - 1) / step;
  if (clo > chi) throw std::invalid_argument("find_ntt_prime: no candidates");
  double lg = std::max(1.0, std::log2(static_cast<double>(hi)));
  u64 budget = std::max<u64>(64, static_cast<u64>(512.0 * lg * lg));
  for (u64 it = 0; it < budget; ++it) {
    u64 c = rand_range(rng, clo, chi);
    u64 p = c * step + 1;
    if (is_prime(p)) return p;
  }
  throw std::runtime_error("find_ntt_prime: candidate budget exhausted");
}

namespace {

template <class T>
std::vector<T> bulk_pow_impl(T x, const std::vector<T>& exps, const FieldCtx& ctx) {
  std::vector<T> out(exps.size());
  if (exps.empty()) return out;
  x = static_cast<T>(ctx.reduce(x));
  T emax = *std::max_element(exps.begin(), exps.end());
  // Base b = 2^w >= n, so every exponent has ceil(log_b(emax + 1)) digits.
  int w = 1;
  while ((static_cast<u64>(1) << w) < exps.size() && w < 20) ++w;
  const u64 b = static_cast<u64>(1) << w;
  int digits = std::max(1, (bit_length(emax) + w - 1) / w);
  u64& ops = op_counters().ring_ops;
  std::vector<std::vector<T>> tab(digits, std::vector<T>(b));
  T g = x;  // x^{b^d}
  for (int d = 0; d < digits; ++d) {
    tab[d][0] = static_cast<T>(1 % ctx.q());
    for (u64 j = 1; j < b; ++j) {
      tab[d][j] = static_cast<T>(ctx.mul(tab[d][j - 1], g));
      ++ops;
    }
    g = static_cast<T>(ctx.mul(tab[d][b - 1], g));
    ++ops;
  }
  for (std::size_t i = 0; i < exps.size(); ++i) {
    T e = exps[i];
    T r = tab[0][static_cast<u64>(e & (b - 1))];
    e >>= w;
    for (int d = 1; e > 0; ++d) {
      r = static_cast<T>(ctx.mul(r, tab[d][static_cast<u64>(e & (b - 1))]));
      ++ops;
      e >>= w;
    }
    out[i] = r;
  }
  return out;
}

template <class T>
std::vector<T> bulk_inverse_impl(const std::vector<T>& a, const FieldCtx& ctx) {
  std::vector<T> out(a.size());
  if (a.empty()) return out;
  std::vector<T> pre(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    T v = static_cast<T>(ctx.reduce(a[i]));
    if (v == 0)
      throw std::invalid_argument("bulk_inverse: zero element at position " + std::to_string(i));
    pre[i] = i == 0 ? v : static_cast<T>(ctx.mul(pre[i - 1], v));
  }
  T acc = static_cast<T>(ctx.inv(pre.back()));
  for (std::size_t i = a.size(); i-- > 0;) {
    out[i] = i == 0 ? acc : static_cast<T>(ctx.mul(acc, pre[i - 1]));
    acc = static_cast<T>(ctx.mul(acc, ctx.reduce(a[i])));
  }
  return out;
}

}  // namespace

std::vector<u128> bulk_pow(u128 x, const std::vector<u128>& exps, const FieldCtx& ctx) {
  return bulk_pow_impl<u128>(x, exps, ctx);
}

std::vector<u64> bulk_pow64(u64 x, const std::vector<u64>& exps, const FieldCtx& ctx) {
  if (!ctx.word()) throw SizingError("bulk_pow64 requires a word-sized modulus");
  return bulk_pow_impl<u64>(x, exps, ctx);
}

std::vector<u128> bulk_inverse(const std::vector<u128>& a, const FieldCtx& ctx) {
  return bulk_inverse_impl<u128>(a, ctx);
}

std::vector<u64> bulk_inverse64(const std::vector<u64>& a, const FieldCtx& ctx) {
  if (!ctx.word()) throw SizingError("bulk_inverse64 requires a word-sized modulus");
  return bulk_inverse_impl<u64>(a, ctx);
}

u128 rand_unit(const FieldCtx& ctx, Rng& rng) {
  if (ctx.q() < 3) throw std::invalid_argument("rand_unit: modulus must be >= 3");
  return rand_range128(rng, 1, ctx.q() - 1);
}

}  // namespace sparseconv
