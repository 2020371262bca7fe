#include "sparseconv/dense_conv.hpp"

#include <algorithm>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparseconv {

namespace {

constexpr int kParallelMinLog = 16;

bool want_parallel(int log_n) {
#ifdef _OPENMP
  return log_n >= kParallelMinLog && omp_get_max_threads() > 1;
#else
  (void)log_n;
  return false;
#endif
}

template <bool Par>
void forward_impl(u64* a, int log_n, const NttField& f, const u64* rt) {
  const u64 n = static_cast<u64>(1) << log_n;
  const u64 q2 = 2 * f.q();
  for (u64 len = n >> 1; len >= 1; len >>= 1) {
    const u64* w = rt + len;
    if constexpr (Par) {
      const i64 half = static_cast<i64>(n >> 1);
#pragma omp parallel for schedule(static)
      for (i64 i = 0; i < half; ++i) {
        u64 j = static_cast<u64>(i) & (len - 1);
        u64 s = (static_cast<u64>(i) - j) << 1;
        u64 u = a[s + j], v = a[s + j + len];
        u64 x = u + v;
        a[s + j] = x >= q2 ? x - q2 : x;
        a[s + j + len] = f.mmul(u + q2 - v, w[j]);
      }
    } else {
      for (u64 s = 0; s < n; s += 2 * len) {
        u64* lo = a + s;
        u64* hi = a + s + len;
        for (u64 j = 0; j < len; ++j) {
          u64 u = lo[j], v = hi[j];
          u64 x = u + v;
          lo[j] = x >= q2 ? x - q2 : x;
          hi[j] = f.mmul(u + q2 - v, w[j]);
        }
      }
    }
  }
}

template <bool Par>
void inverse_impl(u64* a, int log_n, const NttField& f, const u64* irt, u64 scale) {
  const u64 n = static_cast<u64>(1) << log_n;
  const u64 q2 = 2 * f.q();
  for (u64 len = 1; len < n; len <<= 1) {
    const u64* w = irt + len;
    if constexpr (Par) {
      const i64 half = static_cast<i64>(n >> 1);
#pragma omp parallel for schedule(static)
      for (i64 i = 0; i < half; ++i) {
        u64 j = static_cast<u64>(i) & (len - 1);
        u64 s = (static_cast<u64>(i) - j) << 1;
        u64 u = a[s + j], v = f.mmul(a[s + j + len], w[j]);
        u64 x = u + v, y = u + q2 - v;
        a[s + j] = x >= q2 ? x - q2 : x;
        a[s + j + len] = y >= q2 ? y - q2 : y;
      }
    } else {
      for (u64 s = 0; s < n; s += 2 * len) {
        u64* lo = a + s;
        u64* hi = a + s + len;
        for (u64 j = 0; j < len; ++j) {
          u64 u = lo[j], v = f.mmul(hi[j], w[j]);
          u64 x = u + v, y = u + q2 - v;
          lo[j] = x >= q2 ? x - q2 : x;
          hi[j] = y >= q2 ? y - q2 : y;
        }
      }
    }
  }
  if constexpr (Par) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < static_cast<i64>(n); ++i) a[i] = f.reduce(f.mmul(a[i], scale));
  } else {
    for (u64 i = 0; i < n; ++i) a[i] = f.reduce(f.mmul(a[i], scale));
  }
}

}  // namespace

int ceil_log2(u64 n) {
  int l = 0;
  while ((static_cast<u64>(1) << l) < n) ++l;
  return l;
}

NttField::NttField(u64 q) : q_(q) {
  if (q < 3 || (q & 1) == 0 || q >= (static_cast<u64>(1) << 62))
    throw std::invalid_argument("NttField: modulus must be an odd prime below 2^62");
  u64 inv = q;
  for (int i = 0; i < 6; ++i) inv *= 2 - q * inv;
  nqinv_ = ~inv + 1;
  u128 r = (static_cast<u128>(1) << 64) % q;
  r2_ = static_cast<u64>((r * r) % q);
  s_ = 0;
  while (((q - 1) >> s_ & 1) == 0) ++s_;
  // Find an element of order exactly 2^s: x^((q-1)/2^s) for a non-residue x.
  const u64 odd = (q - 1) >> s_;
  root_ = 0;
  for (u64 x = 2; x < q; ++x) {
    u64 w = pow(x, odd);
    u64 t = w;
    for (int i = 1; i < s_; ++i) t = static_cast<u64>(static_cast<u128>(t) * t % q);
    if (t != 1) {
      root_ = w;
      break;
    }
  }
  if (root_ == 0) throw std::invalid_argument("NttField: modulus is not prime");
}

u64 NttField::pow(u64 b, u64 e) const {
  u128 r = 1, x = b % q_;
  while (e > 0) {
    if (e & 1) r = r * x % q_;
    x = x * x % q_;
    e >>= 1;
  }
  return static_cast<u64>(r);
}

std::shared_ptr<const NttField::Tables> NttField::tables(int log_n) const {
  if (log_n > s_) throw SizingError("NttField: transform size exceeds the 2-adicity of q");
  std::lock_guard<std::mutex> lock(mu_);
  if (cache_ && cache_log_ >= log_n) return cache_;
  int target = std::max(log_n, std::min(s_, std::max(cache_log_ + 1, 10)));
  const u64 n = static_cast<u64>(1) << target;
  auto t = std::make_shared<Tables>();
  t->rt.assign(std::max<u64>(n, 2), 0);
  t->irt.assign(std::max<u64>(n, 2), 0);
  for (u64 len = 1; len < n; len <<= 1) {
    int k = 0;
    while ((static_cast<u64>(1) << k) < 2 * len) ++k;
    u64 w = root_;
    for (int i = k; i < s_; ++i) w = static_cast<u64>(static_cast<u128>(w) * w % q_);
    u64 iw = pow(w, q_ - 2);
    u64 cur = 1, icur = 1;
    for (u64 j = 0; j < len; ++j) {
      t->rt[len + j] = to_mont(cur);
      t->irt[len + j] = to_mont(icur);
      cur = static_cast<u64>(static_cast<u128>(cur) * w % q_);
      icur = static_cast<u64>(static_cast<u128>(icur) * iw % q_);
    }
  }
  cache_ = t;
  cache_log_ = target;
  return cache_;
}

u64 NttField::inverse_scale(int log_n) const {
  u64 n_inv = pow((static_cast<u64>(1) << log_n) % q_, q_ - 2);
  return to_mont(to_mont(n_inv));
}

void NttField::forward(u64* a, int log_n, bool parallel) const {
  if (log_n == 0) return;
  auto t = tables(log_n);
  if (parallel) forward_impl<true>(a, log_n, *this, t->rt.data());
  else forward_impl<false>(a, log_n, *this, t->rt.data());
}

void NttField::inverse(u64* a, int log_n, u64 scale_mont, bool parallel) const {
  auto t = tables(std::max(log_n, 1));
  if (parallel) inverse_impl<true>(a, log_n, *this, t->irt.data(), scale_mont);
  else inverse_impl<false>(a, log_n, *this, t->irt.data(), scale_mont);
}

const std::array<u64, 3>& ntt_primes() {
  static const std::array<u64, 3> p = {4611685989973229569ULL, 4611685984336084993ULL,
                                       4611685982725472257ULL};
  return p;
}

const NttField& ntt_field(int i) {
  static const NttField f0(ntt_primes()[0]);
  static const NttField f1(ntt_primes()[1]);
  static const NttField f2(ntt_primes()[2]);
  return i == 0 ? f0 : (i == 1 ? f1 : f2);
}

std::string U192::str() const {
  // Repeated division by 10 on three words.
  u64 x[3] = {w[0], w[1], w[2]};
  std::string s;
  auto is_zero = [&] { return x[0] == 0 && x[1] == 0 && x[2] == 0; };
  if (is_zero()) return "0";
  while (!is_zero()) {
    u128 rem = 0;
    for (int i = 2; i >= 0; --i) {
      u128 cur = (rem << 64) | x[i];
      x[i] = static_cast<u64>(cur / 10);
      rem = cur % 10;
    }
    s.push_back(static_cast<char>('0' + static_cast<int>(rem)));
  }
  std::reverse(s.begin(), s.end());
  return s;
}

u64& dense_call_counter() {
  thread_local u64 c = 0;
  return c;
}

namespace {

struct Garner {
  u64 p0, p1, p2;
  FieldCtx f1, f2;
  u64 inv01, inv02, inv12;
  Garner()
      : p0(ntt_primes()[0]),
        p1(ntt_primes()[1]),
        p2(ntt_primes()[2]),
        f1(p1),
        f2(p2),
        inv01(static_cast<u64>(f1.inv(p0 % p1))),
        inv02(static_cast<u64>(f2.inv(p0 % p2))),
        inv12(static_cast<u64>(f2.inv(p1 % p2))) {}
  // Mixed-radix digits: x = r0 + p0 * t1 + p0 * p1 * t2.
  void digits(u64 r0, u64 r1, u64 r2, u64& t1, u64& t2) const {
    t1 = f1.mul64(static_cast<u64>(f1.sub(r1, r0 % p1)), inv01);
    u64 a = f2.mul64(static_cast<u64>(f2.sub(r2, r0 % p2)), inv02);
    t2 = f2.mul64(static_cast<u64>(f2.sub(a, t1 % p2)), inv12);
  }
};

const Garner& garner() {
  static const Garner g;
  return g;
}

void add192(U192& acc, u128 v, int shift_words) {
  u128 carry = 0;
  for (int i = shift_words; i < 3; ++i) {
    u128 part = (i - shift_words == 0) ? static_cast<u64>(v) : (i - shift_words == 1 ? static_cast<u64>(v >> 64) : 0);
    u128 s = static_cast<u128>(acc.w[i]) + part + carry;
    acc.w[i] = static_cast<u64>(s);
    carry = s >> 64;
  }
}

// Shared core: per-prime transforms of a and b for `lanes` primes, results as
// residues per lane (length la + lb - 1).
template <bool Par>
std::vector<DenseVec> lane_products(const DenseVec& a, const DenseVec& b, int lanes) {
  const u64 out_len = a.size() + b.size() - 1;
  const int log_n = ceil_log2(out_len);
  const u64 n = static_cast<u64>(1) << log_n;
  std::vector<DenseVec> res(lanes);
  for (int l = 0; l < lanes; ++l) {
    const NttField& f = ntt_field(l);
    const u64 p = f.q();
    DenseVec fa(n, 0), fb(n, 0);
    for (u64 i = 0; i < a.size(); ++i) fa[i] = a[i] % p;
    for (u64 i = 0; i < b.size(); ++i) fb[i] = b[i] % p;
    f.forward(fa.data(), log_n, Par);
    f.forward(fb.data(), log_n, Par);
    if constexpr (Par) {
#pragma omp parallel for schedule(static)
      for (i64 i = 0; i < static_cast<i64>(n); ++i) fa[i] = f.mmul(fa[i], fb[i]);
    } else {
      for (u64 i = 0; i < n; ++i) fa[i] = f.mmul(fa[i], fb[i]);
    }
    DenseVec().swap(fb);
    f.inverse(fa.data(), log_n, f.inverse_scale(log_n), Par);
    fa.resize(out_len);
    fa.shrink_to_fit();
    res[l] = std::move(fa);
  }
  return res;
}

int lanes_needed(const DenseVec& a, const DenseVec& b) {
  u64 ma = a.empty() ? 0 : *std::max_element(a.begin(), a.end());
  u64 mb = b.empty() ? 0 : *std::max_element(b.begin(), b.end());
  u128 prod = static_cast<u128>(ma) * mb;
  u64 cnt = std::min(a.size(), b.size());
  // bound = cnt * prod, compared against p0 and p0 * p1 (saturating).
  const u128 p0 = ntt_primes()[0];
  const u128 p01 = p0 * ntt_primes()[1];
  if (prod == 0) return 1;
  if (prod > p01 / cnt) return 3;
  u128 bound = prod * cnt;
  if (bound < p0) return 1;
  if (bound < p01) return 2;
  return 3;
}

void check_inputs(const DenseVec& a, const DenseVec& b) {
  const u64 cap = static_cast<u64>(1) << 27;
  if (a.size() > cap || b.size() > cap) throw SizingError("dense_conv: length exceeds 2^27");
  for (u64 v : a)
    if (v > kMaxValue) throw SizingError("dense_conv: value >= 2^63");
  for (u64 v : b)
    if (v > kMaxValue) throw SizingError("dense_conv: value >= 2^63");
}

U192 combine(const std::vector<DenseVec>& lanes, u64 i) {
  U192 x;
  if (lanes.size() == 1) {
    x.w[0] = lanes[0][i];
    return x;
  }
  const Garner& g = garner();
  u64 r0 = lanes[0][i], r1 = lanes[1][i];
  u64 r2 = lanes.size() == 3 ? lanes[2][i] : 0;
  u64 t1, t2;
  if (lanes.size() == 2) {
    t1 = g.f1.mul64(static_cast<u64>(g.f1.sub(r1, r0 % g.p1)), g.inv01);
    t2 = 0;
  } else {
    g.digits(r0, r1, r2, t1, t2);
  }
  add192(x, r0, 0);
  add192(x, static_cast<u128>(g.p0) * t1, 0);
  if (t2 != 0) {
    u128 p01 = static_cast<u128>(g.p0) * g.p1;
    add192(x, static_cast<u128>(static_cast<u64>(p01)) * t2, 0);
    add192(x, static_cast<u128>(static_cast<u64>(p01 >> 64)) * t2, 1);
  }
  return x;
}

template <bool Par>
DenseVec dense_conv_u63(const DenseVec& a, const DenseVec& b) {
  check_inputs(a, b);
  if (a.empty() || b.empty()) return {};
  int lanes = lanes_needed(a, b);
  auto res = lane_products<Par>(a, b, lanes);
  if (lanes == 1) return std::move(res[0]);
  DenseVec out(res[0].size());
  for (u64 i = 0; i < out.size(); ++i) {
    U192 x = combine(res, i);
    if (!x.fits_u63()) throw SizingError("dense_conv: result >= 2^63 at index " + std::to_string(i));
    out[i] = x.w[0];
  }
  return out;
}

}  // namespace

std::vector<U192> dense_conv_wide(const DenseVec& a, const DenseVec& b) {
  check_inputs(a, b);
  ++dense_call_counter();
  if (a.empty() || b.empty()) return {};
  int lanes = lanes_needed(a, b);
  const int log_n = ceil_log2(a.size() + b.size() - 1);
  auto res = want_parallel(log_n) ? lane_products<true>(a, b, lanes) : lane_products<false>(a, b, lanes);
  std::vector<U192> out(res[0].size());
  for (u64 i = 0; i < out.size(); ++i) out[i] = combine(res, i);
  return out;
}

DenseVec dense_conv(const DenseVec& a, const DenseVec& b) {
  ++dense_call_counter();
  if (a.empty() || b.empty()) return {};
  const int log_n = ceil_log2(a.size() + b.size() - 1);
  return want_parallel(log_n) ? dense_conv_u63<true>(a, b) : dense_conv_u63<false>(a, b);
}

DenseVec dense_conv_serial(const DenseVec& a, const DenseVec& b) {
  ++dense_call_counter();
  return dense_conv_u63<false>(a, b);
}

DenseVec cyclic_conv(const DenseVec& a, const DenseVec& b, u64 m) {
  if (a.size() != m || b.size() != m)
    throw std::invalid_argument("cyclic_conv: both inputs must have length m");
  if (m == 0) return {};
  auto lin = dense_conv_wide(a, b);
  DenseVec out(m, 0);
  for (u64 i = 0; i < lin.size(); ++i) {
    if (!lin[i].fits_u63()) throw SizingError("cyclic_conv: result >= 2^63");
    u64 j = i >= m ? i - m : i;
    u64 s = out[j] + lin[i].w[0];
    if (s > kMaxValue) throw SizingError("cyclic_conv: result >= 2^63 at index " + std::to_string(j));
    out[j] = s;
  }
  return out;
}

ModqConvolver::ModqConvolver(const FieldCtx& ctx) : ctx_(ctx) {
  if (!ctx.word()) throw SizingError("ModqConvolver: modulus must be below 2^64");
  const u64 q = ctx.q64();
  if (q >= 3 && (q & 1) && q < (static_cast<u64>(1) << 62) && ((q - 1) & 1023) == 0) {
    try {
      direct_field_ = std::make_unique<NttField>(q);
      direct_ = true;
    } catch (const std::invalid_argument&) {
      direct_ = false;
    }
  }
  const Garner& g = garner();
  inv_p0_mod_p1_ = g.inv01;
  inv_p0_mod_p2_ = g.inv02;
  inv_p1_mod_p2_ = g.inv12;
  p0_mod_q_ = static_cast<u64>(ctx_.reduce(g.p0));
  p0p1_mod_q_ = static_cast<u64>(ctx_.mul(p0_mod_q_, ctx_.reduce(g.p1)));
}

ModqConvolver::Spectrum ModqConvolver::zero(int log_n) const {
  Spectrum s;
  s.log_n = log_n;
  const u64 n = static_cast<u64>(1) << log_n;
  s.lanes.assign(single_lane(log_n) ? 1 : 3, DenseVec(n, 0));
  return s;
}

ModqConvolver::Spectrum ModqConvolver::forward(const u64* data, u64 len, int log_n) const {
  Spectrum s = zero(log_n);
  const u64 n = static_cast<u64>(1) << log_n;
  if (len > n) throw std::invalid_argument("ModqConvolver::forward: input longer than transform");
  const bool par = want_parallel(log_n);
  if (s.lanes.size() == 1) {
    std::copy(data, data + len, s.lanes[0].begin());
    direct_field_->forward(s.lanes[0].data(), log_n, par);
    return s;
  }
  for (int l = 0; l < 3; ++l) {
    const NttField& f = ntt_field(l);
    for (u64 i = 0; i < len; ++i) s.lanes[l][i] = data[i] % f.q();
    f.forward(s.lanes[l].data(), log_n, par);
  }
  return s;
}

void ModqConvolver::mul_acc(Spectrum& acc, const Spectrum& x, const Spectrum& y) const {
  const u64 n = static_cast<u64>(1) << acc.log_n;
  for (std::size_t l = 0; l < acc.lanes.size(); ++l) {
    const NttField& f = acc.lanes.size() == 1 ? *direct_field_ : ntt_field(static_cast<int>(l));
    const u64 q2 = 2 * f.q();
    u64* a = acc.lanes[l].data();
    const u64* xa = x.lanes[l].data();
    const u64* ya = y.lanes[l].data();
    for (u64 i = 0; i < n; ++i) {
      u64 v = a[i] + f.mmul(xa[i], ya[i]);
      a[i] = v >= q2 ? v - q2 : v;
    }
  }
}

DenseVec ModqConvolver::inverse(const Spectrum& s) const {
  const int log_n = s.log_n;
  const u64 n = static_cast<u64>(1) << log_n;
  const bool par = want_parallel(log_n);
  if (s.lanes.size() == 1) {
    DenseVec out = s.lanes[0];
    direct_field_->inverse(out.data(), log_n, direct_field_->inverse_scale(log_n), par);
    return out;
  }
  std::vector<DenseVec> lanes(3);
  for (int l = 0; l < 3; ++l) {
    const NttField& f = ntt_field(l);
    lanes[l] = s.lanes[l];
    f.inverse(lanes[l].data(), log_n, f.inverse_scale(log_n), par);
  }
  const Garner& g = garner();
  DenseVec out(n);
  for (u64 i = 0; i < n; ++i) {
    u64 t1, t2;
    g.digits(lanes[0][i], lanes[1][i], lanes[2][i], t1, t2);
    u128 v = ctx_.reduce(lanes[0][i]);
    v = ctx_.add(v, ctx_.mul(p0_mod_q_, ctx_.reduce(t1)));
    v = ctx_.add(v, ctx_.mul(p0p1_mod_q_, ctx_.reduce(t2)));
    out[i] = static_cast<u64>(v);
  }
  return out;
}

DenseVec conv_modq(const DenseVec& a, const DenseVec& b, const FieldCtx& ctx) {
  ++dense_call_counter();
  if (a.empty() || b.empty()) return {};
  ModqConvolver cv(ctx);
  const u64 out_len = a.size() + b.size() - 1;
  const int log_n = ceil_log2(out_len);
  auto fa = cv.forward(a.data(), a.size(), log_n);
  auto fb = cv.forward(b.data(), b.size(), log_n);
  auto acc = cv.zero(log_n);
  cv.mul_acc(acc, fa, fb);
  DenseVec out = cv.inverse(acc);
  out.resize(out_len);
  return out;
}

DenseVec cyclic_conv_modq(const DenseVec& a, const DenseVec& b, u64 m, const FieldCtx& ctx) {
  if (a.size() != m || b.size() != m)
    throw std::invalid_argument("cyclic_conv_modq: both inputs must have length m");
  if (m == 0) return {};
  DenseVec lin = conv_modq(a, b, ctx);
  DenseVec out(m, 0);
  for (u64 i = 0; i < lin.size(); ++i) {
    u64 j = i >= m ? i - m : i;
    out[j] = static_cast<u64>(ctx.add(out[j], lin[i]));
  }
  return out;
}

DenseVec faulty_dense_conv(const DenseVec& a, const DenseVec& b, double fail_prob, Rng& rng) {
  if (!(fail_prob >= 0.0 && fail_prob <= 1.0 / 3.0 + 1e-12))
    throw std::invalid_argument("faulty_dense_conv: fail_prob must lie in [0, 1/3]");
  DenseVec c = dense_conv(a, b);
  std::bernoulli_distribution fail(fail_prob);
  if (!c.empty() && fail(rng)) {
    u64 i = rand_range(rng, 0, c.size() - 1);
    c[i] += 1;
  }
  return c;
}

DenseVec reliable_conv(const DenseVec& a, const DenseVec& b, const ConvBox& box,
                       const ConvVerifier& verifier, u64* calls) {
  for (u64 attempt = 1; attempt <= 64; ++attempt) {
    DenseVec c = box(a, b);
    if (calls) *calls = attempt;
    if (verifier(a, b, c)) return c;
  }
  throw std::runtime_error("reliable_conv: 64 consecutive rejections; the convolution box is broken");
}

}  // namespace sparseconv
