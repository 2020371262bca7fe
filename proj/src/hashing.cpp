#include "sparseconv/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace sparseconv {

namespace {
const u128 kWord = static_cast<u128>(1) << 64;
}  // namespace

u128 LinearHash::pi(u128 x) const {
  if (p < kWord) {
    u128 r = static_cast<u128>(static_cast<u64>(sigma)) * static_cast<u64>(x % p) + tau;
    return r % p;
  }
  if (wide) return wide->add(wide->mul(sigma, x % p), tau);
  FieldCtx f(p);
  return f.add(f.mul(sigma, x % p), tau);
}

u128 LinearHash::pi_invert(u128 y) const {
  if (sigma == 0) throw std::invalid_argument("pi_invert: sigma = 0, resample the hash function");
  FieldCtx f(p);
  return f.mul(f.inv(sigma), f.sub(y % p, tau));
}

LinearHash lh_sample(u128 p, u64 m, Rng& rng, bool nonzero_sigma) {
  if (m == 0 || m > p) throw std::invalid_argument("lh_sample: need 1 <= m <= p");
  LinearHash h;
  h.p = p;
  h.m = m;
  h.sigma = rand_range128(rng, nonzero_sigma ? 1 : 0, p - 1);
  h.tau = rand_range128(rng, 0, p - 1);
  if (p >= kWord) h.wide = std::make_shared<const FieldCtx>(p);
  return h;
}

int offsets_for(const LinearHash& h, u128 x, u128 y) {
  u128 lhs = h.pi(x) + h.pi(y);
  u128 rhs = h.pi(0) + h.pi(x + y);
  if (lhs == rhs) return 0;
  if (lhs == rhs + h.p) return 1;
  if (lhs + h.p == rhs) return -1;
  throw std::logic_error("offsets_for: keys outside [0, p)");
}

PrimeModHash pmh_sample(u64 m, Rng& rng) {
  if (m < 2) m = 2;
  return PrimeModHash{static_cast<u64>(find_prime(m, 2 * static_cast<u128>(m), rng))};
}

u64 flatness(const std::vector<u64>& xs, u64 m) {
  if (m == 0) throw std::invalid_argument("flatness: m must be positive");
  std::unordered_map<u64, u64> cnt;
  cnt.reserve(xs.size());
  for (u64 x : xs) ++cnt[x % m];
  const u128 limit = 2 * static_cast<u128>(xs.size());
  u64 f = 0;
  for (const auto& [cls, c] : cnt)
    if (static_cast<u128>(c) * m > limit) f += c;
  return f;
}

std::vector<u64> isolated_indices(const std::vector<u64>& s, const std::vector<u64>& buckets, u64 m,
                                  const std::vector<u64>& offsets) {
  if (s.size() != buckets.size()) throw std::invalid_argument("isolated_indices: size mismatch");
  std::vector<u64> residues;
  for (u64 o : offsets) residues.push_back(o % m);
  std::sort(residues.begin(), residues.end());
  residues.erase(std::unique(residues.begin(), residues.end()), residues.end());
  std::unordered_map<u64, u64> cnt;
  cnt.reserve(buckets.size());
  for (u64 b : buckets) ++cnt[b];
  std::vector<u64> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool iso = true;
    for (u64 r : residues) {
      u64 target = static_cast<u64>((static_cast<u128>(buckets[i]) + r) % m);
      auto it = cnt.find(target);
      u64 c = it == cnt.end() ? 0 : it->second;
      if (r == 0) --c;
      if (c != 0) {
        iso = false;
        break;
      }
    }
    if (iso) out.push_back(s[i]);
  }
  return out;
}

std::vector<u64> isolated_indices(const std::vector<u64>& s, const LinearHash& h) {
  std::vector<u64> buckets;
  buckets.reserve(s.size());
  for (u64 x : s) buckets.push_back(h(x));
  const u64 pm = static_cast<u64>(h.p % h.m);
  const u64 m = h.m;
  std::vector<u64> offsets = {0, pm, static_cast<u64>((2 * static_cast<u128>(pm)) % m), (m - pm) % m,
                              static_cast<u64>((2 * static_cast<u128>(m) - 2 * static_cast<u128>(pm)) % m)};
  return isolated_indices(s, buckets, m, offsets);
}

u64 height(i64 x, i64 y) {
  if (x == 0 || y == 0) throw std::invalid_argument("height: arguments must be nonzero");
  u64 a = x < 0 ? static_cast<u64>(-(x + 1)) + 1 : static_cast<u64>(x);
  u64 b = y < 0 ? static_cast<u64>(-(y + 1)) + 1 : static_cast<u64>(y);
  return std::max(a, b) / std::gcd(a, b);
}

long double inverse_height_sum(const std::vector<u64>& xs) {
  if (xs.size() > 10000) throw std::invalid_argument("inverse_height_sum: |X| exceeds 10^4");
  for (u64 x : xs)
    if (x == 0) throw std::invalid_argument("inverse_height_sum: zero key");
  const i64 n = static_cast<i64>(xs.size());
  std::vector<long double> rows(xs.size(), 0.0L);
#pragma omp parallel for schedule(dynamic, 16)
  for (i64 i = 0; i < n; ++i) {
    long double sum = 0, comp = 0;  // Kahan summation
    for (i64 j = 0; j < n; ++j) {
      u64 a = xs[i], b = xs[j];
      long double term = static_cast<long double>(std::gcd(a, b)) / static_cast<long double>(std::max(a, b));
      long double y = term - comp;
      long double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    rows[i] = sum;
  }
  long double sum = 0, comp = 0;
  for (long double r : rows) {
    long double y = r - comp;
    long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

namespace {

std::vector<u64> primes_in(u64 lo, u64 hi) {
  std::vector<char> sieve(hi + 1, 1);
  std::vector<u64> out;
  for (u64 i = 2; i <= hi; ++i) {
    if (!sieve[i]) continue;
    if (i >= lo) out.push_back(i);
    for (u64 j = i * i; j <= hi; j += i) sieve[j] = 0;
  }
  return out;
}

// All products of n/2-element subsets of `primes`.
std::vector<u64> subset_products(const std::vector<u64>& primes, u64 half, u64 U) {
  std::vector<u64> out;
  const u64 n = primes.size();
  std::vector<u64> idx(half);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    u128 prod = 1;
    for (u64 i : idx) prod *= primes[i];
    if (prod > U) throw std::invalid_argument("lower_bound_set: prime products exceed U");
    out.push_back(static_cast<u64>(prod));
    // next combination
    i64 i = static_cast<i64>(half) - 1;
    while (i >= 0 && idx[i] == n - half + static_cast<u64>(i)) --i;
    if (i < 0) break;
    ++idx[i];
    for (u64 j = static_cast<u64>(i) + 1; j < half; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<u64> core_set(const std::vector<u64>& prods, u64 S, u64 U) {
  std::vector<u64> out;
  for (u64 s = 1; s <= S; ++s)
    for (u64 p : prods) {
      u128 v = static_cast<u128>(s) * p;
      if (v > U) throw std::invalid_argument("lower_bound_set: keys exceed U");
      out.push_back(static_cast<u64>(v));
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

LowerBoundSet lower_bound_set(u64 k, u64 U, Rng& rng) {
  (void)rng;  // the construction is deterministic
  if (k < 2 || U < 4) throw std::invalid_argument("lower_bound_set: need k >= 2 and U >= 4");
  const double logU = std::log2(static_cast<double>(U));
  const double logk = std::log2(static_cast<double>(k));
  const double eps = logU / logk - 1.0;
  if (!(eps > 0)) throw std::invalid_argument("lower_bound_set: need U >= k^(1+eps) for some eps > 0");
  LowerBoundSet r;
  r.epsilon = eps;
  for (double C = 2;; C += 1) {
    double nn = std::min(eps * logU / ((1 + eps) * C * std::log2(logU)), logk);
    u64 n = static_cast<u64>(std::floor(nn));
    n -= n % 2;
    n = std::max<u64>(n, 2);
    const double nlogn = n * std::log2(static_cast<double>(n));
    auto ps = primes_in(static_cast<u64>(std::ceil(nlogn)), static_cast<u64>(std::floor(C * nlogn)));
    if (ps.size() >= n) {
      ps.resize(n);
      r.primes = ps;
      r.n = n;
      r.C = C;
      break;
    }
    if (C > 1000) throw std::runtime_error("lower_bound_set: prime search failed");
  }
  auto prods = subset_products(r.primes, r.n / 2, U);
  // Largest S in [1, k] with |X'(S)| <= k (|X'| is nondecreasing in S).
  u64 lo = 1, hi = k;
  if (core_set(prods, 1, U).size() > k) throw std::invalid_argument("lower_bound_set: k too small for n");
  while (lo < hi) {
    u64 mid = lo + (hi - lo + 1) / 2;
    if (core_set(prods, mid, U).size() <= k) lo = mid;
    else hi = mid - 1;
  }
  r.S = lo;
  auto core = core_set(prods, lo, U);
  r.core = core.size();
  if (2 * r.core < k) throw std::invalid_argument("lower_bound_set: no S gives k/2 <= |X'| <= k");
  // Pad with the smallest positive integers not already present.
  std::vector<u64> keys = core;
  u64 cand = 1;
  std::size_t ci = 0;
  while (keys.size() < k) {
    while (ci < core.size() && core[ci] < cand) ++ci;
    if (ci < core.size() && core[ci] == cand) {
      ++cand;
      continue;
    }
    if (cand > U) throw std::invalid_argument("lower_bound_set: cannot pad within [1, U]");
    keys.push_back(cand++);
  }
  std::sort(keys.begin(), keys.end());
  r.keys = std::move(keys);
  return r;
}

ConcentrationStats concentration_experiment(const std::vector<u64>& xs, u64 U, u128 p, u64 m, u64 x,
                                            u64 a, u64 b, u64 trials, Rng& rng) {
  if (xs.empty()) throw std::invalid_argument("concentration_experiment: X is empty");
  if (p <= 4 * static_cast<u128>(U) * U) throw std::invalid_argument("concentration_experiment: need p > 4U^2");
  if (m == 0 || m > U) throw std::invalid_argument("concentration_experiment: need 1 <= m <= U");
  if (a >= m || b >= m) throw std::invalid_argument("concentration_experiment: buckets must lie in [0, m)");
  if (std::find(xs.begin(), xs.end(), x) != xs.end())
    throw std::invalid_argument("concentration_experiment: x must not belong to X");
  for (u64 y : xs)
    if (y >= U) throw std::invalid_argument("concentration_experiment: X must lie in [0, U)");

  std::vector<u64> seeds(trials);
  for (auto& s : seeds) s = rng();
  std::vector<u64> F(trials, 0);
  const u128 residues = (p - 1 - a) / m + 1;  // values v < p with v = a (mod m)
  const i64 nt = static_cast<i64>(trials);
#pragma omp parallel for schedule(static)
  for (i64 t = 0; t < nt; ++t) {
    Rng r(seeds[t]);
    LinearHash h;
    h.p = p;
    h.m = m;
    h.sigma = rand_range128(r, 0, p - 1);
    u128 v = a + m * rand_range128(r, 0, residues - 1);  // pi(x), conditioned on h(x) = a
    u128 sx = LinearHash{p, m, h.sigma, 0, nullptr}.pi(x);
    h.tau = v >= sx ? v - sx : v + p - sx;
    u64 f = 0;
    for (u64 y : xs) f += h(y) == b;
    F[t] = f;
  }
  ConcentrationStats st;
  st.trials = trials;
  const double k = static_cast<double>(xs.size());
  long double s1 = 0, s2 = 0;
  for (u64 f : F) {
    s1 += f;
    s2 += static_cast<long double>(f) * f;
  }
  st.mean_F = static_cast<double>(s1 / trials);
  st.cond_prob = static_cast<double>(s2 / trials / (k * k));
  const double md = static_cast<double>(m);
  st.fitted_c = (st.cond_prob - 1.0 / (md * md)) * md * k * k / (static_cast<double>(U) * std::log2(static_cast<double>(U)));
  for (std::size_t l = 0; l < st.lambdas.size(); ++l) {
    const double thr = st.lambdas[l] * std::sqrt(st.mean_F);
    u64 c = 0;
    for (u64 f : F) c += std::fabs(static_cast<double>(f) - st.mean_F) >= thr;
    st.tail_mass[l] = static_cast<double>(c) / static_cast<double>(trials);
  }
  return st;
}

}  // namespace sparseconv
