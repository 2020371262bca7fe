#include "sparseconv/verify.hpp"

#include <algorithm>

namespace sparseconv {

namespace {

const u128 kTwo61 = static_cast<u128>(1) << 61;
const u128 kWideLo = static_cast<u128>(1) << 120;

// A prime exceeding `bound` when that fits the field width; otherwise a random
// prime of 121 bits, for which a nonzero difference polynomial with
// coefficients below 2^190 vanishes identically with negligible probability.
FieldCtx verification_field(u128 bound, Rng& rng) {
  u128 n = std::max(kTwo61, bound + 1);
  if (bound >= kWideLo) return FieldCtx(find_prime(kWideLo, 2 * kWideLo, rng));
  return FieldCtx(find_prime(n, 2 * n, rng));
}

u128 horner(const DenseVec& v, u128 x, const FieldCtx& f) {
  u128 acc = 0;
  for (std::size_t i = v.size(); i-- > 0;) acc = f.add(f.mul(acc, x), f.reduce(v[i]));
  return acc;
}

u128 sat_mul(u128 a, u128 b) {
  if (a != 0 && b > (~static_cast<u128>(0)) / a) return ~static_cast<u128>(0);
  return a * b;
}

u128 sparse_eval(const SparseVec& v, u128 x, const FieldCtx& f) {
  if (v.empty()) return 0;
  std::vector<u128> exps;
  exps.reserve(v.nnz());
  for (const auto& e : v.entries) exps.push_back(e.index);
  auto pw = bulk_pow(x, exps, f);
  u128 acc = 0;
  for (std::size_t i = 0; i < v.nnz(); ++i) acc = f.add(acc, f.mul(pw[i], f.reduce(v.entries[i].value)));
  return acc;
}

}  // namespace

bool verify_dense(const DenseVec& a, const DenseVec& b, const DenseVec& c, Rng& rng) {
  if (a.empty() || b.empty()) return std::all_of(c.begin(), c.end(), [](u64 v) { return v == 0; });
  if (c.size() != a.size() + b.size() - 1) return false;
  u64 ma = *std::max_element(a.begin(), a.end());
  u64 mb = *std::max_element(b.begin(), b.end());
  u64 mc = *std::max_element(c.begin(), c.end());
  u128 bound = std::max<u128>(sat_mul(sat_mul(ma, mb), std::min(a.size(), b.size())), mc);
  FieldCtx f = verification_field(bound, rng);
  u128 x = rand_range128(rng, 0, f.q() - 1);
  return f.mul(horner(a, x, f), horner(b, x, f)) == horner(c, x, f);
}

bool verify_sparse(const SparseVec& a, const SparseVec& b, const SparseVec& c, Rng& rng) {
  if (a.empty() || b.empty()) return c.empty();
  const u128 k = std::max({a.nnz(), b.nnz(), c.nnz()});
  const u128 prod = sat_mul(a.max_value(), b.max_value());
  if (c.max_value() > sat_mul(k, prod)) return false;
  const u128 universe = std::max({a.length, b.length, c.length});
  u128 bound = sat_mul(k, universe);
  u128 extra = sat_mul(k, prod);
  bound = (bound > ~static_cast<u128>(0) - extra) ? ~static_cast<u128>(0) : bound + extra;
  FieldCtx f = verification_field(bound, rng);
  u128 x = rand_range128(rng, 0, f.q() - 1);
  return f.mul(sparse_eval(a, x, f), sparse_eval(b, x, f)) == sparse_eval(c, x, f);
}

bool verify_dense_modq(const DenseVec& a, const DenseVec& b, const DenseVec& c, const FieldCtx& ctx,
                       Rng& rng, int points) {
  if (a.empty() || b.empty()) return std::all_of(c.begin(), c.end(), [](u64 v) { return v == 0; });
  if (c.size() != a.size() + b.size() - 1) return false;
  for (int t = 0; t < points; ++t) {
    u128 x = rand_range128(rng, 0, ctx.q() - 1);
    if (ctx.mul(horner(a, x, ctx), horner(b, x, ctx)) != horner(c, x, ctx)) return false;
  }
  return true;
}

}  // namespace sparseconv
