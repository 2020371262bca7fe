#include <map>

#include "doctest.h"
#include "sparseconv/dense_conv.hpp"
#include "sparseconv/verify.hpp"

using namespace sparseconv;

namespace {
SparseVec random_sparse(Rng& rng, u64 len, u64 nnz, u64 maxv) {
  std::map<u64, u64> d;
  for (u64 i = 0; i < nnz; ++i) d[rand_range(rng, 0, len - 1)] = rand_range(rng, 1, maxv);
  SparseVec s(len);
  for (auto& [i, v] : d) s.entries.push_back({i, v});
  return s;
}
}  // namespace

TEST_CASE("dense verification") {
  Rng rng(21);
  CHECK(verify_dense({1, 2}, {3, 4}, {3, 10, 8}, rng));
  CHECK_FALSE(verify_dense({1, 2}, {3, 4}, {3, 10, 9}, rng));
  CHECK_FALSE(verify_dense({1, 2}, {3, 4}, {3, 10}, rng));
  int wrong_accepts = 0;
  for (int t = 0; t < 1000; ++t) {
    DenseVec a(rand_range(rng, 1, 200)), b(rand_range(rng, 1, 200));
    for (auto& x : a) x = rand_range(rng, 0, 1ULL << 28);
    for (auto& x : b) x = rand_range(rng, 0, 1ULL << 28);
    DenseVec c = dense_conv(a, b);
    CHECK(verify_dense(a, b, c, rng));
    c[rand_range(rng, 0, c.size() - 1)] += 1;
    wrong_accepts += verify_dense(a, b, c, rng);
  }
  CHECK(wrong_accepts <= 1);
}

TEST_CASE("sparse verification") {
  Rng rng(22);
  int wrong_accepts = 0;
  for (int t = 0; t < 300; ++t) {
    auto a = random_sparse(rng, 1000000, 50, 1000), b = random_sparse(rng, 1000000, 50, 1000);
    auto c = brute_conv(a, b);
    CHECK(verify_sparse(a, b, c, rng));
    auto bad = c;
    auto& e = bad.entries[rand_range(rng, 0, bad.nnz() - 1)];
    if (bad.at(e.index + 1) == 0) e.index += 1;
    else e.value += 1;
    wrong_accepts += verify_sparse(a, b, bad, rng);
  }
  CHECK(wrong_accepts == 0);
  // The infinity-norm pre-check.
  SparseVec a(4, {{0, 2}}), b(4, {{0, 3}}), c(7, {{0, 7}});
  CHECK_FALSE(verify_sparse(a, b, c, rng));
  CHECK(verify_sparse(SparseVec(4), b, SparseVec(7), rng));
  // Huge coefficients take the wide-field path.
  SparseVec h(1ULL << 40, {{5, kMaxValue}, {1ULL << 39, kMaxValue}});
  auto hc = brute_conv(SparseVec(1ULL << 40, {{3, 1}}), h);
  CHECK(verify_sparse(SparseVec(1ULL << 40, {{3, 1}}), h, hc, rng));
}

TEST_CASE("mod-q verification") {
  Rng rng(23);
  FieldCtx f(1000003);
  DenseVec a = {5, 7, 1000002}, b = {3, 999999};
  DenseVec c = conv_modq(a, b, f);
  CHECK(verify_dense_modq(a, b, c, f, rng, 2));
  c[1] = (c[1] + 1) % 1000003;
  CHECK_FALSE(verify_dense_modq(a, b, c, f, rng, 2));
}
