#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "sparseconv/dense_conv.hpp"

using namespace sparseconv;
using boost::multiprecision::cpp_int;

namespace {
DenseVec random_vec(Rng& rng, u64 len, u64 maxv) {
  DenseVec v(len);
  for (auto& x : v) x = rand_range(rng, 0, maxv);
  return v;
}
std::vector<cpp_int> school(const DenseVec& a, const DenseVec& b) {
  std::vector<cpp_int> c(a.size() + b.size() - 1);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) c[i + j] += cpp_int(a[i]) * b[j];
  return c;
}
cpp_int big(const U192& x) {
  cpp_int r = x.w[2];
  r = (r << 64) + x.w[1];
  r = (r << 64) + x.w[0];
  return r;
}
}  // namespace

TEST_CASE("dense_conv_wide matches schoolbook for full-width values") {
  Rng rng(1);
  for (u64 maxv : {u64{1}, u64{255}, u64{1} << 40, kMaxValue}) {
    for (u64 la : {u64{1}, u64{2}, u64{7}, u64{64}, u64{300}}) {
      auto a = random_vec(rng, la, maxv), b = random_vec(rng, 1 + la / 2, maxv);
      auto c = dense_conv_wide(a, b);
      auto ref = school(a, b);
      REQUIRE(c.size() == ref.size());
      for (size_t i = 0; i < c.size(); ++i) CHECK(big(c[i]) == ref[i]);
      CHECK(c[0].str() == ref[0].str());
    }
  }
}

TEST_CASE("dense_conv, serial and brute agree; overflow is reported") {
  Rng rng(2);
  auto a = random_vec(rng, 5000, 1000), b = random_vec(rng, 3000, 1000);
  auto c = dense_conv(a, b);
  CHECK(c == dense_conv_serial(a, b));
  auto ref = school(DenseVec(a.begin(), a.begin() + 50), DenseVec(b.begin(), b.begin() + 50));
  for (size_t i = 0; i < 50; ++i) CHECK(cpp_int(c[i]) == ref[i]);
  DenseVec big_a = {kMaxValue, kMaxValue};
  CHECK_THROWS_AS(dense_conv(big_a, big_a), SizingError);
  CHECK(dense_conv({}, {1}).empty());
}

TEST_CASE("cyclic convolutions") {
  Rng rng(3);
  const u64 m = 37;
  auto a = random_vec(rng, m, 1ULL << 20), b = random_vec(rng, m, 1ULL << 20);
  DenseVec ref(m, 0);
  for (u64 i = 0; i < m; ++i)
    for (u64 j = 0; j < m; ++j) ref[(i + j) % m] += a[i] * b[j];
  CHECK(cyclic_conv(a, b, m) == ref);
  for (u64 q : {1000003ULL, 4611685989973229569ULL, (1ULL << 62) + 135ULL, 18446744073709551557ULL}) {
    FieldCtx f(q);
    auto aq = random_vec(rng, m, q - 1), bq = random_vec(rng, m, q - 1);
    DenseVec refq(m, 0);
    for (u64 i = 0; i < m; ++i)
      for (u64 j = 0; j < m; ++j) refq[(i + j) % m] = static_cast<u64>(f.add(refq[(i + j) % m], f.mul(aq[i], bq[j])));
    CHECK(cyclic_conv_modq(aq, bq, m, f) == refq);
  }
}

TEST_CASE("ModqConvolver single-lane and three-lane paths agree") {
  Rng rng(4);
  u64 q = find_ntt_prime(1ULL << 61, 1ULL << 62, 24, rng);
  FieldCtx f(q);
  ModqConvolver cv(f);
  CHECK(cv.single_lane(12));
  auto a = random_vec(rng, 1000, q - 1), b = random_vec(rng, 900, q - 1);
  auto direct = conv_modq(a, b, f);
  // Oracle: big-integer schoolbook reduced mod q on a prefix.
  auto ref = school(DenseVec(a.begin(), a.begin() + 40), DenseVec(b.begin(), b.begin() + 40));
  for (size_t i = 0; i < 40; ++i) CHECK(cpp_int(direct[i]) == ref[i] % q);
  // Accumulating two products in the spectrum.
  int log_n = ceil_log2(a.size() + b.size() - 1);
  auto fa = cv.forward(a.data(), a.size(), log_n), fb = cv.forward(b.data(), b.size(), log_n);
  auto acc = cv.zero(log_n);
  cv.mul_acc(acc, fa, fb);
  cv.mul_acc(acc, fa, fb);
  auto twice = cv.inverse(acc);
  for (size_t i = 0; i < direct.size(); ++i) CHECK(twice[i] == static_cast<u64>(f.add(direct[i], direct[i])));
}

TEST_CASE("faulty box and the verify-and-repeat loop") {
  Rng rng(5);
  auto a = random_vec(rng, 100, 50), b = random_vec(rng, 100, 50);
  auto exact = dense_conv(a, b);
  int faults = 0;
  for (int i = 0; i < 3000; ++i) faults += faulty_dense_conv(a, b, 1.0 / 3.0, rng) != exact;
  CHECK(faults > 850);
  CHECK(faults < 1150);
  u64 calls = 0;
  ConvBox box = [&](const DenseVec& x, const DenseVec& y) { return faulty_dense_conv(x, y, 1.0 / 3.0, rng); };
  ConvVerifier ver = [&](const DenseVec&, const DenseVec&, const DenseVec& c) { return c == exact; };
  CHECK(reliable_conv(a, b, box, ver, &calls) == exact);
  CHECK(calls >= 1);
  ConvVerifier never = [](const DenseVec&, const DenseVec&, const DenseVec&) { return false; };
  CHECK_THROWS_AS(reliable_conv(a, b, box, never), std::runtime_error);
  CHECK_THROWS_AS(faulty_dense_conv(a, b, 0.5, rng), std::invalid_argument);
}
