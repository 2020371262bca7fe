#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/miller_rabin.hpp>

#include "doctest.h"
#include "sparseconv/numeric.hpp"

using namespace sparseconv;
using boost::multiprecision::cpp_int;

namespace {
cpp_int big(u128 v) {
  cpp_int r = static_cast<u64>(v >> 64);
  r <<= 64;
  r += static_cast<u64>(v);
  return r;
}
u128 from_big(const cpp_int& v) {
  u64 lo = static_cast<u64>(v & cpp_int(~0ULL));
  u64 hi = static_cast<u64>(v >> 64);
  return (static_cast<u128>(hi) << 64) | lo;
}
}  // namespace

TEST_CASE("u128 string round trip") {
  u128 v = (static_cast<u128>(123456789ULL) << 64) | 987654321ULL;
  CHECK(parse_u128(to_string(v)) == v);
  CHECK(to_string(0) == "0");
  CHECK(bit_length(0) == 0);
  CHECK(bit_length(static_cast<u128>(1) << 100) == 101);
}

TEST_CASE("primality agrees with an independent Miller-Rabin") {
  Rng rng(7);
  boost::random::mt19937 brng(11);
  for (int i = 0; i < 3000; ++i) {
    u128 n = rand_range128(rng, 2, static_cast<u128>(1) << (i % 2 ? 40 : 100));
    bool ref = boost::multiprecision::miller_rabin_test(big(n), 40, brng);
    CHECK(is_prime(n) == ref);
  }
  // Carmichael numbers and strong pseudoprimes to small bases.
  for (u64 c : {561ULL, 1105ULL, 3215031751ULL, 3825123056546413051ULL}) CHECK_FALSE(is_prime(c));
  CHECK(is_prime(4611685989973229569ULL));
}

TEST_CASE("find_prime returns primes in range") {
  Rng rng(3);
  for (int bits : {10, 40, 62, 90, 120}) {
    u128 lo = static_cast<u128>(1) << (bits - 1), hi = static_cast<u128>(1) << bits;
    u128 p = find_prime(lo, hi, rng);
    CHECK(p >= lo);
    CHECK(p <= hi);
    CHECK(is_prime(p));
  }
  u64 q = find_ntt_prime(1ULL << 61, 1ULL << 62, 24, rng);
  CHECK(is_prime(q));
  CHECK(((q - 1) & ((1ULL << 24) - 1)) == 0);
  CHECK_THROWS(find_prime(24, 28, rng));
}

TEST_CASE("field arithmetic matches big-integer oracle") {
  Rng rng(5);
  std::vector<u128> moduli = {1000003, 4611685989973229569ULL, (1ULL << 63) + 29};
  moduli.push_back(find_prime(static_cast<u128>(1) << 100, static_cast<u128>(1) << 101, rng));
  moduli.push_back(find_prime(static_cast<u128>(1) << 124, (static_cast<u128>(1) << 125) - 1, rng));
  for (u128 q : moduli) {
    FieldCtx f(q);
    cpp_int Q = big(q);
    for (int i = 0; i < 300; ++i) {
      u128 a = rand_range128(rng, 0, q - 1), b = rand_range128(rng, 0, q - 1);
      CHECK(f.mul(a, b) == from_big((big(a) * big(b)) % Q));
      CHECK(f.add(a, b) == from_big((big(a) + big(b)) % Q));
      CHECK(f.sub(a, b) == from_big((big(a) + Q - big(b)) % Q));
      u128 e = rand_range128(rng, 0, q);
      CHECK(f.pow(a, e) == from_big(boost::multiprecision::powm(big(a), big(e), Q)));
      if (a != 0) CHECK(f.mul(a, f.inv(a)) == 1);
    }
  }
}

TEST_CASE("bulk_pow and bulk_inverse") {
  Rng rng(9);
  FieldCtx f(find_prime(static_cast<u128>(1) << 80, static_cast<u128>(1) << 81, rng));
  u128 x = rand_unit(f, rng);
  std::vector<u128> exps;
  for (int i = 0; i < 500; ++i) exps.push_back(rand_range128(rng, 0, static_cast<u128>(1) << 60));
  auto pw = bulk_pow(x, exps, f);
  for (size_t i = 0; i < exps.size(); ++i) CHECK(pw[i] == f.pow(x, exps[i]));

  std::vector<u128> vals;
  for (int i = 0; i < 500; ++i) vals.push_back(rand_unit(f, rng));
  op_counters().inversions = 0;
  auto inv = bulk_inverse(vals, f);
  CHECK(op_counters().inversions == 1);
  for (size_t i = 0; i < vals.size(); ++i) CHECK(f.mul(vals[i], inv[i]) == 1);
  vals[17] = 0;
  CHECK_THROWS_AS(bulk_inverse(vals, f), std::invalid_argument);

  FieldCtx g(4611685989973229569ULL);
  std::vector<u64> e64 = {0, 1, 2, 1000, 1ULL << 59};
  auto p64 = bulk_pow64(3, e64, g);
  for (size_t i = 0; i < e64.size(); ++i) CHECK(p64[i] == static_cast<u64>(g.pow(3, e64[i])));
}
