#include <set>

#include "doctest.h"
#include "sparseconv/vandermonde.hpp"

using namespace sparseconv;

namespace {
std::vector<u64> distinct_points(Rng& rng, std::size_t n, u64 q) {
  std::set<u64> s;
  std::vector<u64> a;
  while (a.size() < n) {
    u64 x = rand_range(rng, 0, q - 1);
    if (s.insert(x).second) a.push_back(x);
  }
  return a;
}
std::vector<u64> random_vec(Rng& rng, std::size_t n, u64 q) {
  std::vector<u64> v(n);
  for (auto& x : v) x = rand_range(rng, 0, q - 1);
  return v;
}
// Explicit matrix oracle: (V x)_t = sum_i a_i^t x_i.
std::vector<u64> explicit_v(const std::vector<u64>& a, const std::vector<u64>& x, const FieldCtx& f) {
  std::vector<u64> out(a.size(), 0);
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a.size(); ++i)
      out[t] = static_cast<u64>(f.add(out[t], f.mul(f.pow(a[i], t), x[i])));
  return out;
}
std::vector<u64> horner_all(const std::vector<u64>& a, const std::vector<u64>& x, const FieldCtx& f) {
  std::vector<u64> out;
  for (u64 p : a) {
    u128 acc = 0;
    for (std::size_t i = x.size(); i-- > 0;) acc = f.add(f.mul(acc, p), x[i]);
    out.push_back(static_cast<u64>(acc));
  }
  return out;
}
}  // namespace

TEST_CASE("hand examples") {
  FieldCtx f(101);
  CHECK(build_eval_circuit({5}, f).eval({9}, f) == std::vector<u64>{9});
  CHECK(build_eval_circuit({1, 2}, f).eval({3, 4}, f) == std::vector<u64>{7, 11});
  CHECK(build_interp_circuit({1, 2}, f).eval({7, 11}, f) == std::vector<u64>{3, 4});
  CHECK(build_interp_circuit({1, 2, 3}, f).eval({6, 6, 6}, f) == std::vector<u64>{6, 0, 0});
  for (auto m : {VandermondeMethod::Direct, VandermondeMethod::Circuit}) {
    CHECK(vandermonde_mul({1, 2}, {3, 4}, f, m) == std::vector<u64>{7, 11});
    CHECK(vandermonde_mul({7}, {9}, f, m) == std::vector<u64>{9});
    CHECK(vandermonde_solve({1, 2}, {7, 11}, f, m) == std::vector<u64>{3, 4});
  }
  CHECK_THROWS_AS(build_eval_circuit({3, 3}, f), std::invalid_argument);
  CHECK_THROWS_AS(vandermonde_solve({3, 3}, {1, 1}, f), std::invalid_argument);
}

TEST_CASE("transposition of small explicit maps") {
  FieldCtx f(101);
  SlpBuilder id(f, 3);
  Slp ident = id.finish({id.input(0), id.input(1), id.input(2)});
  CHECK(transpose_slp(ident, f).eval({4, 5, 6}, f) == std::vector<u64>{4, 5, 6});
  // [[1,1],[1,2]] x and its transpose (symmetric).
  SlpBuilder b(f, 2);
  Slp m = b.finish({b.add(b.input(0), b.input(1)), b.add(b.input(0), b.scale(b.input(1), 2))});
  CHECK(transpose_slp(m, f).eval({3, 4}, f) == std::vector<u64>{7, 11});
  // Non-symmetric [[1,2],[0,3]]: transpose is [[1,0],[2,3]].
  SlpBuilder c(f, 2);
  Slp n = c.finish({c.add(c.input(0), c.scale(c.input(1), 2)), c.scale(c.input(1), 3)});
  CHECK(transpose_slp(n, f).eval({3, 4}, f) == std::vector<u64>{3, 18});
  // Nonlinear programs are rejected.
  Slp bad;
  bad.num_inputs = 2;
  bad.gates = {{Slp::Op::Input, 0, 0, 0}, {Slp::Op::Input, 0, 0, 1}, {Slp::Op::Mul, 0, 1, 0}};
  bad.outputs = {2};
  CHECK_THROWS_AS(transpose_slp(bad, f), std::invalid_argument);
  SlpBuilder d(f, 2);
  CHECK_THROWS_AS(d.mul(d.input(0), d.input(1)), std::invalid_argument);
}

TEST_CASE("circuits agree with Horner and explicit matrices") {
  Rng rng(41);
  const u64 q = (1ULL << 61) - 1;
  FieldCtx f(q);
  for (std::size_t n : {1u, 2u, 3u, 5u, 17u, 32u, 33u, 64u}) {
    auto a = distinct_points(rng, n, q);
    auto x = random_vec(rng, n, q);
    auto ev = build_eval_circuit(a, f);
    CHECK(ev.eval(x, f) == horner_all(a, x, f));
    auto tr = transpose_slp(ev, f);
    CHECK(tr.eval(x, f) == explicit_v(a, x, f));
    CHECK(tr.size() <= 4 * (ev.size() + n));
    auto ip = build_interp_circuit(a, f);
    CHECK(ip.eval(ev.eval(x, f), f) == x);
  }
}

TEST_CASE("solve inverts mul; one inversion per solve and per batch") {
  Rng rng(42);
  const u64 q = 4611685989973229569ULL;
  FieldCtx f(q);
  for (std::size_t n : {1u, 7u, 100u, 300u, 512u}) {
    auto a = distinct_points(rng, n, q);
    auto x = random_vec(rng, n, q);
    for (auto m : {VandermondeMethod::Direct, VandermondeMethod::Circuit}) {
      auto y = vandermonde_mul(a, x, f, m);
      op_counters().inversions = 0;
      CHECK(vandermonde_solve(a, y, f, m) == x);
      CHECK(op_counters().inversions <= 1);
    }
  }
  VandermondeBatch batch(f);
  std::vector<std::vector<u64>> xs;
  std::vector<std::size_t> hs;
  for (int s = 0; s < 20; ++s) {
    auto a = distinct_points(rng, 1 + s, q);
    xs.push_back(random_vec(rng, 1 + s, q));
    hs.push_back(batch.add(a, vandermonde_mul(a, xs.back(), f)));
  }
  op_counters().inversions = 0;
  batch.solve();
  CHECK(op_counters().inversions == 1);
  for (int s = 0; s < 20; ++s) CHECK(batch.solution(hs[s]) == xs[s]);
}

TEST_CASE("rectangular power sums") {
  FieldCtx f(1000003);
  auto y = vandermonde_mul({2, 3}, {1, 1}, f, VandermondeMethod::Direct, 4);
  CHECK(y == std::vector<u64>{2, 5, 13, 35});
}
