#include <set>

#include "doctest.h"
#include "sparseconv/pipeline.hpp"
#include "sparseconv/vandermonde.hpp"

using namespace sparseconv;

namespace {

SparseVec random_sparse(u64 len, u64 nnz, u64 maxv, Rng& rng) {
  std::set<u64> idx;
  while (idx.size() < nnz) idx.insert(rand_range(rng, 0, len - 1));
  std::vector<Entry> e;
  for (u64 i : idx) e.push_back({i, rand_range(rng, 1, maxv)});
  return SparseVec(len, std::move(e));
}

std::size_t hamming(const SparseVec& x, const SparseVec& y) {
  std::size_t d = 0, i = 0, j = 0;
  while (i < x.nnz() || j < y.nnz()) {
    if (j == y.nnz() || (i < x.nnz() && x.entries[i].index < y.entries[j].index)) {
      ++d, ++i;
    } else if (i == x.nnz() || y.entries[j].index < x.entries[i].index) {
      ++d, ++j;
    } else {
      d += x.entries[i].value != y.entries[j].value;
      ++i, ++j;
    }
  }
  return d;
}

const FieldCtx& test_field() {
  static Rng rng(5);
  static FieldCtx f(find_ntt_prime(static_cast<u64>(1) << 61, static_cast<u64>(1) << 62, 24, rng));
  return f;
}

}  // namespace

TEST_CASE("fold computes omega-weighted residue classes") {
  const FieldCtx& Q = test_field();
  Rng rng(1);
  for (u64 m : {1u, 4u, 16u}) {
    SparseVec a = random_sparse(300, 40, 1000, rng);
    u128 omega = rand_unit(Q, rng);
    const u64 T = 5;
    auto f = fold(a, omega, m, T, Q);
    REQUIRE(f.size() == T);
    // Oracle: direct definition sum_{x = r mod m} omega^{t x} a_x.
    for (u64 t = 0; t < T; ++t)
      for (u64 r = 0; r < m; ++r) {
        u128 s = 0;
        for (const auto& e : a.entries)
          if (e.index % m == r) s = Q.add(s, Q.mul(Q.pow(omega, static_cast<u128>(t) * e.index), e.value));
        CHECK(f[t][r] == s);
      }
  }
}

TEST_CASE("unfold inverts fold on classes of size at most T") {
  const FieldCtx& Q = test_field();
  Rng rng(2);
  const u64 m = 8, T = 6;
  SparseVec a = random_sparse(200, 30, 1 << 20, rng);
  u128 omega = rand_unit(Q, rng);
  auto f = fold(a, omega, m, T, Q);
  // X = supp(A) plus decoys; classes that stay within T are recovered exactly.
  std::vector<u64> xs = a.support();
  for (int i = 0; i < 10; ++i) xs.push_back(rand_range(rng, 0, 199));
  auto r = unfold(f, omega, m, xs, 200, Q);
  std::vector<u64> cls(m, 0);
  std::set<u64> xset(xs.begin(), xs.end());
  for (u64 x : xset) ++cls[x % m];
  for (const auto& e : a.entries)
    if (cls[e.index % m] <= T) CHECK(r.at(e.index) == e.value);
  for (const auto& e : r.entries) CHECK(cls[e.index % m] <= T);
  // Omega of order 1 makes the points collide.
  CHECK_THROWS_AS(fold(a, 1, m, T, Q), OmegaOrderError);
}

TEST_CASE("fold then cyclic convolution then unfold recovers the product") {
  const FieldCtx& Q = test_field();
  Rng rng(3);
  SparseVec a = random_sparse(64, 10, 50, rng), b = random_sparse(64, 10, 50, rng);
  SparseVec c = brute_conv(a, b);
  const u64 m = 4, T = 2 * c.nnz();  // every class fits
  u128 omega = rand_unit(Q, rng);
  auto fa = fold(a, omega, m, T, Q), fb = fold(b, omega, m, T, Q);
  std::vector<DenseVec> fc(T, DenseVec(m, 0));
  // Cyclic products over Z_Q by the definition.
  for (u64 t = 0; t < T; ++t)
    for (u64 r = 0; r < m; ++r) {
      u128 s = 0;
      for (u64 i = 0; i < m; ++i) s = Q.add(s, Q.mul(fa[t][i], fb[t][(r + m - i) % m]));
      fc[t][r] = static_cast<u64>(s);
    }
  auto r = unfold(fc, omega, m, c.support(), c.length, Q);
  CHECK(r == c);
}

TEST_CASE("indyk_sumset and approx_supp") {
  Rng rng(4);
  std::vector<u64> y, z;
  for (int i = 0; i < 60; ++i) y.push_back(rand_range(rng, 0, 5000)), z.push_back(rand_range(rng, 0, 5000));
  std::set<u64> truth;
  for (u64 u : y)
    for (u64 v : z) truth.insert(u + v);
  auto ex = indyk_sumset(y, z, rng);
  CHECK(std::vector<u64>(truth.begin(), truth.end()) == ex);
  auto sub = indyk_sumset(y, z, rng, SumsetMode::Subsampled);
  for (u64 s : sub) CHECK(truth.count(s) == 1);
  CHECK(sub.size() * 100 >= truth.size() * 95);

  const u64 k = truth.size();
  int good = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto x = approx_supp(y, z, 5001, k, 1.0 / 64, 1.0 / 64, rng);
    std::size_t missed = 0;
    std::set<u64> xs(x.begin(), x.end());
    for (u64 s : truth) missed += xs.count(s) == 0;
    CHECK(x.size() <= 4 * k);
    good += missed <= k / 64;
  }
  CHECK(good >= 9);
  CHECK(approx_supp({}, z, 5001, k, 0.1, 0.1, rng).empty());
}

TEST_CASE("set_query with the exact support") {
  Rng rng(6);
  int close = 0;
  for (int trial = 0; trial < 6; ++trial) {
    SparseVec a = random_sparse(1 << 12, 40, 1000, rng), b = random_sparse(1 << 12, 40, 1000, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig cfg;
    cfg.seed = 100 + trial;
    PipelineStats st;
    SparseVec r = set_query(a, b, c.nnz(), c.support(), cfg, &st);
    CHECK(st.hash_loop_iterations >= 1);
    close += hamming(r, c) <= c.nnz() / 64;
  }
  CHECK(close >= 5);
}

TEST_CASE("tiny and small approximate convolutions") {
  Rng rng(7);
  int tiny_ok = 0, small_ok = 0;
  for (int trial = 0; trial < 6; ++trial) {
    SparseVec a = random_sparse(1 << 11, 30, 100, rng), b = random_sparse(1 << 11, 30, 100, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig cfg;
    cfg.seed = 200 + trial;
    tiny_ok += hamming(tiny_approx_conv(a, b, c.nnz(), cfg), c) <= c.nnz() / 64;
    small_ok += hamming(small_approx_conv(a, b, c.nnz(), cfg), c) <= c.nnz() / 64;
  }
  CHECK(tiny_ok >= 5);
  CHECK(small_ok >= 5);
}

TEST_CASE("small_sparse_conv is exact and reports its levels") {
  Rng rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    SparseVec a = random_sparse(1 << 14, 60, 1 << 20, rng), b = random_sparse(1 << 14, 60, 1 << 20, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig cfg;
    cfg.seed = 300 + trial;
    std::vector<int> levels;
    cfg.level_hook = [&](int l, const SparseVec&) { levels.push_back(l); };
    PipelineStats st;
    SparseVec r = small_sparse_conv(a, b, c.nnz(), cfg, &st);
    CHECK(st.verified);
    CHECK(r == c);
    REQUIRE(!levels.empty());
    CHECK(levels.front() == 0);
  }
}

TEST_CASE("estimate_and_conv without knowing k") {
  Rng rng(9);
  SparseVec a = random_sparse(1 << 13, 50, 1000, rng), b = random_sparse(1 << 13, 50, 1000, rng);
  PipelineConfig cfg;
  PipelineStats st;
  SparseVec r = estimate_and_conv(a, b, cfg, &st);
  CHECK(r == brute_conv(a, b));
  CHECK(st.verified);
  CHECK(st.estimate_steps >= 1);
  CHECK(st.brute_fallbacks == 0);
}

TEST_CASE("sparse_conv on large universes and edge cases") {
  Rng rng(10);
  for (u64 len : {static_cast<u64>(1) << 20, static_cast<u64>(1) << 40, kMaxLength}) {
    SparseVec a = random_sparse(len, 40, 1 << 16, rng), b = random_sparse(len, 30, 1 << 16, rng);
    PipelineConfig cfg;
    cfg.seed = len % 1000 + 1;
    PipelineStats st;
    SparseVec r = sparse_conv(a, b, cfg, &st);
    CHECK(st.verified);
    CHECK(st.brute_fallbacks == 0);
    CHECK(r == brute_conv(a, b));
  }
  // Empty and singleton inputs.
  SparseVec e(100), s(100, {{7, 3}});
  CHECK(sparse_conv(e, s, PipelineConfig{}).empty());
  SparseVec r = sparse_conv(s, s, PipelineConfig{});
  CHECK(r == SparseVec(199, {{14, 9}}));
  // Large coefficients force the general-prime path.
  SparseVec big(1000, {{1, static_cast<u64>(1) << 30}, {5, (static_cast<u64>(1) << 30) + 1}});
  CHECK(sparse_conv(big, big, PipelineConfig{}) == brute_conv(big, big));
  PipelineConfig bad;
  bad.delta = 0.5;
  CHECK_THROWS(sparse_conv(s, s, bad));
}

TEST_CASE("sparse_conv with a faulty dense box") {
  Rng rng(11);
  SparseVec a = random_sparse(1 << 30, 40, 1000, rng), b = random_sparse(1 << 30, 40, 1000, rng);
  PipelineConfig cfg;
  cfg.box = DenseBox::Faulty;
  cfg.fail_prob = 1.0 / 3;
  PipelineStats st;
  CHECK(sparse_conv(a, b, cfg, &st) == brute_conv(a, b));
  CHECK(st.dense_calls > 0);
}

TEST_CASE("default delta") {
  CHECK(default_delta(2) == doctest::Approx(1.0 / 64));
  CHECK(default_delta(1ULL << 49) == doctest::Approx(1.0 / 128));
  CHECK(default_delta(1ULL << 50) == doctest::Approx(1.0 / 256));
}

TEST_CASE("unfold error bound with planted missing support and overfull classes") {
  const FieldCtx& Q = test_field();
  Rng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const u64 len = 1 << 12, k = rand_range(rng, 8, 200);
    SparseVec a = random_sparse(len, k, 1 << 30, rng);
    const u64 m = rand_range(rng, 1, 32);
    std::vector<u64> xs = a.support();
    u64 missing = 0;
    // Drop some support elements, then refill X with decoys up to size k.
    for (auto it = xs.begin(); it != xs.end();)
      if (rand_range(rng, 0, 9) == 0) it = xs.erase(it), ++missing;
      else ++it;
    std::set<u64> xset(xs.begin(), xs.end());
    while (xset.size() < k) {
      u64 d = rand_range(rng, 0, len - 1);
      if (a.at(d) == 0) xset.insert(d);
    }
    xs.assign(xset.begin(), xset.end());
    const u64 T = (2 * k + m - 1) / m;
    u128 omega = rand_unit(Q, rng);
    SparseVec r = unfold(fold(a, omega, m, T, Q), omega, m, xs, len, Q);
    u64 errors = 0;
    for (u64 i = 0; i < len; ++i) errors += r.at(i) != a.at(i);
    // Every class with at most T members of X and no missed element is exact;
    // each missed element spoils its own class of at most T members plus itself.
    CHECK(errors <= (T + 1) * missing + flatness(xs, m));
  }
}

TEST_CASE("set_query edge cases and exact recovery from the exact support") {
  PipelineConfig cfg;
  PipelineStats st;
  SparseVec e(64), s(64, {{3, 2}});
  CHECK(set_query(e, s, 1, {3}, cfg, &st).empty());
  CHECK(st.hash_loop_iterations == 0);
  Rng rng(13);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SparseVec a = random_sparse(1 << 10, 12, 1 << 20, rng), b = random_sparse(1 << 10, 12, 1 << 20, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig c2;
    c2.seed = 500 + trial;
    exact += set_query(a, b, c.nnz(), c.support(), c2) == c;
  }
  CHECK(exact >= 18);
}

TEST_CASE("set_query median error on a small instance") {
  // k = 200 nonzeros in a universe of k / gamma^2 with gamma = 1/8.
  Rng rng(14);
  std::vector<std::size_t> errs;
  for (int trial = 0; trial < 40; ++trial) {
    SparseVec a = random_sparse(200 * 64 / 2, 10, 1000, rng), b = random_sparse(200 * 64 / 2, 20, 1000, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig cfg;
    cfg.delta = 1.0 / 8;
    cfg.seed = 600 + trial;
    errs.push_back(hamming(set_query(a, b, 200, c.support(), cfg), c));
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] <= 200 / 8);
}

TEST_CASE("sumset and support approximation examples") {
  Rng rng(15);
  int both = 0;
  for (int i = 0; i < 200; ++i) {
    auto o = indyk_sumset({0, 1}, {2}, rng, SumsetMode::Subsampled);
    for (u64 v : o) CHECK((v == 2 || v == 3));
    both += o.size() == 2;
  }
  CHECK(both >= 190);
  CHECK(indyk_sumset({}, {1, 2}, rng).empty());
  auto x = approx_supp({0}, {0}, 1, 1, 0.1, 0.1, rng);
  CHECK(std::find(x.begin(), x.end(), 0) != x.end());
  // gamma = 1: no levels, the base range {0, ..., 2U - 1} is returned.
  auto base = approx_supp({1, 5}, {2}, 8, 4, 1.0, 0.1, rng);
  CHECK(base.size() == 16);
  // |Y + Z| about 10^3, gamma = 1/16: median misses <= gamma k and |X| <= 4k.
  std::vector<std::size_t> misses;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<u64> y, z;
    for (int i = 0; i < 32; ++i) y.push_back(rand_range(rng, 0, 1 << 16)), z.push_back(rand_range(rng, 0, 1 << 16));
    std::set<u64> truth;
    for (u64 u : y)
      for (u64 v : z) truth.insert(u + v);
    auto xs = approx_supp(y, z, (1 << 16) + 1, truth.size(), 1.0 / 16, 1.0 / 16, rng);
    CHECK(xs.size() <= 4 * truth.size());
    std::set<u64> xset(xs.begin(), xs.end());
    std::size_t miss = 0;
    for (u64 s : truth) miss += xset.count(s) == 0;
    misses.push_back(miss);
  }
  std::nth_element(misses.begin(), misses.begin() + misses.size() / 2, misses.end());
  CHECK(misses[misses.size() / 2] <= 1024 / 16);
}

TEST_CASE("single spikes are recovered exactly") {
  Rng rng(16);
  int tiny = 0, small = 0;
  for (int trial = 0; trial < 40; ++trial) {
    SparseVec a(1 << 12, {{rand_range(rng, 0, 4095), rand_range(rng, 1, 1 << 20)}});
    SparseVec b(1 << 12, {{rand_range(rng, 0, 4095), rand_range(rng, 1, 1 << 20)}});
    PipelineConfig cfg;
    cfg.seed = 700 + trial;
    tiny += tiny_approx_conv(a, b, 1, cfg) == brute_conv(a, b);
    small += small_approx_conv(a, b, 1, cfg) == brute_conv(a, b);
  }
  CHECK(tiny >= 38);
  CHECK(small >= 38);
}

TEST_CASE("hash recovery is exact on isolated indices") {
  const FieldCtx& Q = test_field();
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const u64 U = 1 << 16;
    SparseVec a = random_sparse(U, 30, 1000, rng), b = random_sparse(U, 30, 1000, rng);
    SparseVec c = brute_conv(a, b);
    const u64 m = 4096;
    LinearHash h = lh_sample(find_prime(2 * U, 4 * U, rng), m, rng, true);
    auto hv = [&](const SparseVec& v) { return apply_hash_sparse_mod([&](u64 x) { return h(x); }, v, m, Q); };
    SparseVec ha = hv(a), hb = hv(b), hda = hv(derivative_mod(a, Q)), hdb = hv(derivative_mod(b, Q));
    SparseVec v = fold_sparse_mod_q(brute_conv_mod(ha, hb, Q), m, Q);
    std::vector<Entry> we;
    for (const auto& t : {brute_conv_mod(hda, hb, Q), brute_conv_mod(ha, hdb, Q)})
      we.insert(we.end(), t.entries.begin(), t.entries.end());
    SparseVec w = fold_sparse_mod_q(make_sparse_mod(2 * m - 1, std::move(we), Q), m, Q);
    SparseVec r = hash_recover(v, w, h, c.length, Q);
    auto iso = isolated_indices(c.support(), h);
    CHECK(!iso.empty());
    for (u64 x : iso) CHECK(r.at(x) == c.at(x));
  }
}

TEST_CASE("error correction leaves an exact start untouched and shrinks residuals") {
  Rng rng(18);
  // Residuals per level never increase in the vast majority of runs.
  int monotone = 0, runs = 0;
  for (int trial = 0; trial < 10; ++trial) {
    SparseVec a = random_sparse(1 << 16, 40, 1000, rng), b = random_sparse(1 << 16, 40, 1000, rng);
    SparseVec c = brute_conv(a, b);
    PipelineConfig cfg;
    cfg.seed = 800 + trial;
    std::vector<std::size_t> res;
    cfg.level_hook = [&](int, const SparseVec& cur) { res.push_back(hamming(cur, c)); };
    PipelineStats st;
    SparseVec r = small_sparse_conv(a, b, c.nnz(), cfg, &st);
    CHECK(r == c);
    ++runs;
    monotone += std::is_sorted(res.rbegin(), res.rend());
    // Once the start is exact, every kept draw has an empty residual.
    if (!res.empty() && res.front() == 0)
      for (u64 s : st.level_support) CHECK(s == 0);
  }
  CHECK(monotone * 100 >= runs * 95);
}

TEST_CASE("estimation: first step suffices without collisions, empty inputs take none") {
  // Disjoint sums: A on multiples of 1000, B on [0, 10).
  std::vector<Entry> ea, eb;
  for (u64 i = 0; i < 30; ++i) ea.push_back({1000 * i, i + 1});
  for (u64 i = 0; i < 10; ++i) eb.push_back({i, 2 * i + 1});
  SparseVec a(40000, ea), b(40000, eb);
  PipelineStats st;
  CHECK(estimate_and_conv(a, b, PipelineConfig{}, &st) == brute_conv(a, b));
  CHECK(st.estimate_steps >= 1);
  CHECK(st.brute_fallbacks == 0);
  // Arithmetic progressions collapse: k = |A| + |B| - 1 is below k0.
  std::vector<Entry> ap;
  for (u64 i = 0; i < 200; ++i) ap.push_back({7 * i + 3, 1});
  SparseVec p(5000, ap);
  PipelineStats sp;
  CHECK(estimate_and_conv(p, p, PipelineConfig{}, &sp) == brute_conv(p, p));
  CHECK(sp.estimate_steps == 1);
  PipelineStats se;
  CHECK(estimate_and_conv(SparseVec(10), p, PipelineConfig{}, &se).empty());
  CHECK(se.estimate_steps == 0);
}

TEST_CASE("sparse_conv examples") {
  SparseVec a(2000000000, {{0, 1}, {1000000000, 1}});
  SparseVec c = sparse_conv(a, a, PipelineConfig{});
  CHECK(c == SparseVec(3999999999, {{0, 1}, {1000000000, 2}, {2000000000, 1}}));
  Rng rng(19);
  SparseVec b = random_sparse(1 << 30, 100, 1 << 20, rng);
  SparseVec e0(1 << 30, {{0, 1}});
  SparseVec r = sparse_conv(e0, b, PipelineConfig{});
  CHECK(r.length == (2u << 30) - 1);
  CHECK(r.entries == b.entries);
}
