#include "sparseconv/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "sparseconv/dense_conv.hpp"
#include "sparseconv/vandermonde.hpp"
#include "sparseconv/verify.hpp"

namespace sparseconv {

namespace {

constexpr u64 kMaxSmallHash = static_cast<u64>(1) << 48;  // cap of the large-universe hash range
constexpr u64 kSetQueryPrimeCap = static_cast<u64>(1) << 62;

// Thrown when an estimation step exceeds its work budget.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double log2d(double x) { return std::log2(std::max(x, 1.0)); }
u64 ceil_u64(double x) { return static_cast<u64>(std::ceil(x - 1e-9)); }

u64 bit_ceil_u64(u64 x) {
  u64 r = 1;
  while (r < x) r <<= 1;
  return r;
}

// ---- families of convolutions sharing factors and randomness ----

// A list of factor vectors (residues mod Q over a common universe U) and
// targets, each target being the sum of the products fa[i] * fb[j] over its
// (i, j) pairs.
struct Family {
  u64 U = 0;
  std::vector<SparseVec> fa, fb;
  std::vector<std::vector<std::pair<int, int>>> targets;
};

Family with_derivatives(const Family& f, const FieldCtx& Q) {
  Family d = f;
  const int na = static_cast<int>(f.fa.size()), nb = static_cast<int>(f.fb.size());
  for (const auto& v : f.fa) d.fa.push_back(derivative_mod(v, Q));
  for (const auto& v : f.fb) d.fb.push_back(derivative_mod(v, Q));
  for (const auto& t : f.targets) {
    std::vector<std::pair<int, int>> dt;
    for (auto [i, j] : t) {
      dt.push_back({i + na, j});
      dt.push_back({i, j + nb});
    }
    d.targets.push_back(std::move(dt));
  }
  return d;
}

Family hash_family(const Family& f, const LinearHash& h, u64 m, const FieldCtx& Q) {
  Family r;
  r.U = m;
  r.targets = f.targets;
  auto map = [&h](u64 x) { return h(x); };
  for (const auto& v : f.fa) r.fa.push_back(apply_hash_sparse_mod(map, v, m, Q));
  for (const auto& v : f.fb) r.fb.push_back(apply_hash_sparse_mod(map, v, m, Q));
  return r;
}

bool all_empty(const Family& f) {
  bool ea = std::all_of(f.fa.begin(), f.fa.end(), [](const SparseVec& v) { return v.empty(); });
  bool eb = std::all_of(f.fb.begin(), f.fb.end(), [](const SparseVec& v) { return v.empty(); });
  return ea || eb;
}

std::vector<u64> union_support(const std::vector<SparseVec>& vs) {
  std::vector<u64> s;
  for (const auto& v : vs)
    for (const auto& e : v.entries) s.push_back(e.index);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

// Per-run state shared by all stages.
struct Run {
  const PipelineConfig& cfg;
  PipelineStats& st;
  Rng& rng;
  FieldCtx Q;
  ModqConvolver conv;
  std::function<void(int, const std::vector<SparseVec>&)> hook;
  Run(const PipelineConfig& c, PipelineStats& s, Rng& r, const FieldCtx& q) : cfg(c), st(s), rng(r), Q(q), conv(q) {}
};

// For each target, the sum over its pairs of xa[i] * xb[j]: cyclic of length
// n (a power of two) when `cyclic`, otherwise linear (length 2n - 1).
std::vector<DenseVec> family_products(const std::vector<DenseVec>& xa, const std::vector<DenseVec>& xb,
                                      const std::vector<std::vector<std::pair<int, int>>>& targets, u64 n,
                                      bool cyclic, Run& run) {
  const FieldCtx& Q = run.Q;
  const u64 out_len = cyclic ? n : 2 * n - 1;
  std::vector<DenseVec> out(targets.size(), DenseVec(out_len, 0));
  if (run.cfg.box == DenseBox::Faulty) {
    ConvBox box = [&](const DenseVec& a, const DenseVec& b) {
      DenseVec c = conv_modq(a, b, Q);
      std::bernoulli_distribution fail(run.cfg.fail_prob);
      if (!c.empty() && fail(run.rng)) {
        u64 i = rand_range(run.rng, 0, c.size() - 1);
        c[i] = static_cast<u64>(Q.add(c[i], 1));
      }
      return c;
    };
    ConvVerifier ver = [&](const DenseVec& a, const DenseVec& b, const DenseVec& c) {
      return verify_dense_modq(a, b, c, Q, run.rng, 2);
    };
    for (std::size_t t = 0; t < targets.size(); ++t)
      for (auto [i, j] : targets[t]) {
        u64 calls = 0;
        DenseVec c = reliable_conv(xa[i], xb[j], box, ver, &calls);
        run.st.dense_calls += calls;
        for (u64 r = 0; r < c.size(); ++r) {
          u64 d = cyclic ? (r & (n - 1)) : r;
          out[t][d] = static_cast<u64>(Q.add(out[t][d], c[r]));
        }
      }
    return out;
  }
  const int log_n = cyclic ? ceil_log2(n) : ceil_log2(2 * n - 1);
  std::vector<std::unique_ptr<ModqConvolver::Spectrum>> sa(xa.size()), sb(xb.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto acc = run.conv.zero(log_n);
    for (auto [i, j] : targets[t]) {
      if (!sa[i]) sa[i] = std::make_unique<ModqConvolver::Spectrum>(run.conv.forward(xa[i].data(), xa[i].size(), log_n));
      if (!sb[j]) sb[j] = std::make_unique<ModqConvolver::Spectrum>(run.conv.forward(xb[j].data(), xb[j].size(), log_n));
      run.conv.mul_acc(acc, *sa[i], *sb[j]);
      ++run.st.dense_calls;
      ++dense_call_counter();
    }
    DenseVec c = run.conv.inverse(acc);
    for (u64 r = 0; r < out_len; ++r) out[t][r] = c[r];
  }
  return out;
}

// Identity test for a family over Z_Q at independent random points.
bool verify_family(const Family& f, const std::vector<SparseVec>& c, Run& run) {
  const double ratio = static_cast<double>(2 * static_cast<u128>(std::max<u64>(f.U, 1))) /
                       static_cast<double>(run.Q.q());
  if (ratio >= 0.5) throw SizingError("verify_family: field too small for the universe");
  const int points = std::max(1, static_cast<int>(std::ceil(20.0 / -std::log2(ratio))));
  auto eval = [&](const SparseVec& v, u128 x) {
    std::vector<u128> exps;
    for (const auto& e : v.entries) exps.push_back(e.index);
    auto pw = bulk_pow(x, exps, run.Q);
    u128 s = 0;
    for (std::size_t i = 0; i < pw.size(); ++i) s = run.Q.add(s, run.Q.mul(pw[i], v.entries[i].value));
    return s;
  };
  for (int t = 0; t < points; ++t) {
    u128 x = rand_range128(run.rng, 0, run.Q.q() - 1);
    std::vector<u128> va, vb;
    for (const auto& v : f.fa) va.push_back(eval(v, x));
    for (const auto& v : f.fb) vb.push_back(eval(v, x));
    for (std::size_t j = 0; j < f.targets.size(); ++j) {
      u128 lhs = 0;
      for (auto [a, b] : f.targets[j]) lhs = run.Q.add(lhs, run.Q.mul(va[a], vb[b]));
      if (lhs != eval(c[j], x)) return false;
    }
  }
  return true;
}

std::vector<SparseVec> brute_family(const Family& f, const FieldCtx& Q) {
  std::vector<SparseVec> out;
  const u64 len = 2 * f.U - 1;
  for (const auto& t : f.targets) {
    std::vector<Entry> all;
    for (auto [i, j] : t) {
      auto c = brute_conv_mod(f.fa[i], f.fb[j], Q);
      all.insert(all.end(), c.entries.begin(), c.entries.end());
    }
    out.push_back(make_sparse_mod(len, std::move(all), Q));
  }
  return out;
}

// ---- unfolding shared by several targets ----

std::vector<SparseVec> unfold_many(const std::vector<std::vector<DenseVec>>& cs, u128 omega, u64 m,
                                   const std::vector<u64>& xs, u64 length, const FieldCtx& Q) {
  const u64 T = cs.empty() ? 0 : cs[0].size();
  std::vector<SparseVec> out(cs.size(), SparseVec(length));
  if (xs.empty() || T == 0) return out;
  std::vector<u128> exps(xs.begin(), xs.end());
  auto pw = bulk_pow(omega, exps, Q);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] % m < xs[b] % m; });
  VandermondeBatch batch(Q);
  struct Job {
    std::size_t target, handle;
    std::vector<u64> keys;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s;
    const u64 r = xs[order[s]] % m;
    while (e < order.size() && xs[order[e]] % m == r) ++e;
    const std::size_t size = e - s;
    if (size <= T) {  // overfull classes are skipped
      std::vector<u64> pts, keys;
      for (std::size_t i = s; i < e; ++i) {
        pts.push_back(static_cast<u64>(pw[order[i]]));
        keys.push_back(xs[order[i]]);
      }
      for (std::size_t tg = 0; tg < cs.size(); ++tg) {
        std::vector<u64> y(size);
        for (std::size_t t = 0; t < size; ++t) y[t] = cs[tg][t][r];
        try {
          jobs.push_back({tg, batch.add(pts, y), keys});
        } catch (const std::invalid_argument&) {
          throw OmegaOrderError("unfold: repeated powers of omega within a class");
        }
      }
    }
    s = e;
  }
  batch.solve();
  std::vector<std::vector<Entry>> entries(cs.size());
  for (const auto& j : jobs) {
    const auto& sol = batch.solution(j.handle);
    for (std::size_t i = 0; i < sol.size(); ++i)
      if (sol[i] != 0) entries[j.target].push_back({j.keys[i], sol[i]});
  }
  for (std::size_t tg = 0; tg < cs.size(); ++tg) out[tg] = make_sparse_mod(length, std::move(entries[tg]), Q);
  return out;
}

// ---- approximate set query on a family ----

std::vector<SparseVec> set_query_core(const Family& f, u64 k, const std::vector<u64>& xs, double gamma,
                                      double delta, Run& run) {
  const u64 U = f.U;
  const u64 Uout = 2 * U - 1;
  std::vector<SparseVec> zero(f.targets.size(), SparseVec(Uout));
  if (all_empty(f) || xs.empty()) return zero;
  const u128 plo = std::max<u128>(4 * static_cast<u128>(Uout) * Uout, 5);
  if (2 * plo >= kSetQueryPrimeCap) throw SizingError("set_query: universe too large for the injective map");
  const u64 p = static_cast<u64>(find_prime(plo, 2 * plo, run.rng));
  const u64 nx = 2 * xs.size();  // |X~|
  // Power-of-two bucket count with average occupancy in [load, 2 load): at
  // lower occupancy, classes above twice the mean are too frequent to meet
  // the flatness budget.
  const u64 m = std::bit_floor(std::max<u64>(1, nx / run.cfg.set_query_load));
  const u64 T = std::max<u64>(1, (2 * nx + m - 1) / m);
  const double threshold = std::max(gamma * static_cast<double>(k) / 2, run.cfg.flatness_fraction * static_cast<double>(k));
  const u64 budget = std::max<u64>(1, ceil_u64(64 * log2d(1 / delta)));

  // Part 1: linear hash with a flat image of X.
  LinearHash h;
  std::vector<u64> xt;
  bool found = false;
  for (u64 it = 0; it < budget; ++it) {
    ++run.st.hash_loop_iterations;
    h = lh_sample(p, m <= p ? m : p, run.rng, true);
    xt.clear();
    const u64 shift = static_cast<u64>((2 * h.tau) % p);
    for (u64 x : xs) {
      u64 w = static_cast<u64>((static_cast<u128>(static_cast<u64>(h.sigma)) * x + shift) % p);
      xt.push_back(w);
      xt.push_back(w + p);
    }
    if (static_cast<double>(flatness(xt, m)) <= threshold) {
      found = true;
      break;
    }
  }
  if (!found) throw std::runtime_error("set_query: hash loop budget exhausted");
  std::sort(xt.begin(), xt.end());

  // The injective map pi applied to every factor.
  auto apply_pi = [&](const std::vector<SparseVec>& vs) {
    std::vector<SparseVec> r;
    for (const auto& v : vs) {
      std::vector<Entry> e;
      e.reserve(v.nnz());
      for (const auto& x : v.entries) e.push_back({static_cast<u64>(h.pi(x.index)), x.value});
      std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
      r.emplace_back(p, std::move(e));
    }
    return r;
  };
  auto pa = apply_pi(f.fa), pb = apply_pi(f.fb);

  // Parts 2 and 3: omega, fold, convolve, unfold.
  std::vector<SparseVec> rt;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 16) throw std::runtime_error("set_query: no omega of sufficient order found");
    const u128 omega = rand_unit(run.Q, run.rng);
    try {
      std::vector<std::vector<DenseVec>> fa, fb;
      for (const auto& v : pa) fa.push_back(fold(v, omega, m, T, run.Q));
      for (const auto& v : pb) fb.push_back(fold(v, omega, m, T, run.Q));
      std::vector<std::vector<DenseVec>> cs(f.targets.size(), std::vector<DenseVec>(T));
      for (u64 t = 0; t < T; ++t) {
        std::vector<DenseVec> xa, xb;
        for (auto& v : fa) xa.push_back(std::move(v[t]));
        for (auto& v : fb) xb.push_back(std::move(v[t]));
        auto prod = family_products(xa, xb, f.targets, m, true, run);
        for (std::size_t j = 0; j < prod.size(); ++j) cs[j][t] = std::move(prod[j]);
      }
      rt = unfold_many(cs, omega, m, xt, 2 * p, run.Q);
      break;
    } catch (const OmegaOrderError&) {
      ++run.st.omega_resamples;
    }
  }
  // C~_z = R~[psi(z)] + R~[psi(z) + p].
  std::vector<SparseVec> out;
  const u64 shift = static_cast<u64>((2 * h.tau) % p);
  for (const auto& r : rt) {
    SparseVec c(Uout);
    for (u64 x : xs) {
      u64 w = static_cast<u64>((static_cast<u128>(static_cast<u64>(h.sigma)) * x + shift) % p);
      u64 v = static_cast<u64>(run.Q.add(r.at(w), r.at(w + p)));
      if (v != 0) c.entries.push_back({x, v});
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---- tiny universe: support approximation + set query ----

// approx_supp that throws BudgetExceeded as soon as a level holds more than
// max_size candidates (max_size = 0: no limit).
std::vector<u64> approx_supp_impl(const std::vector<u64>& y_in, const std::vector<u64>& z_in, u64 U, u64 k,
                                  double gamma, double delta, Rng& rng, u64 max_size);

std::vector<SparseVec> tiny_core(const Family& f, u64 k, double gamma, double delta, Run& run) {
  if (all_empty(f)) return std::vector<SparseVec>(f.targets.size(), SparseVec(2 * f.U - 1));
  auto y = union_support(f.fa), z = union_support(f.fb);
  const double gp = gamma * gamma / std::max(1.0, log2d(static_cast<double>(k)));
  auto xs = approx_supp_impl(y, z, f.U, k, gp, delta, run.rng, run.cfg.support_budget_factor * k);
  if (xs.size() > run.cfg.support_budget_factor * k) throw BudgetExceeded("support approximation exceeded its budget");
  return set_query_core(f, k, xs, gamma, delta, run);
}

// Position recovery x = W_i / V_i over the buckets of V, with a consistency
// predicate linking x back to its bucket.
template <class Consistent>
std::vector<Entry> recover_positions(const SparseVec& v, const SparseVec& w, u64 limit, Consistent consistent,
                                     const FieldCtx& Q) {
  std::vector<u64> vals;
  for (const auto& e : v.entries) vals.push_back(e.value);
  if (vals.empty()) return {};
  auto inv = bulk_inverse64(vals, Q);
  std::vector<Entry> out;
  for (std::size_t i = 0; i < v.nnz(); ++i) {
    const u64 bucket = v.entries[i].index;
    const u64 x = Q.mul64(static_cast<u64>(Q.reduce(w.at(bucket))), inv[i]);
    if (x < limit && consistent(x, bucket)) out.push_back({x, v.entries[i].value});
  }
  return out;
}

// Window test (h(0) + h(x) + o) mod m == bucket for o in {-p, 0, p}.
bool affine_consistent(const LinearHash& h, u64 x, u64 bucket) {
  const u64 m = h.m;
  const u64 pm = static_cast<u64>(h.p % m);
  const u64 base = static_cast<u64>((static_cast<u128>(h(0)) + h(x)) % m);
  return base == bucket || (base + pm) % m == bucket || (base + m - pm) % m == bucket;
}

// ---- small universe, approximate ----

std::vector<SparseVec> small_approx_core(const Family& f, u64 k, double delta, Run& run) {
  const u64 U = f.U, Uout = 2 * U - 1;
  const std::size_t nt = f.targets.size();
  if (all_empty(f)) return std::vector<SparseVec>(nt, SparseVec(Uout));
  const u64 p = static_cast<u64>(find_prime(std::max<u64>(2 * U, 3), std::max<u64>(4 * U, 6), run.rng));
  u64 m = ceil_u64(run.cfg.small_hash_factor * static_cast<double>(k) / delta);
  m = std::max<u64>(1, std::min(m, p));
  LinearHash h = lh_sample(p, m, run.rng, true);
  Family d = with_derivatives(f, run.Q);
  Family hd = hash_family(d, h, m, run.Q);
  const double dt = delta / 6;
  // A linear hash maps each output index to at most three buckets (the
  // offsets -p, 0, p), and the integer sum of two bucket numbers adds a carry:
  // the linear product of the hashed vectors has at most 6k nonzeros.
  auto r = tiny_core(hd, 6 * k, dt, dt, run);
  std::vector<SparseVec> out;
  for (std::size_t j = 0; j < nt; ++j) {
    SparseVec v = fold_sparse_mod_q(r[j], m, run.Q);
    SparseVec w = fold_sparse_mod_q(r[j + nt], m, run.Q);
    out.push_back(hash_recover(v, w, h, Uout, run.Q));
  }
  return out;
}

// ---- small universe, exact (error correction) ----

std::vector<SparseVec> small_sparse_core(const Family& f, u64 k, double delta, Run& run) {
  const u64 U = f.U, Uout = 2 * U - 1;
  const std::size_t nt = f.targets.size();
  if (all_empty(f)) return std::vector<SparseVec>(nt, SparseVec(Uout));
  const double lk = std::max(2.0, log2d(static_cast<double>(k)));
  delta = std::min(delta, 1.0 / (lk * lk));
  auto c = small_approx_core(f, k, delta / 2, run);
  if (run.hook) run.hook(0, c);
  const u64 m = std::max<u64>(16, ceil_u64(8.0 * static_cast<double>(k) * log2d(static_cast<double>(U)) / (lk * lk)));
  const int L = static_cast<int>(std::ceil(std::log(lk) / std::log(1.5))) + 1;
  Family d = with_derivatives(f, run.Q);
  for (int level = 1; level <= L; ++level) {
    const u64 reps = std::max<u64>(
        1, ceil_u64(run.cfg.correction_repeat_scale * std::log2(2.0 * L / delta) / std::pow(1.5, level - 1)));
    u64 best_score = 0, best_p = 0;
    std::vector<SparseVec> best_v, best_w;
    bool have = false;
    for (u64 rep = 0; rep < reps; ++rep) {
      const u64 p = static_cast<u64>(find_prime(m, 2 * m, run.rng));
      std::vector<DenseVec> ga, gb;
      for (const auto& v : d.fa) ga.push_back(fold_mod_q(v, p, run.Q));
      for (const auto& v : d.fb) gb.push_back(fold_mod_q(v, p, run.Q));
      auto prod = family_products(ga, gb, d.targets, p, false, run);
      std::vector<SparseVec> vs, ws;
      u64 score = 0;
      for (std::size_t j = 0; j < nt; ++j) {
        DenseVec gv = fold_mod_q(c[j], p, run.Q), gw = fold_mod_q(derivative_mod(c[j], run.Q), p, run.Q);
        DenseVec vv(p, 0), ww(p, 0);
        for (u64 i = 0; i < prod[j].size(); ++i) {
          u64 r = i >= p ? i - p : i;
          vv[r] = static_cast<u64>(run.Q.add(vv[r], prod[j][i]));
          ww[r] = static_cast<u64>(run.Q.add(ww[r], prod[j + nt][i]));
        }
        for (u64 r = 0; r < p; ++r) {
          vv[r] = static_cast<u64>(run.Q.sub(vv[r], gv[r]));
          ww[r] = static_cast<u64>(run.Q.sub(ww[r], gw[r]));
        }
        vs.push_back(SparseVec::from_dense(vv));
        ws.push_back(SparseVec::from_dense(ww));
        score += vs.back().nnz();
      }
      if (!have || score > best_score) {
        have = true;
        best_score = score;
        best_p = p;
        best_v = std::move(vs);
        best_w = std::move(ws);
      }
    }
    run.st.level_support.push_back(best_score);
    if (best_score == 0) {
      if (run.hook)
        for (int l = level; l <= L; ++l) run.hook(l, c);
      break;  // every draw saw a zero residual
    }
    for (std::size_t j = 0; j < nt; ++j) {
      auto e = recover_positions(best_v[j], best_w[j], Uout, [&](u64 x, u64 b) { return x % best_p == b; }, run.Q);
      e.insert(e.end(), c[j].entries.begin(), c[j].entries.end());
      c[j] = make_sparse_mod(Uout, std::move(e), run.Q);
    }
    if (run.hook) run.hook(level, c);
  }
  return c;
}

// ---- sparsity estimation ----

std::vector<SparseVec> estimate_core(const Family& f, double delta, Run& run,
                                     const std::function<bool(const std::vector<SparseVec>&)>& accept) {
  const std::size_t nt = f.targets.size();
  if (all_empty(f)) return std::vector<SparseVec>(nt, SparseVec(2 * f.U - 1));
  u64 max_a = 0, max_b = 0, sum_a = 0, sum_b = 0;
  for (const auto& v : f.fa) max_a = std::max<u64>(max_a, v.nnz()), sum_a += v.nnz();
  for (const auto& v : f.fb) max_b = std::max<u64>(max_b, v.nnz()), sum_b += v.nnz();
  const u64 k0 = std::max<u64>(1, max_a + max_b);
  const u128 kmax = static_cast<u128>(sum_a) * sum_b;
  for (u64 kstar = k0;; kstar *= 2) {
    if (kstar >= kmax) {
      ++run.st.brute_fallbacks;
      run.st.warnings.push_back("estimation reached |A||B|; using the quadratic product");
      return brute_family(f, run.Q);
    }
    ++run.st.estimate_steps;
    try {
      auto c = small_sparse_core(f, kstar, delta, run);
      if (accept(c)) return c;
    } catch (const BudgetExceeded&) {
      continue;
    } catch (const SizingError& e) {
      ++run.st.brute_fallbacks;
      run.st.warnings.push_back(std::string("estimation step infeasible (") + e.what() + "); using the quadratic product");
      return brute_family(f, run.Q);
    }
  }
}

// ---- integer front ends ----

u128 output_bound(const SparseVec& a, const SparseVec& b) {
  return static_cast<u128>(std::min(a.nnz(), b.nnz())) * a.max_value() * b.max_value();
}

FieldCtx choose_q(const SparseVec& a, const SparseVec& b, Rng& rng) {
  const u128 bound = output_bound(a, b);
  if (bound > kMaxValue) throw SizingError("output coefficients would reach 2^63");
  if (bound < (static_cast<u128>(1) << 61))
    return FieldCtx(find_ntt_prime(static_cast<u64>(1) << 61, static_cast<u64>(1) << 62, 24, rng));
  return FieldCtx(find_prime(static_cast<u128>(1) << 63, (static_cast<u128>(1) << 64) - 1, rng));
}

Family single_family(const SparseVec& a, const SparseVec& b, const FieldCtx& Q) {
  Family f;
  f.U = std::max({a.length, b.length, static_cast<u64>(1)});
  auto red = [&](const SparseVec& v) {
    std::vector<Entry> e;
    for (const auto& x : v.entries) e.push_back({x.index, static_cast<u64>(Q.reduce(x.value))});
    return make_sparse_mod(f.U, std::move(e), Q);
  };
  f.fa = {red(a)};
  f.fb = {red(b)};
  f.targets = {{{0, 0}}};
  return f;
}

// Residues of an exact result are the integers themselves (the field exceeds
// every coefficient); values above the bound are certainly wrong and dropped.
SparseVec to_integer(const SparseVec& c, u64 length, u128 bound) {
  SparseVec r(length);
  for (const auto& e : c.entries)
    if (e.index < length && e.value <= bound) r.entries.push_back(e);
  return r;
}

u64 out_length(const SparseVec& a, const SparseVec& b) {
  if (a.length == 0 || b.length == 0) return 0;
  return a.length + b.length - 1;
}

void check_delta(double delta) {
  if (!(delta > 0 && delta <= 1.0 / 3 + 1e-12)) throw std::invalid_argument("delta must lie in (0, 1/3]");
}

template <class Body>
SparseVec integer_front(const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg, PipelineStats* stats,
                        Body body) {
  check_delta(cfg.delta);
  PipelineStats local;
  PipelineStats& st = stats ? *stats : local;
  const u64 len = out_length(a, b);
  if (a.empty() || b.empty()) return SparseVec(len);
  if (a.length > kMaxLength || b.length > kMaxLength) throw SizingError("universe exceeds 2^60");
  Rng rng(cfg.seed);
  Run run(cfg, st, rng, choose_q(a, b, rng));
  Family f = single_family(a, b, run.Q);
  auto res = body(f, run);
  return to_integer(res[0], len, output_bound(a, b));
}

}  // namespace

SparseVec hash_recover(const SparseVec& v, const SparseVec& w, const LinearHash& h, u64 length,
                       const FieldCtx& ctx) {
  auto e = recover_positions(v, w, length, [&](u64 x, u64 b) { return affine_consistent(h, x, b); }, ctx);
  return make_sparse_mod(length, std::move(e), ctx);
}

// ---- public: folding ----

std::vector<DenseVec> fold(const SparseVec& a, u128 omega, u64 m, u64 T, const FieldCtx& ctx) {
  if (m == 0 || T == 0) throw std::invalid_argument("fold: m and T must be positive");
  std::vector<DenseVec> out(T, DenseVec(m, 0));
  if (a.empty()) return out;
  std::vector<u128> exps;
  for (const auto& e : a.entries) exps.push_back(e.index);
  auto pw = bulk_pow(omega, exps, ctx);
  std::vector<std::size_t> order(a.nnz());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a.entries[x].index % m < a.entries[y].index % m; });
  for (std::size_t s = 0; s < order.size();) {
    const u64 r = a.entries[order[s]].index % m;
    std::size_t e = s;
    while (e < order.size() && a.entries[order[e]].index % m == r) ++e;
    for (std::size_t c = s; c < e; c += T) {
      const std::size_t ce = std::min<std::size_t>(e, c + T);
      std::vector<u64> pts, vals;
      for (std::size_t i = c; i < ce; ++i) {
        pts.push_back(static_cast<u64>(pw[order[i]]));
        vals.push_back(static_cast<u64>(ctx.reduce(a.entries[order[i]].value)));
      }
      std::vector<u64> sorted(pts);
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw OmegaOrderError("fold: repeated powers of omega within a chunk");
      auto y = vandermonde_mul(pts, vals, ctx, VandermondeMethod::Direct, T);
      for (u64 t = 0; t < T; ++t) out[t][r] = static_cast<u64>(ctx.add(out[t][r], y[t]));
    }
    s = e;
  }
  return out;
}

SparseVec unfold(const std::vector<DenseVec>& c, u128 omega, u64 m, const std::vector<u64>& xs, u64 length,
                 const FieldCtx& ctx) {
  if (m == 0) throw std::invalid_argument("unfold: m must be positive");
  for (const auto& v : c)
    if (v.size() != m) throw std::invalid_argument("unfold: every C^t must have length m");
  std::vector<u64> sorted(xs);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  return unfold_many({c}, omega, m, sorted, length, ctx)[0];
}

// ---- public: sumsets and support approximation ----

namespace {

std::vector<u64> exact_sumset(const std::vector<u64>& y, const std::vector<u64>& z) {
  if (y.empty() || z.empty()) return {};
  const u64 lo = y.front() + z.front(), hi = y.back() + z.back();
  const u64 range = hi - lo + 1;
  const double pairs = static_cast<double>(y.size()) * static_cast<double>(z.size());
  std::vector<u64> out;
  if (range <= (static_cast<u64>(1) << 26) && pairs > 8.0 * static_cast<double>(range)) {
    DenseVec a(y.back() - y.front() + 1, 0), b(z.back() - z.front() + 1, 0);
    for (u64 v : y) a[v - y.front()] = 1;
    for (u64 v : z) b[v - z.front()] = 1;
    DenseVec c = dense_conv(a, b);
    for (u64 i = 0; i < c.size(); ++i)
      if (c[i]) out.push_back(lo + i);
    return out;
  }
  if (range <= (static_cast<u64>(1) << 26)) {
    std::vector<char> hit(range, 0);
    for (u64 u : y)
      for (u64 v : z) hit[u + v - lo] = 1;
    for (u64 i = 0; i < range; ++i)
      if (hit[i]) out.push_back(lo + i);
    return out;
  }
  for (u64 u : y)
    for (u64 v : z) out.push_back(u + v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Cyclic sumset of two sorted sets of residues mod m, as a bitset.
std::vector<u64> cyclic_sumset(const std::vector<u64>& y, const std::vector<u64>& z, u64 m) {
  std::vector<u64> bits((m + 63) / 64, 0);
  auto set = [&bits](u64 i) { bits[i >> 6] |= static_cast<u64>(1) << (i & 63); };
  const double pairs = static_cast<double>(y.size()) * static_cast<double>(z.size());
  if (pairs <= 4.0 * static_cast<double>(m) * std::max(1.0, std::log2(static_cast<double>(m)))) {
    // Output blocks small enough to stay in cache; within a block, each u
    // contributes the z-range landing there (directly or after one wrap).
    constexpr u64 kBlock = static_cast<u64>(1) << 20;
    for (u64 b0 = 0; b0 < m; b0 += kBlock) {
      const u64 b1 = std::min(m, b0 + kBlock);
      for (u64 u : y) {
        auto emit = [&](u64 vlo, u64 vhi, u64 base) {  // v in [vlo, vhi) -> bit base + v
          auto it = std::lower_bound(z.begin(), z.end(), vlo);
          for (; it != z.end() && *it < vhi; ++it) set(base + *it);
        };
        // u + v in [b0, b1) with v < m - u.
        const u64 lo = b0 > u ? b0 - u : 0, hi = std::min(b1 - std::min(b1, u), m - u);
        if (b1 > u && lo < hi) emit(lo, hi, u);
        // u + v - m in [b0, b1) with v >= m - u.
        const u64 wlo = b0 + m - u, whi = std::min(b1 + m - u, m);
        if (wlo < whi) emit(wlo, whi, u - m);
      }
    }
    return bits;
  }
  DenseVec a(m, 0), b(m, 0);
  for (u64 v : y) a[v] = 1;
  for (u64 v : z) b[v] = 1;
  DenseVec c = dense_conv(a, b);
  for (u64 i = 0; i < c.size(); ++i)
    if (c[i]) set(i >= m ? i - m : i);
  return bits;
}

std::vector<u64> sorted_unique(std::vector<u64> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::vector<u64> indyk_sumset(const std::vector<u64>& y, const std::vector<u64>& z, Rng& rng, SumsetMode mode) {
  auto ys = sorted_unique(y), zs = sorted_unique(z);
  if (mode == SumsetMode::Exact) return exact_sumset(ys, zs);
  // Seven rounds of half-density subsamples of Y: each sum is found with
  // probability >= 1 - 2^-7 > 99/100.
  std::vector<u64> acc;
  std::bernoulli_distribution keep(0.5);
  for (int r = 0; r < 7; ++r) {
    std::vector<u64> sub;
    for (u64 v : ys)
      if (keep(rng)) sub.push_back(v);
    auto s = exact_sumset(sub, zs);
    acc.insert(acc.end(), s.begin(), s.end());
  }
  return sorted_unique(std::move(acc));
}

namespace {

std::vector<u64> approx_supp_impl(const std::vector<u64>& y_in, const std::vector<u64>& z_in, u64 U, u64 k,
                                  double gamma, double delta, Rng& rng, u64 max_size) {
  auto y = sorted_unique(y_in), z = sorted_unique(z_in);
  if (y.empty() || z.empty()) return {};
  if (U == 0 || y.back() >= U || z.back() >= U) throw std::invalid_argument("approx_supp: sets must lie in [0, U)");
  k = std::max<u64>(k, 1);
  const u64 usum = 2 * U - 1;  // sums lie in [0, usum)
  const u64 m = std::max<u64>(64, bit_ceil_u64(40 * k));
  // p exceeds every sum (injective hashing of [0, 2U - 1)) and the bucket count.
  const u128 plo = std::max<u128>(2 * static_cast<u128>(usum) + 3, m);
  const u128 p = find_prime(plo, 2 * plo, rng);
  const u64 lg = ceil_u64(log2d(1 / gamma)), ld = ceil_u64(log2d(1 / delta));
  const int L = static_cast<int>(std::min<u64>(lg, static_cast<u64>(bit_length(usum))));
  const u64 R = std::max<u64>(3, ceil_u64(0.125 * static_cast<double>(lg + ld)));
  const u64 need = (3 * R + 3) / 4;
  std::vector<u64> x;  // X_L = {0, ..., ceil(usum / 2^L)}
  for (u64 i = 0; i <= ((usum + (static_cast<u64>(1) << L) - 1) >> L); ++i) x.push_back(i);
  for (int level = L - 1; level >= 0; --level) {
    std::vector<u64> yl, zl;
    for (u64 v : y) yl.push_back(v >> level);
    for (u64 v : z) zl.push_back(v >> level);
    yl = sorted_unique(std::move(yl));
    zl = sorted_unique(std::move(zl));
    const u64 lo = yl.front() + zl.front(), hi = yl.back() + zl.back();
    std::vector<u64> M;
    for (u64 v : x)
      for (u64 d = 0; d <= 2; ++d) {
        u64 c = 2 * v + d;
        if (c >= lo && c <= hi) M.push_back(c);
      }
    M = sorted_unique(std::move(M));
    std::vector<u64> votes(M.size(), 0);
    for (u64 r = 0; r < R; ++r) {
      LinearHash h = lh_sample(p, m, rng);
      std::vector<u64> hy, hz;
      for (u64 v : yl) hy.push_back(h(v));
      for (u64 v : zl) hz.push_back(h(v));
      const auto bits = cyclic_sumset(sorted_unique(std::move(hy)), sorted_unique(std::move(hz)), m);
      auto test = [&bits](u64 i) { return (bits[i >> 6] >> (i & 63)) & 1; };
      const u64 h0 = h(0), pm = static_cast<u64>(p % m);
      for (std::size_t i = 0; i < M.size(); ++i) {
        u64 b = (h0 + h(M[i])) % m;
        if (test(b) || test((b + pm) % m) || test((b + m - pm) % m)) ++votes[i];
      }
    }
    x.clear();
    for (std::size_t i = 0; i < M.size(); ++i)
      if (votes[i] >= need) x.push_back(M[i]);
    // Intermediate levels may hold up to twice the final support.
    if (max_size != 0 && x.size() > (level == 0 ? max_size : 2 * max_size)) throw BudgetExceeded("support approximation exceeded its budget");
  }
  return x;
}

}  // namespace

std::vector<u64> approx_supp(const std::vector<u64>& y, const std::vector<u64>& z, u64 U, u64 k, double gamma,
                             double delta, Rng& rng) {
  return approx_supp_impl(y, z, U, k, gamma, delta, rng, 0);
}

// ---- public: the chain ----

SparseVec set_query(const SparseVec& a, const SparseVec& b, u64 k, const std::vector<u64>& xs,
                    const PipelineConfig& cfg, PipelineStats* stats) {
  return integer_front(a, b, cfg, stats, [&](const Family& f, Run& run) {
    auto sx = sorted_unique(xs);
    while (!sx.empty() && sx.back() >= 2 * f.U - 1) sx.pop_back();
    return set_query_core(f, std::max<u64>(k, 1), sx, cfg.effective_gamma(), cfg.delta, run);
  });
}

SparseVec tiny_approx_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                           PipelineStats* stats) {
  return integer_front(a, b, cfg, stats, [&](const Family& f, Run& run) {
    auto y = union_support(f.fa), z = union_support(f.fb);
    const u64 kk = std::max<u64>(k, 1);
    const double g = cfg.effective_gamma();
    auto xs = approx_supp(y, z, f.U, kk, g * g / std::max(1.0, log2d(static_cast<double>(kk))), cfg.delta, run.rng);
    return set_query_core(f, kk, xs, g, cfg.delta, run);
  });
}

SparseVec small_approx_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                            PipelineStats* stats) {
  return integer_front(a, b, cfg, stats, [&](const Family& f, Run& run) {
    return small_approx_core(f, std::max<u64>(k, 1), cfg.delta, run);
  });
}

SparseVec small_sparse_conv(const SparseVec& a, const SparseVec& b, u64 k, const PipelineConfig& cfg,
                            PipelineStats* stats) {
  PipelineStats local;
  PipelineStats& st = stats ? *stats : local;
  const u128 bound = output_bound(a, b);
  const u64 len = out_length(a, b);
  SparseVec c = integer_front(a, b, cfg, &st, [&](const Family& f, Run& run) {
    if (cfg.level_hook)
      run.hook = [&](int level, const std::vector<SparseVec>& cs) { cfg.level_hook(level, to_integer(cs[0], len, bound)); };
    return small_sparse_core(f, std::max<u64>(k, 1), cfg.delta, run);
  });
  Rng vr(derive_seed(cfg.seed, 0x5eed));
  st.verified = verify_sparse(a, b, c, vr);
  return c;
}

SparseVec estimate_and_conv(const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg, PipelineStats* stats) {
  PipelineStats local;
  PipelineStats& st = stats ? *stats : local;
  const u128 bound = output_bound(a, b);
  const u64 len = out_length(a, b);
  SparseVec c = integer_front(a, b, cfg, &st, [&](const Family& f, Run& run) {
    return estimate_core(f, cfg.delta, run, [&](const std::vector<SparseVec>& cs) {
      return verify_sparse(a, b, to_integer(cs[0], len, bound), run.rng);
    });
  });
  Rng vr(derive_seed(cfg.seed, 0x5eed));
  st.verified = verify_sparse(a, b, c, vr);
  return c;
}

SparseVec sparse_conv(const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg, PipelineStats* stats) {
  check_delta(cfg.delta);
  PipelineStats local;
  PipelineStats& st = stats ? *stats : local;
  const u64 len = out_length(a, b);
  if (a.empty() || b.empty()) {
    st.verified = true;
    return SparseVec(len);
  }
  if (a.length > kMaxLength || b.length > kMaxLength) throw SizingError("universe exceeds 2^60");
  Rng rng(cfg.seed);
  Run run(cfg, st, rng, choose_q(a, b, rng));
  const u128 bound = output_bound(a, b);
  Family f = single_family(a, b, run.Q);
  const u64 U = f.U, Uout = 2 * U - 1;
  const double prod = static_cast<double>(a.nnz()) * static_cast<double>(b.nnz());
  const double mm = std::pow(prod, cfg.universe_cube_exponent);
  const u64 m = std::max<u64>(16, mm >= static_cast<double>(kMaxSmallHash) ? kMaxSmallHash : ceil_u64(mm));
  const u64 attempts = std::max<u64>(1, cfg.max_attempts);
  for (u64 at = 0; at < attempts; ++at) {
    ++st.attempts;
    const u128 plo = 2 * static_cast<u128>(U) * m;
    const LinearHash h = lh_sample(find_prime(plo, 2 * plo, rng), m, rng, true);
    Family hd = hash_family(with_derivatives(f, run.Q), h, m, run.Q);
    std::vector<SparseVec> r;
    try {
      r = estimate_core(hd, cfg.delta / 6, run, [&](const std::vector<SparseVec>& cs) {
        return verify_family(hd, cs, run);
      });
    } catch (const SizingError&) {
      throw;
    } catch (const std::runtime_error& e) {
      // A randomized step gave up (hash or omega budget); retry with fresh randomness.
      st.warnings.push_back(std::string("large-universe attempt failed: ") + e.what());
      continue;
    }
    SparseVec v = fold_sparse_mod_q(r[0], m, run.Q), w = fold_sparse_mod_q(r[1], m, run.Q);
    SparseVec c = to_integer(hash_recover(v, w, h, Uout, run.Q), len, bound);
    if (verify_sparse(a, b, c, rng)) {
      st.verified = true;
      return c;
    }
    st.warnings.push_back("large-universe attempt rejected by the verifier");
  }
  st.verified = false;
  throw std::runtime_error("sparse_conv: no attempt passed verification");
}

double default_delta(u64 k) {
  const double lk = log2d(static_cast<double>(std::max<u64>(k, 2)));
  return std::min(1.0 / 64, std::pow(2.0, -std::ceil(std::sqrt(lk))));
}

}  // namespace sparseconv
