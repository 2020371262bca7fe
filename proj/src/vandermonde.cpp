#include "sparseconv/vandermonde.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace sparseconv {

namespace {

constexpr u64 kZero = SlpBuilder::kZero;
constexpr std::size_t kSchoolbook = 16;

void require_word(const FieldCtx& ctx) {
  if (!ctx.word()) throw SizingError("Vandermonde routines need a modulus below 2^64");
}

void require_distinct(const std::vector<u64>& a) {
  std::vector<u64> s(a);
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw std::invalid_argument("Vandermonde: evaluation points must be pairwise distinct");
}

// ---- numeric polynomial helpers (coefficients low to high) ----

std::vector<u64> pmul(const std::vector<u64>& x, const std::vector<u64>& y, const FieldCtx& f) {
  if (x.empty() || y.empty()) return {};
  std::vector<u64> r(x.size() + y.size() - 1, 0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      r[i + j] = static_cast<u64>(f.add(r[i + j], f.mul64(x[i], y[j])));
  return r;
}

// 1 / g mod X^len for g with g[0] = 1 (no field inversion needed).
std::vector<u64> inv_series(const std::vector<u64>& g, std::size_t len, const FieldCtx& f) {
  std::vector<u64> h(len, 0);
  if (len == 0) return h;
  h[0] = 1;
  for (std::size_t k = 1; k < len; ++k) {
    u128 acc = 0;
    for (std::size_t i = 1; i <= k && i < g.size(); ++i) acc = f.add(acc, f.mul64(g[i], h[k - i]));
    h[k] = static_cast<u64>(f.neg(acc));
  }
  return h;
}

// ---- subproduct tree ----

struct Node {
  std::size_t lo, hi;  // points [lo, hi)
  int left = -1, right = -1;
  std::vector<u64> M;  // monic, degree hi - lo
};

int build_tree(std::vector<Node>& nodes, const std::vector<u64>& a, std::size_t lo, std::size_t hi,
               const FieldCtx& f) {
  int id = static_cast<int>(nodes.size());
  nodes.push_back(Node{lo, hi, -1, -1, {}});
  if (hi - lo == 1) {
    nodes[id].M = {static_cast<u64>(f.neg(f.reduce(a[lo]))), 1};
    return id;
  }
  std::size_t mid = lo + (hi - lo + 1) / 2;  // uneven split, no padding points
  int l = build_tree(nodes, a, lo, mid, f);
  int r = build_tree(nodes, a, mid, hi, f);
  nodes[id].left = l;
  nodes[id].right = r;
  nodes[id].M = pmul(nodes[l].M, nodes[r].M, f);
  return id;
}

// ---- circuit fragments ----

// Product of a data polynomial (gate ids) with a constant polynomial.
std::vector<u64> mul_dc(SlpBuilder& B, const std::vector<u64>& d, const std::vector<u64>& c,
                        const FieldCtx& f) {
  if (d.empty() || c.empty()) return {};
  const std::size_t n = d.size(), m = c.size();
  std::vector<u64> out(n + m - 1, kZero);
  if (std::min(n, m) <= kSchoolbook) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] == kZero) continue;
      for (std::size_t j = 0; j < m; ++j) out[i + j] = B.add(out[i + j], B.scale(d[i], c[j]));
    }
    return out;
  }
  if (n != m) {
    const std::size_t blk = std::min(n, m);
    if (n > m) {
      for (std::size_t s = 0; s < n; s += blk) {
        std::vector<u64> part(d.begin() + s, d.begin() + std::min(n, s + blk));
        auto p = mul_dc(B, part, c, f);
        for (std::size_t i = 0; i < p.size(); ++i) out[s + i] = B.add(out[s + i], p[i]);
      }
    } else {
      for (std::size_t s = 0; s < m; s += blk) {
        std::vector<u64> part(c.begin() + s, c.begin() + std::min(m, s + blk));
        auto p = mul_dc(B, d, part, f);
        for (std::size_t i = 0; i < p.size(); ++i) out[s + i] = B.add(out[s + i], p[i]);
      }
    }
    return out;
  }
  // Karatsuba on equal lengths.
  const std::size_t h = (n + 1) / 2;
  std::vector<u64> d0(d.begin(), d.begin() + h), d1(d.begin() + h, d.end());
  std::vector<u64> c0(c.begin(), c.begin() + h), c1(c.begin() + h, c.end());
  auto z0 = mul_dc(B, d0, c0, f);
  auto z2 = mul_dc(B, d1, c1, f);
  std::vector<u64> ds(d0), cs(c0);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    ds[i] = B.add(ds[i], d1[i]);
    cs[i] = static_cast<u64>(f.add(cs[i], c1[i]));
  }
  auto z1 = mul_dc(B, ds, cs, f);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    out[i] = B.add(out[i], z0[i]);
    z1[i] = B.sub(z1[i], z0[i]);
  }
  for (std::size_t i = 0; i < z2.size(); ++i) {
    out[i + 2 * h] = B.add(out[i + 2 * h], z2[i]);
    z1[i] = B.sub(z1[i], z2[i]);
  }
  for (std::size_t i = 0; i < z1.size(); ++i) out[i + h] = B.add(out[i + h], z1[i]);
  return out;
}

// r mod M for data r and constant monic M, via the reversed-quotient identity.
std::vector<u64> rem_circuit(SlpBuilder& B, std::vector<u64> r, const std::vector<u64>& M, const FieldCtx& f) {
  const std::size_t L = r.size(), d = M.size() - 1;
  if (L <= d) {
    r.resize(d, kZero);
    return r;
  }
  const std::size_t ql = L - d;
  std::vector<u64> revM(M.rbegin(), M.rend());
  auto I = inv_series(revM, ql, f);
  std::vector<u64> revr(ql);
  for (std::size_t i = 0; i < ql; ++i) revr[i] = r[L - 1 - i];
  auto qrev = mul_dc(B, revr, I, f);
  std::vector<u64> quot(std::min(ql, d));
  for (std::size_t i = 0; i < quot.size(); ++i) quot[i] = qrev[ql - 1 - i];
  std::vector<u64> Mlow(M.begin(), M.begin() + d);
  auto prod = mul_dc(B, quot, Mlow, f);
  std::vector<u64> res(d);
  for (std::size_t i = 0; i < d; ++i) res[i] = B.sub(r[i], i < prod.size() ? prod[i] : kZero);
  return res;
}

void eval_rec(SlpBuilder& B, const std::vector<Node>& nodes, int id, std::vector<u64> r,
              std::vector<u64>& out, const FieldCtx& f) {
  const Node& nd = nodes[id];
  r = rem_circuit(B, std::move(r), nd.M, f);
  if (nd.left < 0) {
    out[nd.lo] = r[0];
    return;
  }
  eval_rec(B, nodes, nd.left, r, out, f);
  eval_rec(B, nodes, nd.right, std::move(r), out, f);
}

std::vector<u64> interp_rec(SlpBuilder& B, const std::vector<Node>& nodes, int id, const std::vector<u64>& w,
                            const FieldCtx& f) {
  const Node& nd = nodes[id];
  if (nd.left < 0) return {B.scale(B.input(nd.lo), w[nd.lo])};
  auto nl = interp_rec(B, nodes, nd.left, w, f);
  auto nr = interp_rec(B, nodes, nd.right, w, f);
  auto p1 = mul_dc(B, nl, nodes[nd.right].M, f);
  auto p2 = mul_dc(B, nr, nodes[nd.left].M, f);
  std::vector<u64> out(nd.hi - nd.lo, kZero);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = B.add(i < p1.size() ? p1[i] : kZero, i < p2.size() ? p2[i] : kZero);
  }
  return out;
}

}  // namespace

// ---- Slp ----

u64 Slp::mul_count() const {
  u64 c = 0;
  for (const auto& g : gates) c += g.op == Op::Mul;
  return c;
}

std::vector<u64> Slp::eval(const std::vector<u64>& x, const FieldCtx& ctx) const {
  require_word(ctx);
  if (x.size() != num_inputs) throw std::invalid_argument("Slp::eval: wrong number of inputs");
  std::vector<u64> v(gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    switch (g.op) {
      case Op::Input: v[i] = static_cast<u64>(ctx.reduce(x[g.c])); break;
      case Op::Const: v[i] = g.c; break;
      case Op::Add: v[i] = static_cast<u64>(ctx.add(v[g.a], v[g.b])); break;
      case Op::Sub: v[i] = static_cast<u64>(ctx.sub(v[g.a], v[g.b])); break;
      case Op::Mul: v[i] = ctx.mul64(v[g.a], v[g.b]); break;
    }
  }
  std::vector<u64> out;
  out.reserve(outputs.size());
  for (u64 o : outputs) out.push_back(v[o]);
  return out;
}

Slp dead_code_elimination(const Slp& s) {
  std::vector<char> live(s.gates.size(), 0);
  for (u64 o : s.outputs) live[o] = 1;
  for (std::size_t i = s.gates.size(); i-- > 0;) {
    const auto& g = s.gates[i];
    if (g.op == Slp::Op::Input) live[i] = 1;
    if (!live[i]) continue;
    if (g.op == Slp::Op::Add || g.op == Slp::Op::Sub || g.op == Slp::Op::Mul) live[g.a] = live[g.b] = 1;
  }
  Slp r;
  r.num_inputs = s.num_inputs;
  std::vector<u64> remap(s.gates.size(), 0);
  for (std::size_t i = 0; i < s.gates.size(); ++i) {
    if (!live[i]) continue;
    Slp::Gate g = s.gates[i];
    if (g.op == Slp::Op::Add || g.op == Slp::Op::Sub || g.op == Slp::Op::Mul) {
      g.a = remap[g.a];
      g.b = remap[g.b];
    }
    remap[i] = r.gates.size();
    r.gates.push_back(g);
  }
  for (u64 o : s.outputs) r.outputs.push_back(remap[o]);
  return r;
}

// ---- builder ----

SlpBuilder::SlpBuilder(const FieldCtx& ctx, u64 num_inputs) : ctx_(ctx) {
  require_word(ctx);
  slp_.num_inputs = num_inputs;
  for (u64 i = 0; i < num_inputs; ++i) {
    input_gate_.push_back(slp_.gates.size());
    slp_.gates.push_back({Slp::Op::Input, 0, 0, i});
    is_const_.push_back(0);
  }
}

u64 SlpBuilder::input(u64 i) { return input_gate_.at(i); }

u64 SlpBuilder::constant(u64 v) {
  v = static_cast<u64>(ctx_.reduce(v));
  if (v == 0) return kZero;
  u64 id = slp_.gates.size();
  slp_.gates.push_back({Slp::Op::Const, 0, 0, v});
  is_const_.push_back(1);
  return id;
}

bool SlpBuilder::is_const(u64 g) const { return g == kZero || is_const_[g]; }
u64 SlpBuilder::const_value(u64 g) const { return g == kZero ? 0 : slp_.gates[g].c; }

u64 SlpBuilder::add(u64 x, u64 y) {
  if (x == kZero) return y;
  if (y == kZero) return x;
  if (is_const(x) && is_const(y)) return constant(static_cast<u64>(ctx_.add(const_value(x), const_value(y))));
  u64 id = slp_.gates.size();
  slp_.gates.push_back({Slp::Op::Add, x, y, 0});
  is_const_.push_back(0);
  return id;
}

u64 SlpBuilder::sub(u64 x, u64 y) {
  if (y == kZero) return x;
  if (is_const(x) && is_const(y)) return constant(static_cast<u64>(ctx_.sub(const_value(x), const_value(y))));
  if (x == kZero) return scale(y, static_cast<u64>(ctx_.q() - 1));
  u64 id = slp_.gates.size();
  slp_.gates.push_back({Slp::Op::Sub, x, y, 0});
  is_const_.push_back(0);
  return id;
}

u64 SlpBuilder::mul(u64 x, u64 y) {
  if (x == kZero || y == kZero) return kZero;
  if (is_const(x) && is_const(y)) return constant(ctx_.mul64(const_value(x), const_value(y)));
  if (is_const(x)) std::swap(x, y);
  if (!is_const(y)) throw std::invalid_argument("SlpBuilder::mul: product of two input-dependent values");
  if (const_value(y) == 1) return x;
  u64 id = slp_.gates.size();
  slp_.gates.push_back({Slp::Op::Mul, x, y, 0});
  is_const_.push_back(0);
  return id;
}

u64 SlpBuilder::scale(u64 x, u64 v) {
  v = static_cast<u64>(ctx_.reduce(v));
  if (x == kZero || v == 0) return kZero;
  if (v == 1) return x;
  return mul(x, constant(v));
}

Slp SlpBuilder::finish(const std::vector<u64>& outputs) {
  u64 zero_gate = kZero;
  for (u64 o : outputs) {
    if (o == kZero) {
      if (zero_gate == kZero) {
        zero_gate = slp_.gates.size();
        slp_.gates.push_back({Slp::Op::Const, 0, 0, 0});
        is_const_.push_back(1);
      }
      slp_.outputs.push_back(zero_gate);
    } else {
      slp_.outputs.push_back(o);
    }
  }
  return dead_code_elimination(slp_);
}

// ---- circuits ----

Slp build_eval_circuit(const std::vector<u64>& a, const FieldCtx& ctx) {
  require_word(ctx);
  require_distinct(a);
  const std::size_t n = a.size();
  SlpBuilder B(ctx, n);
  if (n == 0) return B.finish({});
  std::vector<Node> nodes;
  build_tree(nodes, a, 0, n, ctx);
  std::vector<u64> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = B.input(i);
  std::vector<u64> out(n, kZero);
  eval_rec(B, nodes, 0, r, out, ctx);
  return B.finish(out);
}

Slp build_interp_circuit(const std::vector<u64>& a, const FieldCtx& ctx) {
  require_word(ctx);
  require_distinct(a);
  const std::size_t n = a.size();
  SlpBuilder B(ctx, n);
  if (n == 0) return B.finish({});
  std::vector<Node> nodes;
  build_tree(nodes, a, 0, n, ctx);
  // Weights 1 / M'(a_i): M' evaluated by the evaluation circuit, one bulk inversion.
  const auto& M = nodes[0].M;
  std::vector<u64> dM(n);
  for (std::size_t i = 1; i <= n; ++i) dM[i - 1] = ctx.mul64(M[i], static_cast<u64>(ctx.reduce(i)));
  auto dvals = build_eval_circuit(a, ctx).eval(dM, ctx);
  auto w = bulk_inverse64(dvals, ctx);
  auto out = interp_rec(B, nodes, 0, w, ctx);
  return B.finish(out);
}

Slp transpose_slp(const Slp& c, const FieldCtx& ctx) {
  require_word(ctx);
  const std::size_t G = c.gates.size();
  std::vector<char> cst(G, 0);
  std::vector<u64> val(G, 0);
  for (std::size_t i = 0; i < G; ++i) {
    const auto& g = c.gates[i];
    switch (g.op) {
      case Slp::Op::Input: break;
      case Slp::Op::Const:
        cst[i] = 1;
        val[i] = static_cast<u64>(ctx.reduce(g.c));
        break;
      case Slp::Op::Add:
        cst[i] = cst[g.a] && cst[g.b];
        if (cst[i]) val[i] = static_cast<u64>(ctx.add(val[g.a], val[g.b]));
        break;
      case Slp::Op::Sub:
        cst[i] = cst[g.a] && cst[g.b];
        if (cst[i]) val[i] = static_cast<u64>(ctx.sub(val[g.a], val[g.b]));
        break;
      case Slp::Op::Mul:
        if (!cst[g.a] && !cst[g.b]) throw std::invalid_argument("transpose_slp: circuit is not linear");
        cst[i] = cst[g.a] && cst[g.b];
        if (cst[i]) val[i] = ctx.mul64(val[g.a], val[g.b]);
        break;
    }
  }
  SlpBuilder B(ctx, c.outputs.size());
  std::vector<u64> adj(G, kZero);
  for (std::size_t j = 0; j < c.outputs.size(); ++j) adj[c.outputs[j]] = B.add(adj[c.outputs[j]], B.input(j));
  std::vector<u64> result(c.num_inputs, kZero);
  for (std::size_t i = G; i-- > 0;) {
    const u64 ad = adj[i];
    if (ad == kZero || cst[i]) continue;
    const auto& g = c.gates[i];
    switch (g.op) {
      case Slp::Op::Input: result[g.c] = B.add(result[g.c], ad); break;
      case Slp::Op::Const: break;
      case Slp::Op::Add:
        if (!cst[g.a]) adj[g.a] = B.add(adj[g.a], ad);
        if (!cst[g.b]) adj[g.b] = B.add(adj[g.b], ad);
        break;
      case Slp::Op::Sub:
        if (!cst[g.a]) adj[g.a] = B.add(adj[g.a], ad);
        if (!cst[g.b]) adj[g.b] = B.sub(adj[g.b], ad);
        break;
      case Slp::Op::Mul: {
        const u64 data = cst[g.a] ? g.b : g.a;
        const u64 k = cst[g.a] ? val[g.a] : val[g.b];
        adj[data] = B.add(adj[data], B.scale(ad, k));
        break;
      }
    }
  }
  return B.finish(result);
}

// ---- transposed Vandermonde ----

namespace {

// Numerators and denominators of the direct O(n^2) solution of V(a) c = y:
// c_j = (sum_t q_{j,t} y_t) / M'(a_j) with q_j = M / (X - a_j).
void direct_parts(const std::vector<u64>& a, const std::vector<u64>& y, const FieldCtx& f,
                  std::vector<u64>& num, std::vector<u64>& den) {
  const std::size_t n = a.size();
  std::vector<u64> M(n + 1, 0);
  M[0] = 1;
  for (std::size_t j = 0; j < n; ++j) {
    const u64 na = static_cast<u64>(f.neg(f.reduce(a[j])));
    for (std::size_t t = j + 2; t-- > 0;) {
      u64 lower = t > 0 ? M[t - 1] : 0;
      M[t] = static_cast<u64>(f.add(lower, f.mul64(M[t], na)));
    }
  }
  num.assign(n, 0);
  den.assign(n, 0);
  std::vector<u64> q(n);
  for (std::size_t j = 0; j < n; ++j) {
    const u64 aj = static_cast<u64>(f.reduce(a[j]));
    q[n - 1] = M[n];
    for (std::size_t t = n - 1; t > 0; --t) q[t - 1] = static_cast<u64>(f.add(M[t], f.mul64(aj, q[t])));
    u128 s = 0, h = 0;
    for (std::size_t t = n; t-- > 0;) {
      s = f.add(s, f.mul64(q[t], static_cast<u64>(f.reduce(y[t]))));
      h = f.add(f.mul64(static_cast<u64>(h), aj), q[t]);
    }
    num[j] = static_cast<u64>(s);
    den[j] = static_cast<u64>(h);
  }
}

}  // namespace

std::vector<u64> vandermonde_mul(const std::vector<u64>& a, const std::vector<u64>& x, const FieldCtx& ctx,
                                 VandermondeMethod method, u64 rows) {
  require_word(ctx);
  if (a.size() != x.size()) throw std::invalid_argument("vandermonde_mul: size mismatch");
  const std::size_t n = a.size();
  if (rows == 0) rows = n;
  if (method == VandermondeMethod::Auto) method = n <= 256 || rows != n ? VandermondeMethod::Direct : VandermondeMethod::Circuit;
  if (method == VandermondeMethod::Circuit) {
    if (rows != n) throw std::invalid_argument("vandermonde_mul: circuit method needs a square system");
    return transpose_slp(build_eval_circuit(a, ctx), ctx).eval(x, ctx);
  }
  std::vector<u64> out(rows, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const u64 ai = static_cast<u64>(ctx.reduce(a[i]));
    u64 v = static_cast<u64>(ctx.reduce(x[i]));
    if (v == 0) continue;
    for (u64 t = 0; t < rows; ++t) {
      out[t] = static_cast<u64>(ctx.add(out[t], v));
      v = ctx.mul64(v, ai);
    }
  }
  return out;
}

std::vector<u64> vandermonde_solve(const std::vector<u64>& a, const std::vector<u64>& y, const FieldCtx& ctx,
                                   VandermondeMethod method) {
  require_word(ctx);
  if (a.size() != y.size()) throw std::invalid_argument("vandermonde_solve: size mismatch");
  require_distinct(a);
  if (method == VandermondeMethod::Auto) method = a.size() <= 256 ? VandermondeMethod::Direct : VandermondeMethod::Circuit;
  if (method == VandermondeMethod::Circuit) return transpose_slp(build_interp_circuit(a, ctx), ctx).eval(y, ctx);
  VandermondeBatch batch(ctx);
  auto h = batch.add(a, y);
  batch.solve();
  return batch.solution(h);
}

std::size_t VandermondeBatch::add(const std::vector<u64>& a, const std::vector<u64>& y) {
  require_word(ctx_);
  if (a.size() != y.size()) throw std::invalid_argument("VandermondeBatch::add: size mismatch");
  require_distinct(a);
  if (solved_) throw std::logic_error("VandermondeBatch::add after solve");
  std::vector<u64> num, den;
  direct_parts(a, y, ctx_, num, den);
  offset_.push_back(den_.size());
  den_.insert(den_.end(), den.begin(), den.end());
  num_.push_back(std::move(num));
  sol_.emplace_back();
  return sol_.size() - 1;
}

void VandermondeBatch::solve() {
  if (solved_) return;
  solved_ = true;
  if (den_.empty()) return;
  auto inv = bulk_inverse64(den_, ctx_);
  for (std::size_t s = 0; s < num_.size(); ++s) {
    auto& out = sol_[s];
    out.resize(num_[s].size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = ctx_.mul64(num_[s][j], inv[offset_[s] + j]);
  }
}

}  // namespace sparseconv
