#include "sparseconv/vectors.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace sparseconv {

u64 SparseVec::max_value() const {
  u64 m = 0;
  for (const auto& e : entries) m = std::max(m, e.value);
  return m;
}

u64 SparseVec::at(u64 index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const Entry& e, u64 i) { return e.index < i; });
  return (it != entries.end() && it->index == index) ? it->value : 0;
}

bool SparseVec::valid() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].value == 0 || entries[i].index >= length) return false;
    if (i > 0 && entries[i - 1].index >= entries[i].index) return false;
  }
  return true;
}

std::vector<u64> SparseVec::support() const {
  std::vector<u64> s;
  s.reserve(entries.size());
  for (const auto& e : entries) s.push_back(e.index);
  return s;
}

SparseVec SparseVec::from_dense(const DenseVec& d) {
  SparseVec s(d.size());
  for (u64 i = 0; i < d.size(); ++i)
    if (d[i] != 0) s.entries.push_back({i, d[i]});
  return s;
}

DenseVec SparseVec::to_dense() const {
  DenseVec d(length, 0);
  for (const auto& e : entries) d[e.index] = e.value;
  return d;
}

namespace {

void sort_pairs(std::vector<Entry>& pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const Entry& x, const Entry& y) { return x.index < y.index; });
}

u64 checked_add(u64 a, u64 b, u64 index) {
  u64 s = a + b;
  if (s < a || s > kMaxValue)
    throw SizingError("value overflow (>= 2^63) at index " + std::to_string(index));
  return s;
}

}  // namespace

SparseVec make_sparse(u64 length, std::vector<Entry> pairs) {
  sort_pairs(pairs);
  SparseVec out(length);
  for (const auto& p : pairs) {
    if (p.index >= length)
      throw std::out_of_range("index " + std::to_string(p.index) + " outside universe");
    if (!out.entries.empty() && out.entries.back().index == p.index)
      out.entries.back().value = checked_add(out.entries.back().value, p.value, p.index);
    else
      out.entries.push_back(p);
  }
  std::erase_if(out.entries, [](const Entry& e) { return e.value == 0; });
  return out;
}

SparseVec make_sparse_mod(u64 length, std::vector<Entry> pairs, const FieldCtx& ctx) {
  sort_pairs(pairs);
  SparseVec out(length);
  for (const auto& p : pairs) {
    if (p.index >= length)
      throw std::out_of_range("index " + std::to_string(p.index) + " outside universe");
    u64 v = static_cast<u64>(ctx.reduce(p.value));
    if (!out.entries.empty() && out.entries.back().index == p.index)
      out.entries.back().value = static_cast<u64>(ctx.add(out.entries.back().value, v));
    else
      out.entries.push_back({p.index, v});
  }
  std::erase_if(out.entries, [](const Entry& e) { return e.value == 0; });
  return out;
}

SparseVec derivative(const SparseVec& a) {
  SparseVec out(a.length);
  for (const auto& e : a.entries) {
    if (e.index == 0) continue;
    u128 v = static_cast<u128>(e.index) * e.value;
    if (v > kMaxValue)
      throw SizingError("derivative overflow (>= 2^63) at index " + std::to_string(e.index));
    out.entries.push_back({e.index, static_cast<u64>(v)});
  }
  return out;
}

SparseVec derivative_mod(const SparseVec& a, const FieldCtx& ctx) {
  SparseVec out(a.length);
  out.entries.reserve(a.nnz());
  for (const auto& e : a.entries) {
    u64 v = static_cast<u64>(ctx.mul(ctx.reduce(e.index), e.value));
    if (v != 0) out.entries.push_back({e.index, v});
  }
  return out;
}

SparseVec bullet(u128 omega, const SparseVec& a, const FieldCtx& ctx) {
  SparseVec out(a.length);
  if (a.empty()) return out;
  std::vector<u128> exps;
  exps.reserve(a.nnz());
  for (const auto& e : a.entries) exps.push_back(e.index);
  std::vector<u128> pw = bulk_pow(omega, exps, ctx);
  for (std::size_t i = 0; i < a.nnz(); ++i) {
    u128 v = ctx.mul(pw[i], ctx.reduce(a.entries[i].value));
    if (v != 0) out.entries.push_back({a.entries[i].index, static_cast<u64>(v)});
  }
  return out;
}

DenseVec fold_mod(const SparseVec& a, u64 m) {
  if (m == 0) throw std::invalid_argument("fold_mod: m must be positive");
  DenseVec out(m, 0);
  for (const auto& e : a.entries) {
    u64 j = e.index % m;
    out[j] = checked_add(out[j], e.value, j);
  }
  return out;
}

DenseVec fold_mod_q(const SparseVec& a, u64 m, const FieldCtx& ctx) {
  if (m == 0) throw std::invalid_argument("fold_mod_q: m must be positive");
  DenseVec out(m, 0);
  for (const auto& e : a.entries) {
    u64 j = e.index % m;
    out[j] = static_cast<u64>(ctx.add(out[j], ctx.reduce(e.value)));
  }
  return out;
}

SparseVec fold_sparse_mod_q(const SparseVec& a, u64 m, const FieldCtx& ctx) {
  if (m == 0) throw std::invalid_argument("fold_sparse_mod_q: m must be positive");
  std::vector<Entry> pairs;
  pairs.reserve(a.nnz());
  for (const auto& e : a.entries) pairs.push_back({e.index % m, e.value});
  return make_sparse_mod(m, std::move(pairs), ctx);
}

DenseVec apply_hash(const IndexMap& f, const SparseVec& a, u64 m) {
  if (m == 0) throw std::invalid_argument("apply_hash: m must be positive");
  DenseVec out(m, 0);
  for (const auto& e : a.entries) {
    u64 j = f(e.index);
    if (j >= m) throw std::out_of_range("apply_hash: map leaves [0, m)");
    out[j] = checked_add(out[j], e.value, j);
  }
  return out;
}

SparseVec apply_hash_sparse_mod(const IndexMap& f, const SparseVec& a, u64 m,
                                const FieldCtx& ctx) {
  std::vector<Entry> pairs;
  pairs.reserve(a.nnz());
  for (const auto& e : a.entries) {
    u64 j = f(e.index);
    if (j >= m) throw std::out_of_range("apply_hash_sparse_mod: map leaves [0, m)");
    pairs.push_back({j, e.value});
  }
  return make_sparse_mod(m, std::move(pairs), ctx);
}

namespace {

constexpr u64 kBruteGuard = 100000000ULL;

template <class Acc, class Finish>
SparseVec brute_core(const SparseVec& a, const SparseVec& b, Acc acc_mul, Finish finish) {
  if (a.length == 0 || b.length == 0) return SparseVec(0);
  SparseVec out(a.length + b.length - 1);
  if (a.empty() || b.empty()) return out;
  if (static_cast<u128>(a.nnz()) * b.nnz() > kBruteGuard)
    throw SizingError("brute_conv: nnz(A) * nnz(B) exceeds the 1e8 guard");
  const u64 lo = a.entries.front().index + b.entries.front().index;
  const u64 hi = a.entries.back().index + b.entries.back().index;
  const u64 range = hi - lo + 1;
  if (range <= (static_cast<u64>(1) << 22) ||
      (range <= (static_cast<u64>(1) << 24) && range <= 4 * a.nnz() * b.nnz())) {
    std::vector<u128> acc(range, 0);
    std::vector<char> hit(range, 0);
    for (const auto& x : a.entries)
      for (const auto& y : b.entries) {
        u64 j = x.index + y.index - lo;
        acc[j] = acc_mul(acc[j], x.value, y.value);
        hit[j] = 1;
      }
    for (u64 j = 0; j < range; ++j)
      if (hit[j]) {
        u64 v = finish(acc[j], j + lo);
        if (v != 0) out.entries.push_back({j + lo, v});
      }
    return out;
  }
  std::unordered_map<u64, u128> acc;
  acc.reserve(std::min<u64>(a.nnz() * b.nnz(), 1u << 20));
  for (const auto& x : a.entries)
    for (const auto& y : b.entries) {
      u128& slot = acc[x.index + y.index];
      slot = acc_mul(slot, x.value, y.value);
    }
  std::vector<Entry> pairs;
  pairs.reserve(acc.size());
  for (const auto& [j, v] : acc) {
    u64 f = finish(v, j);
    if (f != 0) pairs.push_back({j, f});
  }
  sort_pairs(pairs);
  out.entries = std::move(pairs);
  return out;
}

}  // namespace

SparseVec brute_conv(const SparseVec& a, const SparseVec& b) {
  const u128 cap = static_cast<u128>(kMaxValue);
  return brute_core(
      a, b,
      [cap](u128 s, u64 x, u64 y) {
        u128 r = s + static_cast<u128>(x) * y;
        return r > cap ? cap + 1 : r;  // saturate; reported by finish
      },
      [cap](u128 v, u64 j) -> u64 {
        if (v > cap) throw SizingError("brute_conv: result >= 2^63 at index " + std::to_string(j));
        return static_cast<u64>(v);
      });
}

SparseVec brute_conv_mod(const SparseVec& a, const SparseVec& b, const FieldCtx& ctx) {
  return brute_core(
      a, b, [&ctx](u128 s, u64 x, u64 y) { return ctx.add(s, ctx.mul(x, y)); },
      [](u128 v, u64) -> u64 { return static_cast<u64>(v); });
}

DenseVec brute_cyclic_conv(const DenseVec& a, const DenseVec& b, u64 m) {
  if (a.size() != m || b.size() != m)
    throw std::invalid_argument("brute_cyclic_conv: both inputs must have length m");
  DenseVec out(m, 0);
  std::vector<u128> acc(m, 0);
  for (u64 i = 0; i < m; ++i) {
    if (a[i] == 0) continue;
    for (u64 j = 0; j < m; ++j) {
      if (b[j] == 0) continue;
      u64 t = i + j >= m ? i + j - m : i + j;
      acc[t] += static_cast<u128>(a[i]) * b[j];
      if (acc[t] > kMaxValue)
        throw SizingError("brute_cyclic_conv: result >= 2^63 at index " + std::to_string(t));
    }
  }
  for (u64 t = 0; t < m; ++t) out[t] = static_cast<u64>(acc[t]);
  return out;
}

void write_sparsevec(std::ostream& os, const SparseVec& a) {
  os << "SPARSEVEC 1 " << a.length << ' ' << a.nnz() << '\n';
  std::string line;
  for (const auto& e : a.entries) {
    line.clear();
    line += std::to_string(e.index);
    line += ' ';
    line += std::to_string(e.value);
    line += '\n';
    os << line;
  }
}

namespace {

u64 parse_field(const std::string& tok, std::size_t lineno, const char* what) {
  if (tok.empty() || tok.size() > 20 ||
      !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw std::runtime_error("line " + std::to_string(lineno) + ": malformed " + what + " '" +
                             tok + "'");
  u128 v = parse_u128(tok);
  if (v > ~static_cast<u64>(0))
    throw std::runtime_error("line " + std::to_string(lineno) + ": " + what + " out of range");
  return static_cast<u64>(v);
}

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = s.find(' ', i);
    if (j == std::string::npos) j = s.size();
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

}  // namespace

SparseVec read_sparsevec(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw std::runtime_error("line 1: missing SPARSEVEC header");
  auto head = split_spaces(line);
  if (head.size() != 4 || head[0] != "SPARSEVEC" || head[1] != "1")
    throw std::runtime_error("line 1: expected 'SPARSEVEC 1 <U> <nnz>'");
  SparseVec out(parse_field(head[2], 1, "universe"));
  if (out.length > kMaxLength) throw std::runtime_error("line 1: universe exceeds 2^60");
  u64 nnz = parse_field(head[3], 1, "nnz");
  out.entries.reserve(std::min<u64>(nnz, 1u << 24));
  for (u64 i = 0; i < nnz; ++i) {
    ++lineno;
    if (!std::getline(is, line))
      throw std::runtime_error("line " + std::to_string(lineno) + ": unexpected end of file");
    auto tok = split_spaces(line);
    if (tok.size() != 2)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected '<index> <value>'");
    u64 idx = parse_field(tok[0], lineno, "index");
    u64 val = parse_field(tok[1], lineno, "value");
    if (idx >= out.length)
      throw std::runtime_error("line " + std::to_string(lineno) + ": index outside universe");
    if (val == 0 || val > kMaxValue)
      throw std::runtime_error("line " + std::to_string(lineno) + ": value must be in [1, 2^63)");
    if (!out.entries.empty() && out.entries.back().index >= idx)
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": indices must be strictly increasing");
    out.entries.push_back({idx, val});
  }
  if (std::getline(is, line))
    throw std::runtime_error("line " + std::to_string(lineno + 1) + ": trailing content");
  return out;
}

void save_sparsevec(const std::string& path, const SparseVec& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_sparsevec(os, a);
  if (!os) throw std::runtime_error("write failed for " + path);
}

SparseVec load_sparsevec(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return read_sparsevec(is);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace sparseconv
