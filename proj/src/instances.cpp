#include "sparseconv/instances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparseconv/hashing.hpp"
#include "sparseconv/pipeline.hpp"

namespace sparseconv {

Structure parse_structure(const std::string& s) {
  if (s == "uniform" || s == "uniform-random") return Structure::Uniform;
  if (s == "clustered") return Structure::Clustered;
  if (s == "ap" || s == "arithmetic-progression") return Structure::ArithmeticProgression;
  if (s == "adversarial" || s == "adversarial-heights") return Structure::AdversarialHeights;
  throw std::invalid_argument("unknown structure '" + s + "'");
}

std::string structure_name(Structure s) {
  switch (s) {
    case Structure::Uniform: return "uniform";
    case Structure::Clustered: return "clustered";
    case Structure::ArithmeticProgression: return "ap";
    case Structure::AdversarialHeights: return "adversarial";
  }
  return "?";
}

u64 sumset_size(const SparseVec& a, const SparseVec& b) {
  if (a.empty() || b.empty()) return 0;
  Rng rng(0);
  return indyk_sumset(a.support(), b.support(), rng).size();
}

namespace {

SparseVec with_values(u64 n, std::vector<u64> idx, u64 delta, Rng& rng) {
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<Entry> e;
  e.reserve(idx.size());
  for (u64 i : idx) e.push_back({i, rand_range(rng, 1, delta)});
  return SparseVec(n, std::move(e));
}

std::vector<u64> random_subset(u64 n, u64 s, Rng& rng) {
  s = std::min(s, n);
  std::vector<u64> out;
  if (s * 2 >= n) {  // dense regime: partial shuffle
    std::vector<u64> all(n);
    for (u64 i = 0; i < n; ++i) all[i] = i;
    for (u64 i = 0; i < s; ++i) std::swap(all[i], all[rand_range(rng, i, n - 1)]);
    all.resize(s);
    return all;
  }
  while (out.size() < s) {
    out.push_back(rand_range(rng, 0, n - 1));
    if (out.size() == s) {
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }
  return out;
}

// Support size parameter s and the exponent relating it to the output size.
struct Shape {
  double s;
  double exponent;  // output ~ s^exponent
};

Shape initial_shape(const InstanceSpec& sp) {
  const double k = static_cast<double>(sp.k);
  switch (sp.structure) {
    case Structure::Uniform:
    case Structure::AdversarialHeights: return {std::ceil(std::sqrt(k)), 2};
    case Structure::Clustered: return {std::max(1.0, k / 16), 1};
    case Structure::ArithmeticProgression: return {std::max(1.0, (k + 1) / 2), 1};
  }
  return {1, 1};
}

std::pair<std::vector<u64>, std::vector<u64>> supports(const InstanceSpec& sp, u64 s, Rng& rng) {
  const u64 n = sp.n;
  switch (sp.structure) {
    case Structure::Uniform: return {random_subset(n, s, rng), random_subset(n, s, rng)};
    case Structure::Clustered: {
      // Four clusters per vector, each an interval of width ~ 2s/4 at density 1/2.
      const u64 c = 4, w = std::max<u64>(1, std::min<u64>(n, (2 * s + c - 1) / c));
      auto one = [&]() {
        std::vector<u64> idx;
        for (u64 j = 0; j < c; ++j) {
          u64 start = rand_range(rng, 0, n - w);
          for (u64 t = 0; t < (s + c - 1) / c; ++t) idx.push_back(start + rand_range(rng, 0, w - 1));
        }
        return idx;
      };
      auto a = one();
      return {a, one()};
    }
    case Structure::ArithmeticProgression: {
      // A and B share a stride, so A + B is again a progression of length 2s - 1.
      const u64 d = rand_range(rng, 1, std::max<u64>(1, (n - 1) / std::max<u64>(1, s)));
      const u64 span = (s - 1) * d;
      auto one = [&]() {
        u64 start = rand_range(rng, 0, n - 1 - span);
        std::vector<u64> idx(s);
        for (u64 i = 0; i < s; ++i) idx[i] = start + i * d;
        return idx;
      };
      auto a = one();
      return {a, one()};
    }
    case Structure::AdversarialHeights: {
      // Keys of small pairwise heights: products of many small primes.
      const u64 pool_size = std::min<u64>(n - 1, 4 * s);
      auto pool = lower_bound_set(pool_size, n - 1, rng).keys;
      auto pick = [&]() {
        std::vector<u64> idx;
        for (u64 i : random_subset(pool.size(), s, rng)) idx.push_back(pool[i]);
        return idx;
      };
      auto a = pick();
      return {a, pick()};
    }
  }
  return {};
}

}  // namespace

Instance generate_instance(const InstanceSpec& sp) {
  if (sp.n == 0 || sp.n > kMaxLength) throw std::invalid_argument("generate_instance: n must lie in [1, 2^60]");
  if (sp.k == 0 || sp.k > 2 * sp.n - 1) throw std::invalid_argument("generate_instance: need 1 <= k <= 2n - 1");
  if (sp.delta == 0 || sp.delta > kMaxValue) throw std::invalid_argument("generate_instance: need 1 <= delta < 2^63");
  Shape shape = initial_shape(sp);
  const double k = static_cast<double>(sp.k);
  for (u64 attempt = 0; attempt < 256; ++attempt) {
    Rng rng(derive_seed(sp.seed, attempt));
    const u64 s = std::clamp<u64>(static_cast<u64>(std::llround(shape.s)), 1, sp.n);
    auto [ia, ib] = supports(sp, s, rng);
    Instance inst;
    inst.a = with_values(sp.n, std::move(ia), sp.delta, rng);
    inst.b = with_values(sp.n, std::move(ib), sp.delta, rng);
    // Two progressions with a common stride sum to one of length |A| + |B| - 1.
    inst.output_nnz = sp.structure == Structure::ArithmeticProgression ? inst.a.nnz() + inst.b.nnz() - 1
                                                                       : sumset_size(inst.a, inst.b);
    inst.resamples = attempt;
    const double out = static_cast<double>(inst.output_nnz);
    if (2 * inst.output_nnz >= sp.k && inst.output_nnz <= 2 * sp.k) return inst;
    // Rescale the support size towards the target (damped near the window).
    double f = std::pow(k / std::max(out, 1.0), 1 / shape.exponent);
    shape.s = std::max(1.0, shape.s * std::clamp(f, 0.25, 4.0));
  }
  throw std::runtime_error("generate_instance: could not reach the requested output sparsity");
}

}  // namespace sparseconv
