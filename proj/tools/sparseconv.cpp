// Command-line harness: instance generation, convolution, verification,
// benchmark grids and hashing experiments.
//
// Exit codes: 0 success, 1 verification failure (verify / conv), 2 usage or
// malformed input, 3 sizing violation, 4 internal failure.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparseconv/dense_conv.hpp"
#include "sparseconv/hashing.hpp"
#include "sparseconv/instances.hpp"
#include "sparseconv/pipeline.hpp"
#include "sparseconv/verify.hpp"

using namespace sparseconv;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kRejected = 1, kUsage = 2, kSizing = 3, kInternal = 4 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "123", "2^20" or "1e6" -> integer.
u64 parse_count(const std::string& s) {
  try {
    std::size_t caret = s.find('^');
    if (caret != std::string::npos) {
      u64 base = std::stoull(s.substr(0, caret)), exp = std::stoull(s.substr(caret + 1));
      u128 r = 1;
      for (u64 i = 0; i < exp; ++i) {
        r *= base;
        if (r > ~static_cast<u64>(0)) throw InputError("number too large: " + s);
      }
      return static_cast<u64>(r);
    }
    if (s.find_first_of("eE.") != std::string::npos) {
      double d = std::stod(s);
      if (d < 0 || d != std::floor(d) || d > 1.8e19) throw InputError("not a nonnegative integer: " + s);
      return static_cast<u64>(d);
    }
    std::size_t pos = 0;
    u64 v = std::stoull(s, &pos);
    if (pos != s.size()) throw InputError("not an integer: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw InputError("not an integer: " + s);
  }
}

// "0.015625", "1/64" or "2^-6" -> double.
double parse_real(const std::string& s) {
  try {
    std::size_t slash = s.find('/');
    if (slash != std::string::npos) return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    std::size_t caret = s.find('^');
    if (caret != std::string::npos) return std::pow(std::stod(s.substr(0, caret)), std::stod(s.substr(caret + 1)));
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw InputError("not a number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw InputError("not a number: " + s);
  }
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

u64 default_seed() {
  const char* env = std::getenv("SPARSECONV_SEED");
  return env ? parse_count(env) : 1;
}

SparseVec load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return read_sparsevec(in);
  } catch (const std::runtime_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void save(const std::string& path, const SparseVec& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot write");
  write_sparsevec(out, v);
}

json stats_json(const PipelineStats& st) {
  return json{{"dense_calls", st.dense_calls},
              {"hash_loop_iterations", st.hash_loop_iterations},
              {"omega_resamples", st.omega_resamples},
              {"estimate_steps", st.estimate_steps},
              {"attempts", st.attempts},
              {"brute_fallbacks", st.brute_fallbacks},
              {"level_support", st.level_support},
              {"verified", st.verified},
              {"warnings", st.warnings}};
}

SparseVec dense_path(const SparseVec& a, const SparseVec& b) {
  if (a.length > (static_cast<u64>(1) << 27) || b.length > (static_cast<u64>(1) << 27))
    throw SizingError("dense mode needs universes of at most 2^27");
  return SparseVec::from_dense(dense_conv(a.to_dense(), b.to_dense()));
}

struct ConvResult {
  SparseVec c;
  PipelineStats stats;
  u64 wall_ns = 0;
};

ConvResult run_mode(const std::string& mode, const SparseVec& a, const SparseVec& b, const PipelineConfig& cfg) {
  ConvResult r;
  const u64 calls_before = dense_call_counter();
  auto t0 = std::chrono::steady_clock::now();
  if (mode == "sparse") {
    r.c = sparse_conv(a, b, cfg, &r.stats);
  } else if (mode == "dense") {
    r.c = dense_path(a, b);
    r.stats.dense_calls = dense_call_counter() - calls_before;
  } else if (mode == "brute") {
    r.c = brute_conv(a, b);
  } else {
    throw InputError("unknown mode '" + mode + "' (sparse, dense, brute)");
  }
  r.wall_ns = static_cast<u64>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count());
  if (mode != "sparse") {
    r.c.length = (a.length == 0 || b.length == 0) ? 0 : a.length + b.length - 1;
    r.stats.verified = true;  // deterministic exact paths
  }
  return r;
}

// ---- subcommands ----

struct Common {
  std::string n = "2^20", k = "2^10", delta, gamma, structure = "uniform", mode = "sparse", out;
  std::string trials = "1";
  u64 seed = 0;
  int jobs = 1;
};

int cmd_gen(const Common& o) {
  if (o.out.empty()) throw InputError("gen: --out PREFIX is required");
  InstanceSpec sp;
  sp.n = parse_count(o.n);
  sp.k = parse_count(o.k);
  sp.delta = o.delta.empty() ? 1 : parse_count(o.delta);
  sp.structure = parse_structure(o.structure);
  sp.seed = o.seed;
  Instance in = generate_instance(sp);
  save(o.out + ".A.sv", in.a);
  save(o.out + ".B.sv", in.b);
  std::cout << json{{"cmd", "gen"},
                    {"n", sp.n},
                    {"k", sp.k},
                    {"delta", sp.delta},
                    {"structure", structure_name(sp.structure)},
                    {"seed", sp.seed},
                    {"nnz_a", in.a.nnz()},
                    {"nnz_b", in.b.nnz()},
                    {"output_nnz", in.output_nnz},
                    {"resamples", in.resamples},
                    {"files", {o.out + ".A.sv", o.out + ".B.sv"}}}
                   .dump()
            << "\n";
  return kOk;
}

PipelineConfig pipeline_config(const Common& o, double fail_prob) {
  PipelineConfig cfg;
  cfg.delta = o.delta.empty() ? 1.0 / 64 : parse_real(o.delta);
  cfg.gamma = o.gamma.empty() ? 0 : parse_real(o.gamma);
  cfg.seed = o.seed;
  if (fail_prob > 0) {
    cfg.box = DenseBox::Faulty;
    cfg.fail_prob = fail_prob;
  }
  return cfg;
}

int cmd_conv(const Common& o, const std::string& fa, const std::string& fb, double fail_prob) {
  SparseVec a = load(fa), b = load(fb);
  PipelineConfig cfg = pipeline_config(o, fail_prob);
  ConvResult r = run_mode(o.mode, a, b, cfg);
  json j{{"cmd", "conv"}, {"mode", o.mode}, {"seed", o.seed}, {"delta", cfg.delta}, {"nnz", r.c.nnz()},
         {"wall_ns", r.wall_ns}};
  j.update(stats_json(r.stats));
  if (o.out.empty()) {
    write_sparsevec(std::cout, r.c);
    std::cerr << j.dump() << "\n";
  } else {
    save(o.out, r.c);
    std::cout << j.dump() << "\n";
  }
  return kOk;
}

int cmd_verify(const Common& o, const std::string& fa, const std::string& fb, const std::string& fc) {
  SparseVec a = load(fa), b = load(fb), c = load(fc);
  Rng rng(o.seed);
  const bool ok = verify_sparse(a, b, c, rng);
  std::cout << json{{"cmd", "verify"}, {"verified", ok}}.dump() << "\n";
  return ok ? kOk : kRejected;
}

int cmd_bench(const Common& o, const std::vector<std::string>& ns, const std::vector<std::string>& ks,
              const std::vector<std::string>& deltas, const std::vector<std::string>& structures,
              const std::vector<std::string>& modes, double pipeline_delta, double fail_prob) {
  struct Job {
    InstanceSpec spec;
    std::string mode;
  };
  std::vector<Job> jobs;
  const u64 trials = parse_count(o.trials);
  for (const auto& s : split_list(structures))
    for (const auto& n : split_list(ns))
      for (const auto& k : split_list(ks))
        for (const auto& d : split_list(deltas))
          for (u64 t = 0; t < trials; ++t)
            for (const auto& m : split_list(modes)) {
              InstanceSpec sp;
              sp.n = parse_count(n);
              sp.k = parse_count(k);
              sp.delta = parse_count(d);
              sp.structure = parse_structure(s);
              sp.seed = derive_seed(o.seed, t);
              jobs.push_back({sp, m});
            }
  std::vector<std::string> rows(jobs.size());
  std::vector<std::string> errors(jobs.size());
  const int threads = std::max(1, o.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& jb = jobs[i];
    try {
      Instance in = generate_instance(jb.spec);
      PipelineConfig cfg;
      cfg.delta = pipeline_delta;
      cfg.seed = jb.spec.seed;
      if (fail_prob > 0) {
        cfg.box = DenseBox::Faulty;
        cfg.fail_prob = fail_prob;
      }
      ConvResult r;
      try {
        r = run_mode(jb.mode, in.a, in.b, cfg);
      } catch (const std::runtime_error&) {
        if (jb.mode != "sparse") throw;
        r.stats.verified = false;  // reported as an unverified run
      }
      std::ostringstream row;
      row << jb.spec.n << ',' << jb.spec.k << ',' << jb.spec.delta << ',' << structure_name(jb.spec.structure) << ','
          << jb.spec.seed << ',' << jb.mode << ',' << r.wall_ns << ',' << r.stats.dense_calls << ','
          << (r.stats.verified ? 1 : 0);
      rows[i] = row.str();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw InputError(o.out + ": cannot write");
  }
  std::ostream& os = o.out.empty() ? std::cout : file;
  os << "n,k,delta,structure,seed,mode,wall_ns,dense_calls,verified\n";
  u64 failed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      std::cerr << json{{"cmd", "bench"}, {"error", errors[i]}, {"n", jobs[i].spec.n}, {"k", jobs[i].spec.k},
                        {"mode", jobs[i].mode}}
                       .dump()
                << "\n";
      continue;
    }
    os << rows[i] << "\n";
  }
  if (!o.out.empty())
    std::cout << json{{"cmd", "bench"}, {"rows", rows.size() - failed}, {"errors", failed}, {"out", o.out}}.dump()
              << "\n";
  return failed ? kInternal : kOk;
}

int cmd_hash_experiment(const Common& o, const std::string& universe, const std::string& buckets,
                        const std::string& set_kind) {
  const u64 k = parse_count(o.k);
  const u64 U = universe.empty() ? 8 * k : parse_count(universe);
  const u64 m = buckets.empty() ? k : parse_count(buckets);
  const u64 trials = parse_count(o.trials == "1" ? std::string("10000") : o.trials);
  if (k == 0 || U <= k || m == 0 || m > U) throw InputError("hash-experiment: need 0 < k < U and 1 <= m <= U");
  Rng rng(o.seed);
  std::vector<u64> xs;
  if (set_kind == "uniform") {
    std::set<u64> picked;
    while (picked.size() < k) picked.insert(rand_range(rng, 0, U - 1));
    xs.assign(picked.begin(), picked.end());
  } else if (set_kind == "lower-bound") {
    xs = lower_bound_set(k, U - 1, rng).keys;
  } else {
    throw InputError("hash-experiment: --set must be uniform or lower-bound");
  }
  u64 x;
  do x = rand_range(rng, 0, U - 1);
  while (std::binary_search(xs.begin(), xs.end(), x));
  const u128 plo = 4 * static_cast<u128>(U) * U + 1;
  const u128 p = find_prime(plo, 2 * plo, rng);
  const u64 a = rand_range(rng, 0, m - 1);
  u64 b = rand_range(rng, 0, m - 1);
  if (m > 1)
    while (b == a) b = rand_range(rng, 0, m - 1);
  const int threads = std::max(1, o.jobs);
  omp_set_num_threads(threads);
  ConcentrationStats st = concentration_experiment(xs, U, p, m, x, a, b, trials, rng);
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw InputError(o.out + ": cannot write");
  }
  std::ostream& os = o.out.empty() ? std::cout : file;
  os << "U,k,m,p,lambda,tail_mass,mean_F,cond_prob\n";
  os.precision(10);
  for (std::size_t i = 0; i < st.tail_mass.size(); ++i)
    os << U << ',' << xs.size() << ',' << m << ',' << to_string(p) << ',' << ConcentrationStats::lambdas[i] << ','
       << st.tail_mass[i] << ',' << st.mean_F << ',' << st.cond_prob << "\n";
  std::cout << json{{"cmd", "hash-experiment"}, {"set", set_kind},     {"U", U},
                    {"k", xs.size()},           {"m", m},              {"trials", st.trials},
                    {"cond_prob", st.cond_prob}, {"mean_F", st.mean_F}, {"fitted_c", st.fitted_c}}
                   .dump()
            << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-sensitive sparse nonnegative convolution"};
  app.require_subcommand(1);
  Common o;
  o.seed = 0;
  std::string seed_str;

  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed_str, "random seed (default: $SPARSECONV_SEED or 1)");
  };

  auto* gen = app.add_subcommand("gen", "generate an instance pair PREFIX.A.sv, PREFIX.B.sv");
  gen->add_option("--n", o.n, "universe length (e.g. 2^20)");
  gen->add_option("--k", o.k, "target output sparsity");
  gen->add_option("--delta", o.delta, "value bound: entries in [1, delta] (default 1)");
  gen->add_option("--structure", o.structure, "uniform | clustered | ap | adversarial");
  gen->add_option("--out", o.out, "output prefix")->required();
  add_seed(gen);

  std::vector<std::string> files;
  double fail_prob = 0;
  auto* conv = app.add_subcommand("conv", "convolve two SPARSEVEC files");
  conv->add_option("files", files, "A and B")->expected(2)->required();
  conv->add_option("--mode", o.mode, "sparse | dense | brute");
  conv->add_option("--delta", o.delta, "failure probability of the sparse path (default 1/64)");
  conv->add_option("--gamma", o.gamma, "error fraction of the approximate stages (default: delta)");
  conv->add_option("--fail-prob", fail_prob, "use a faulty dense box failing with this probability (<= 1/3)");
  conv->add_option("--out", o.out, "output SPARSEVEC file (default: stdout, stats to stderr)");
  add_seed(conv);

  std::vector<std::string> vfiles;
  auto* ver = app.add_subcommand("verify", "check C = A * B; exit 0 if accepted, 1 if rejected");
  ver->add_option("files", vfiles, "A, B and C")->expected(3)->required();
  add_seed(ver);

  std::vector<std::string> ns{"2^20"}, ks{"2^10"}, deltas{"1"}, structures{"uniform"}, modes{"sparse"};
  std::string pipeline_delta = "1/64";
  auto* bench = app.add_subcommand("bench", "benchmark grid; CSV n,k,delta,structure,seed,mode,wall_ns,dense_calls,verified");
  bench->add_option("--n", ns, "universe lengths (comma separated)");
  bench->add_option("--k", ks, "output sparsities");
  bench->add_option("--delta", deltas, "value bounds");
  bench->add_option("--structure", structures, "instance structures");
  bench->add_option("--mode", modes, "sparse, dense, brute");
  bench->add_option("--trials", o.trials, "instances per grid cell");
  bench->add_option("--jobs", o.jobs, "parallel trials (each trial single-threaded)");
  bench->add_option("--failure-prob", pipeline_delta, "failure probability of the sparse path (default 1/64)");
  bench->add_option("--fail-prob", fail_prob, "use a faulty dense box failing with this probability");
  bench->add_option("--out", o.out, "CSV file (default stdout)");
  add_seed(bench);

  std::string universe, buckets, set_kind = "uniform";
  auto* hx = app.add_subcommand("hash-experiment", "bucket-load concentration of linear hashing; CSV per lambda");
  hx->add_option("--k", o.k, "|X| (default 2^10)");
  hx->add_option("--n,--universe", universe, "universe U (default 8k)");
  hx->add_option("--m", buckets, "buckets (default k)");
  hx->add_option("--trials", o.trials, "hash functions drawn (default 10^4)");
  hx->add_option("--set", set_kind, "uniform | lower-bound");
  hx->add_option("--jobs", o.jobs, "threads");
  hx->add_option("--out", o.out, "CSV file (default stdout)");
  add_seed(hx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  try {
    o.seed = seed_str.empty() ? default_seed() : parse_count(seed_str);
    if (!o.jobs) o.jobs = 1;
    omp_set_num_threads(1);  // per-trial execution is single-threaded
    if (*gen) return cmd_gen(o);
    if (*conv) return cmd_conv(o, files[0], files[1], fail_prob);
    if (*ver) return cmd_verify(o, vfiles[0], vfiles[1], vfiles[2]);
    if (*bench) return cmd_bench(o, ns, ks, deltas, structures, modes, parse_real(pipeline_delta), fail_prob);
    if (*hx) return cmd_hash_experiment(o, universe, buckets, set_kind);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SizingError& e) {
    std::cerr << "sizing error: " << e.what() << "\n";
    return kSizing;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
