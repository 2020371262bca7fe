// Straight-line programs over Z_q, multipoint evaluation / interpolation
// circuits, the transposition principle, and transposed Vandermonde
// multiply / solve built on them.
#pragma once

#include <vector>

#include "sparseconv/numeric.hpp"

namespace sparseconv {

// A straight-line program computing a linear map over Z_q. Gate operands
// always precede the gate. Every multiplication has an operand derived only
// from constants, so the program is linear in its inputs.
struct Slp {
  enum class Op : unsigned char { Input, Const, Add, Sub, Mul };
  struct Gate {
    Op op;
    u64 a = 0, b = 0;  // operand gate ids (Add/Sub/Mul)
    u64 c = 0;         // constant value (Const) or input index (Input)
  };
  u64 num_inputs = 0;
  std::vector<Gate> gates;
  std::vector<u64> outputs;  // gate ids

  std::size_t size() const { return gates.size(); }
  u64 mul_count() const;
  // Evaluate on x (|x| = num_inputs); values are residues of ctx (q < 2^64).
  std::vector<u64> eval(const std::vector<u64>& x, const FieldCtx& ctx) const;
};

// Incremental builder with constant folding, so every constant-derived value
// is a single Const gate. Gate id kZero denotes the zero polynomial/value
// without emitting a gate.
class SlpBuilder {
 public:
  static constexpr u64 kZero = ~static_cast<u64>(0);
  SlpBuilder(const FieldCtx& ctx, u64 num_inputs);
  u64 input(u64 i);
  u64 constant(u64 v);
  u64 add(u64 x, u64 y);
  u64 sub(u64 x, u64 y);
  u64 mul(u64 x, u64 y);       // one operand must be constant-derived
  u64 scale(u64 x, u64 v);     // x * v for a numeric constant v
  bool is_const(u64 g) const;
  u64 const_value(u64 g) const;
  // Finish with the given outputs (kZero allowed) and remove dead gates.
  Slp finish(const std::vector<u64>& outputs);

 private:
  FieldCtx ctx_;
  Slp slp_;
  std::vector<char> is_const_;
  std::vector<u64> input_gate_;
};

// Removes gates not reachable from the outputs (inputs are always kept).
Slp dead_code_elimination(const Slp& s);

// x -> W(a) x, i.e. (P(a_1), ..., P(a_n)) for P = sum x_i X^i. No field
// inversion is performed. Points must be pairwise distinct.
Slp build_eval_circuit(const std::vector<u64>& a, const FieldCtx& ctx);
// y -> W(a)^{-1} y: coefficients of the interpolating polynomial. Exactly one
// field inversion is performed while building.
Slp build_interp_circuit(const std::vector<u64>& a, const FieldCtx& ctx);
// Reverse-mode transposition: computes x -> M^T x for the map M of c.
// Throws std::invalid_argument if c multiplies two input-dependent values.
Slp transpose_slp(const Slp& c, const FieldCtx& ctx);

// V(a) has rows (a_1^t, ..., a_n^t) for t = 0..n-1, i.e. V = W(a)^T.
enum class VandermondeMethod { Auto, Direct, Circuit };
// (V x)_t = sum_i a_i^t x_i for t < rows (rows defaults to n).
std::vector<u64> vandermonde_mul(const std::vector<u64>& a, const std::vector<u64>& x, const FieldCtx& ctx,
                                 VandermondeMethod method = VandermondeMethod::Auto, u64 rows = 0);
// Solve V(a) c = y (square, n = |a|). At most one field inversion.
std::vector<u64> vandermonde_solve(const std::vector<u64>& a, const std::vector<u64>& y, const FieldCtx& ctx,
                                   VandermondeMethod method = VandermondeMethod::Auto);

// Deferred-inversion session: collects several square transposed Vandermonde
// systems and solves all of them with a single field inversion in total.
class VandermondeBatch {
 public:
  explicit VandermondeBatch(const FieldCtx& ctx) : ctx_(ctx) {}
  // Returns a handle; throws std::invalid_argument on duplicate points.
  std::size_t add(const std::vector<u64>& a, const std::vector<u64>& y);
  void solve();  // one bulk inversion
  const std::vector<u64>& solution(std::size_t handle) const { return sol_[handle]; }
  std::size_t size() const { return sol_.size(); }

 private:
  FieldCtx ctx_;
  std::vector<std::vector<u64>> num_, sol_;
  std::vector<u64> den_;  // flattened denominators M'(a_j)
  std::vector<std::size_t> offset_;
  bool solved_ = false;
};

}  // namespace sparseconv
