#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "roar/numerics/tape.hpp"

// Differentiable primitives. Every op reads its inputs from the tape and
// records one node; "rows" means all leading axes flattened, "cols" the last
// axis. Broadcasting exists only along leading (row) axes.
namespace roar::ops {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kRmsNormEps = 1e-6;

// Raw kernels, shared with code that runs without a tape.
namespace kernel {
// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
Tensor transpose(const Tensor& a);
}  // namespace kernel

Var matmul(Var a, Var b);
// x[.. x in] * W^T + bias, W is [out x in]; bias may be an invalid Var (tape == nullptr).
Var linear(Var x, Var weight, Var bias);
Var linear(Var x, Var weight);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);
Var add_row(Var x, Var row);  // row has cols(x) entries
Var mul_row(Var x, Var row);
Var mul_col(Var x, Var col);  // col has rows(x) entries

Var softmax(Var x);
// Normalise each row to zero mean / unit variance (no affine).
Var layer_norm(Var x, double eps = kLayerNormEps);
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
Var rms_norm(Var x, Var gain, double eps = kRmsNormEps);
Var silu(Var x);

Var reshape(Var x, Shape shape);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var gather_rows(Var x, std::span<const std::size_t> rows);
// Places row r of x at output row rows[r]; unlisted output rows are zero.
Var scatter_rows(Var x, std::span<const std::size_t> rows, std::size_t total_rows);
Var concat_rows(std::span<const Var> parts);
// Mean of consecutive groups of `group` rows: [g*group x c] -> [g x c].
Var segment_mean(Var x, std::size_t group);
// out[i] = x[i, index[i]] for a 2-D x.
Var pick(Var x, std::span<const std::size_t> index);

// Per-head scaled dot products between every query row and every key row:
// q [n x H*d], k [m x H*d] -> [n*m x H], entry (i*m + j, h) = q_ih . k_jh / sqrt(d).
Var head_dots(Var q, Var k, std::size_t heads);

// Counts keys visited per query by attention().
struct AttentionProbe {
  std::size_t queries = 0;
  std::size_t min_keys = static_cast<std::size_t>(-1);
  std::size_t max_keys = 0;
  std::size_t total_keys = 0;
  void record(std::size_t keys);
};

// Multi-head scaled dot-product attention. Keys/values are grouped into
// consecutive segments of `segment_len` rows; query i attends only to segment
// segments[i]. An empty `segments` means one segment spanning every key row.
Var attention(Var q, Var k, Var v, std::size_t heads, std::span<const std::size_t> segments = {},
              std::size_t segment_len = 0, AttentionProbe* probe = nullptr);

// Forward value is `forward_value` exactly; backward passes the incoming
// gradient unchanged to `soft` (straight-through estimator).
Var straight_through(Var soft, Tensor forward_value);

Var sum(Var x);
Var mean(Var x);
Var mse(Var a, Var b);

}  // namespace roar::ops
