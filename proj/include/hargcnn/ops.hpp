#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hargcnn/autograd.hpp"
#include "hargcnn/tensor.hpp"

namespace hargcnn {

// BCE inputs are clamped into [kBceEps, 1 - kBceEps].
inline constexpr double kBceEps = 1e-7;

// ---------------------------------------------------------------------------
// Plain tensor kernels. These are the forward definitions; the Var overloads
// below record them on a tape together with their adjoints.

Tensor matmul(const Tensor& a, const Tensor& b);
/// out[i][j] = sum_k x[i][k] * w[k][j] + b[j]
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

/// 1-D convolution along the node (row) axis with zero padding.
///
/// `w` is laid out tap-major: shape [kernel * d_in, d_out], rows
/// [t*d_in, (t+1)*d_in) hold the weights applied to input row i + t - padding.
/// `padding` must equal (kernel - 1) / 2 so the node count is preserved.
Tensor node_conv(const Tensor& x, const Tensor& w, const Tensor& b, int kernel, int padding);
Tensor node_conv(const Tensor& x, const Tensor& w, const Tensor& b, int kernel);

/// Per-column slopes: alpha has one entry per column of x.
Tensor prelu(const Tensor& x, const Tensor& alpha);
Tensor sigmoid(const Tensor& x);
Tensor softmax_rows(const Tensor& x);

/// Mean per-element binary cross-entropy. `row_weight` (optional, one entry per
/// row) selects which rows contribute; the mean runs over selected elements.
double bce_loss(const Tensor& pred, const Tensor& target, std::span<const double> row_weight = {});
/// Mean cross-entropy of integer classes against logits, via log-sum-exp.
double ce_loss(const Tensor& logits, std::span<const int> classes, std::span<const double> row_weight = {});

// ---------------------------------------------------------------------------
// Recorded ops.

Var matmul(Var a, Var b);
Var add_row_bias(Var x, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sum(Var x);
Var linear(Var x, Var w, Var b);
Var node_conv(Var x, Var w, Var b, int kernel);
Var prelu(Var x, Var alpha);
Var sigmoid(Var x);
Var tanh(Var x);
Var softmax_rows(Var x);
/// Rows [begin, begin+count) of x.
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Columns [begin, begin+count) of x.
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var stack_rows(const std::vector<Var>& rows);
/// Left-multiplication by a constant matrix: m * x.
Var left_multiply(const Tensor& m, Var x);

Var bce_loss(Var pred, const Tensor& target, std::span<const double> row_weight = {});
Var ce_loss(Var logits, std::span<const int> classes, std::span<const double> row_weight = {});

}  // namespace hargcnn
