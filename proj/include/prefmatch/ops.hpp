#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "prefmatch/rng.hpp"
#include "prefmatch/tensor.hpp"

// Differentiable operations over Tensor. Matrix ops require rank-2
// operands; elementwise ops require identical shapes unless noted.
namespace prefmatch {

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Concatenation along the feature (column) axis.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
/// Stacks rank-2 tensors with equal column counts.
Tensor concat_rows(std::span<const Tensor> parts);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// a + row, with `row` of shape 1 x cols(a) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
/// max(a, floor); the gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& a, double floor);
/// axis 1 normalizes each row, axis 0 each column.
Tensor softmax(const Tensor& a, int axis = 1);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);
Tensor row_mean(const Tensor& a);
/// Row-wise inner products, n x 1.
Tensor row_dot(const Tensor& a, const Tensor& b);

/// Inverted dropout. Identity when `train` is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, bool train, Rng* rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

}  // namespace prefmatch
