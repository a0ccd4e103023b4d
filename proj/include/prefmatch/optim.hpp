#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prefmatch/tensor.hpp"

namespace prefmatch {

struct AdamOptions {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators, one pair per parameter tensor, in registration order.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(std::span<const Tensor> params, AdamOptions options = {});
};

/// Bias-corrected Adam with decoupled weight decay:
///   p <- p - lr * wd * p
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// `grads[i]` must match `params[i]` in size; an empty gradient counts as zero.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state);

/// Same, reading each parameter's accumulated gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients against central differences over every
/// entry of `params`. The error per entry is
/// |analytic - numeric| / max(1, |numeric|).
/// `loss_fn` must be deterministic; two forward passes that disagree throw.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double step = 1e-5);

}  // namespace prefmatch
