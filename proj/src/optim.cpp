#include "prefmatch/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prefmatch {

AdamState AdamState::for_params(std::span<const Tensor> params, AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.numel(), 0.0);
    s.second_moment.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = params[i].numel();
    if (state.first_moment[i].size() != n || state.second_moment[i].size() != n)
      throw ShapeError("adam_step", params[i].shape(), {state.first_moment[i].size()});
    if (!grads[i].empty() && grads[i].size() != n)
      throw ShapeError("adam_step", params[i].shape(), {grads[i].size()});
  }
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_values();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
      p[k] -= o.learning_rate * o.weight_decay * p[k];
      p[k] -= o.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  adam_step(params, grads, state);
}

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double step) {
  if (!(step > 1e-7 && step < 1e-3)) throw std::invalid_argument("grad_check: step must lie in (1e-7, 1e-3)");
  for (auto& p : params) p.zero_grad();
  const Tensor loss = loss_fn();
  const double base = loss.item();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  const double again = loss_fn().item();
  if (again != base)
    throw std::runtime_error("grad_check: loss function is not deterministic (" + std::to_string(base) +
                             " vs " + std::to_string(again) + ")");

  GradCheckResult result;
  bool first = true;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double plus = loss_fn().item();
      values[k] = saved - step;
      const double minus = loss_fn().item();
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[pi][k];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (first || err > result.max_relative_error) {
        result = {err, pi, k, a, numeric};
        first = false;
      }
    }
  }
  return result;
}

}  // namespace prefmatch
