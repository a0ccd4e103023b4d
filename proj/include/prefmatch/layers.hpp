#pragma once

#include <string>
#include <vector>

#include "prefmatch/ops.hpp"
#include "prefmatch/rng.hpp"
#include "prefmatch/tensor.hpp"

namespace prefmatch {

enum class ParamGroup { Encoder, Identifier, Matching, Objectives };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamGroup group;
};

/// Trainable tensor drawn from U(-bound, bound).
Tensor uniform_param(Shape shape, double bound, Rng& rng);

/// Affine map x W + b with W stored in x out.
struct Dense {
  Tensor weight;
  Tensor bias;  // 1 x out; undefined for bias-free maps

  /// Weights and bias from U(-1/sqrt(in), 1/sqrt(in)).
  static Dense init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
  Tensor operator()(const Tensor& x) const;
  void collect(std::vector<NamedParam>& out, const std::string& name, ParamGroup group) const;
};

/// Dropout settings threaded through a forward pass.
struct DropoutContext {
  double rate = 0.0;
  bool train = false;
  Rng* rng = nullptr;

  Tensor apply(const Tensor& x) const { return dropout(x, rate, train, rng); }
};

}  // namespace prefmatch
