#pragma once

#include <cstdint>
#include <string>

#include "prefmatch/model.hpp"
#include "prefmatch/optim.hpp"

namespace prefmatch {

/// A tiny random two-domain pair for finite-difference checks. Every user
/// and item has at least one edge and no user interacts with every item.
struct ToyProblem {
  DomainPair pair;
  ModelConfig config;
};

/// 6 users and 5 items per domain, d = 4, K = 2, N = 4, dropout off.
ToyProblem make_toy_problem(std::uint64_t seed, std::size_t users = 6, std::size_t items = 5);

struct ModelGradCheck {
  GradCheckResult result;
  std::string worst_name;
  std::size_t tensors = 0;
  std::size_t entries = 0;
};

/// Central differences over every trainable tensor of the model on the
/// full objective (warmup elapsed), with one fixed batch and frozen noise.
ModelGradCheck gradcheck_model(const ToyProblem& toy, std::uint64_t seed, double step = 1e-5);

}  // namespace prefmatch
