#include "prefmatch/identifier.hpp"

#include <algorithm>
#include <numeric>

namespace prefmatch {

void DiagGaussian::validate() const {
  if (!mean.defined() || !scale.defined()) throw std::invalid_argument("DiagGaussian: undefined parameters");
  if (mean.shape() != scale.shape()) throw ShapeError("DiagGaussian", mean.shape(), scale.shape());
  for (double s : scale.values())
    if (!(s >= kScaleFloor)) throw std::domain_error("DiagGaussian: scale below floor 1e-8");
}

DiagGaussian DiagGaussian::standard(std::size_t rows, std::size_t cols) {
  return {Tensor::zeros({rows, cols}), Tensor::full({rows, cols}, 1.0)};
}

SigmaActivation parse_sigma_activation(const std::string& name) {
  if (name == "softmax") return SigmaActivation::Softmax;
  if (name == "softplus") return SigmaActivation::Softplus;
  throw std::invalid_argument("unknown sigma1 activation '" + name + "' (expected softmax or softplus)");
}

std::string to_string(SigmaActivation a) { return a == SigmaActivation::Softmax ? "softmax" : "softplus"; }

IdentifierParams IdentifierParams::init(const IdentifierConfig& c, Rng& rng) {
  IdentifierParams p;
  p.user_mu = Dense::init(c.width, c.width, rng);
  p.user_sigma = Dense::init(c.width, c.width, rng);
  p.item_mu = Dense::init(c.width, c.width, rng);
  p.item_sigma = Dense::init(c.width, c.width, rng);
  p.domain_mu = Dense::init(c.width, c.latent_dim, rng);
  p.domain_sigma = Dense::init(c.width, c.latent_dim, rng);
  if (c.learned_prior) {
    p.prior_mu = Dense::init(c.width, c.latent_dim, rng);
    p.prior_sigma = Dense::init(c.width, c.latent_dim, rng);
  }
  return p;
}

void IdentifierParams::collect(std::vector<NamedParam>& out, const std::string& prefix) const {
  const auto g = ParamGroup::Identifier;
  user_mu.collect(out, prefix + "user_mu", g);
  user_sigma.collect(out, prefix + "user_sigma", g);
  item_mu.collect(out, prefix + "item_mu", g);
  item_sigma.collect(out, prefix + "item_sigma", g);
  domain_mu.collect(out, prefix + "domain_mu", g);
  domain_sigma.collect(out, prefix + "domain_sigma", g);
  if (prior_mu) prior_mu->collect(out, prefix + "prior_mu", g);
  if (prior_sigma) prior_sigma->collect(out, prefix + "prior_sigma", g);
}

DiagGaussian infer_level1(const Tensor& h, const IdentifierParams& params, Side side, const IdentifierConfig& config) {
  const Dense& mu_head = side == Side::User ? params.user_mu : params.item_mu;
  const Dense& sigma_head = side == Side::User ? params.user_sigma : params.item_sigma;
  if (h.rank() != 2 || h.cols() != mu_head.in()) throw ShapeError("infer_level1", h.shape(), mu_head.weight.shape());
  DiagGaussian g;
  g.mean = leaky_relu(mu_head(h), config.leaky_slope);
  const Tensor pre = sigma_head(h);
  const Tensor raw = config.sigma1 == SigmaActivation::Softmax
                         ? scale(softmax(pre, 1), config.effective_sigma1_scale())
                         : softplus(pre);
  g.scale = clamp_min(raw, kScaleFloor);
  return g;
}

DiagGaussian infer_level2(const Tensor& z1, const IdentifierParams& params) {
  if (z1.rank() != 2 || z1.cols() != params.domain_mu.in())
    throw ShapeError("infer_level2", z1.shape(), params.domain_mu.weight.shape());
  return {relu(params.domain_mu(z1)), clamp_min(softplus(params.domain_sigma(z1)), kScaleFloor)};
}

DiagGaussian conditional_prior(const Tensor& z1, const IdentifierParams& params, std::size_t latent_dim) {
  if (!params.prior_mu) return DiagGaussian::standard(z1.rows(), latent_dim);
  return {params.prior_mu->operator()(z1), clamp_min(softplus(params.prior_sigma->operator()(z1)), kScaleFloor)};
}

Tensor NoiseSource::standard_normal(const Shape& shape) {
  const auto n = element_count(shape);
  if (frozen_ && cursor_ < tape_.size()) {
    const auto& rec = tape_[cursor_++];
    if (rec.size() != n) throw std::logic_error("NoiseSource: replayed draw has a different size");
    return Tensor::from(shape, rec);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(n);
  for (auto& e : eps) e = normal(rng_);
  if (frozen_) {
    tape_.push_back(eps);
    ++cursor_;
  }
  return Tensor::from(shape, std::move(eps));
}

Tensor sample(const DiagGaussian& g, NoiseSource& noise, bool deterministic) {
  if (deterministic) return g.mean;
  const Tensor eps = noise.standard_normal(g.mean.shape());
  return add(g.mean, mul(g.scale, eps));
}

std::vector<std::size_t> sample_group_indices(std::size_t population, std::size_t n, Rng& rng) {
  if (n < 1 || n > population)
    throw std::invalid_argument("sample_group: N = " + std::to_string(n) + " must lie in [1, " +
                                std::to_string(population) + "]");
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

UserGroup sample_group(const EncodedNodes& encoded, std::size_t n, Rng& rng) {
  UserGroup g;
  g.indices = sample_group_indices(encoded.users.rows(), n, rng);
  g.rows = gather_rows(encoded.users, g.indices);
  return g;
}

}  // namespace prefmatch
