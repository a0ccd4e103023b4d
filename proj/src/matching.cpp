#include "prefmatch/matching.hpp"

#include <cmath>

namespace prefmatch {

MatchingParams MatchingParams::init(const MatchingConfig& c, Rng& rng) {
  if (c.heads < 1 || c.width % c.heads != 0)
    throw std::invalid_argument("matching: width " + std::to_string(c.width) + " is not divisible by " +
                                std::to_string(c.heads) + " heads");
  MatchingParams p;
  p.driven = Dense::init(2 * c.latent_dim, c.width, rng);
  const std::size_t head_width = c.width / c.heads;
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.width));
  for (std::size_t h = 0; h < c.heads; ++h)
    p.heads.push_back({uniform_param({c.width, head_width}, bound, rng), uniform_param({c.width, head_width}, bound, rng),
                       uniform_param({c.width, head_width}, bound, rng)});
  p.attention_out = uniform_param({c.width, c.width}, bound, rng);
  p.source_mu = Dense::init(c.width, c.latent_dim, rng);
  p.source_sigma = Dense::init(c.width, c.latent_dim, rng);
  p.target_mu = Dense::init(c.width, c.latent_dim, rng);
  p.target_sigma = Dense::init(c.width, c.latent_dim, rng);
  return p;
}

void MatchingParams::collect(std::vector<NamedParam>& out, const std::string& prefix) const {
  const auto g = ParamGroup::Matching;
  driven.collect(out, prefix + "driven", g);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto name = prefix + "head" + std::to_string(h + 1);
    out.push_back({name + ".query", heads[h].query, g});
    out.push_back({name + ".key", heads[h].key, g});
    out.push_back({name + ".value", heads[h].value, g});
  }
  out.push_back({prefix + "attention_out", attention_out, g});
  source_mu.collect(out, prefix + "source_mu", g);
  source_sigma.collect(out, prefix + "source_sigma", g);
  target_mu.collect(out, prefix + "target_mu", g);
  target_sigma.collect(out, prefix + "target_sigma", g);
}

Tensor self_attention(const Tensor& x, const MatchingParams& params, const DropoutContext& dropout) {
  if (x.rank() != 2 || x.cols() != params.width())
    throw ShapeError("self_attention", x.shape(), params.attention_out.shape());
  std::vector<Tensor> outs;
  outs.reserve(params.heads.size());
  for (const auto& head : params.heads) {
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head.query.cols()));
    const Tensor q = matmul(x, head.query);
    const Tensor k = matmul(x, head.key);
    const Tensor v = matmul(x, head.value);
    const Tensor weights = dropout.apply(softmax(scale(matmul_nt(q, k), inv_sqrt), 1));
    outs.push_back(matmul(weights, v));
  }
  const Tensor merged = outs.size() == 1 ? outs[0] : concat_cols(outs);
  return add(x, matmul(merged, params.attention_out));
}

Tensor driven_representation(const Tensor& z2_source, const Tensor& z2_target, View view, const MatchingParams& params,
                             const DropoutContext& dropout) {
  if (z2_source.rank() != 2 || z2_target.rank() != 2 || z2_source.rows() != z2_target.rows())
    throw ShapeError("driven_representation", z2_source.shape(), z2_target.shape());
  const Tensor joined = view == View::Source ? concat_cols({z2_source, z2_target}) : concat_cols({z2_target, z2_source});
  return self_attention(params.driven(joined), params, dropout);
}

DiagGaussian predictive_distribution(const Tensor& driven, View view, const MatchingParams& params) {
  const Dense& mu = view == View::Source ? params.source_mu : params.target_mu;
  const Dense& sigma = view == View::Source ? params.source_sigma : params.target_sigma;
  if (driven.rank() != 2 || driven.cols() != mu.in())
    throw ShapeError("predictive_distribution", driven.shape(), mu.weight.shape());
  return {relu(mu(driven)), clamp_min(softplus(sigma(driven)), kScaleFloor)};
}

InvariantPreference invariant_preference(const Tensor& z2_source, const Tensor& z2_target,
                                         const MatchingParams& params, const DropoutContext& dropout) {
  InvariantPreference inv;
  inv.source = predictive_distribution(driven_representation(z2_source, z2_target, View::Source, params, dropout),
                                       View::Source, params);
  inv.target = predictive_distribution(driven_representation(z2_source, z2_target, View::Target, params, dropout),
                                       View::Target, params);
  return inv;
}

Tensor gaussian_kl(const DiagGaussian& p, const DiagGaussian& q) {
  if (p.mean.shape() != q.mean.shape()) throw ShapeError("gaussian_kl", p.mean.shape(), q.mean.shape());
  p.validate();
  q.validate();
  const Tensor log_ratio = log(div(q.scale, p.scale));
  const Tensor spread = div(add(square(p.scale), square(sub(p.mean, q.mean))), scale(square(q.scale), 2.0));
  const Tensor per_entry = add_scalar(add(log_ratio, spread), -0.5);
  return scale(sum(per_entry), 1.0 / static_cast<double>(p.rows()));
}

Tensor matching_loss(const InvariantPreference& inv) {
  return scale(add(gaussian_kl(inv.source, inv.target), gaussian_kl(inv.target, inv.source)), 0.5);
}

}  // namespace prefmatch
