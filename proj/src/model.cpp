#include "prefmatch/model.hpp"

#include <algorithm>
#include <map>

namespace prefmatch {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::Full;
  if (name == "A") return Variant::A;
  if (name == "B") return Variant::B;
  if (name == "C") return Variant::C;
  if (name == "D") return Variant::D;
  throw std::invalid_argument("unknown variant '" + name + "' (expected full, A, B, C or D)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full:
      return "full";
    case Variant::A:
      return "A";
    case Variant::B:
      return "B";
    case Variant::C:
      return "C";
    case Variant::D:
      return "D";
  }
  return "full";
}

IdentifierConfig ModelConfig::identifier() const {
  IdentifierConfig c;
  c.width = width();
  c.latent_dim = encoder.dim;
  c.sigma1 = sigma1;
  c.sigma1_scale = sigma1_scale;
  c.learned_prior = learned_prior;
  c.leaky_slope = encoder.leaky_slope;
  return c;
}

MatchingConfig ModelConfig::matching() const {
  MatchingConfig c;
  c.width = width();
  c.latent_dim = encoder.dim;
  c.heads = heads;
  c.attention_dropout = encoder.dropout;
  return c;
}

void ModelConfig::validate() const {
  if (encoder.layers < 1) throw std::invalid_argument("model.layers must be >= 1");
  if (encoder.dim < 1) throw std::invalid_argument("model.dim must be >= 1");
  if (!(encoder.dropout >= 0.0 && encoder.dropout < 1.0)) throw std::invalid_argument("model.dropout must lie in [0, 1)");
  if (group_size < 1) throw std::invalid_argument("model.group_size must be >= 1");
  if (heads < 1 || width() % heads != 0)
    throw std::invalid_argument("model.heads must divide layers * dim = " + std::to_string(width()));
  if (sigma1_scale < 0.0) throw std::invalid_argument("model.sigma1_scale must be >= 0");
}

ModelParams ModelParams::init(const ModelConfig& config, const DomainPair& pair, Rng& rng) {
  config.validate();
  ModelParams p;
  const auto ic = config.identifier();
  p.source.encoder = EncoderParams::init(pair.source.user_count(), pair.source.item_count(), config.encoder, rng);
  p.source.identifier = IdentifierParams::init(ic, rng);
  p.target.encoder = EncoderParams::init(pair.target.user_count(), pair.target.item_count(), config.encoder, rng);
  p.target.identifier = IdentifierParams::init(ic, rng);
  p.matching = MatchingParams::init(config.matching(), rng);
  p.item_projection = Dense::init(config.width(), config.encoder.dim, rng);
  return p;
}

std::vector<NamedParam> ModelParams::named() const {
  std::vector<NamedParam> out;
  source.encoder.collect(out, "source.encoder.");
  source.identifier.collect(out, "source.identifier.");
  target.encoder.collect(out, "target.encoder.");
  target.identifier.collect(out, "target.identifier.");
  matching.collect(out, "matching.");
  item_projection.collect(out, "item_projection", ParamGroup::Objectives);
  return out;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& p : named()) out.push_back(p.tensor);
  return out;
}

StepBatch sample_step(const DomainPair& pair, const ModelConfig& config, const std::array<std::vector<EdgeRef>, 2>& edges,
                      const StepSampling& sampling, Rng& group_rng, Rng& negative_rng) {
  StepBatch b;
  const std::size_t joint = pair.source.item_count() + pair.target.item_count();
  for (int d = 0; d < 2; ++d) {
    const auto& graph = d == 0 ? pair.source : pair.target;
    if (config.uses_user_terms() || config.variant == Variant::A)
      b.user_pairs[d] = sampling.exact ? exact_pairs(graph) : sampled_pairs(graph, edges[d], sampling.negatives, negative_rng);
    if (config.uses_level2()) {
      if (config.group_size > graph.user_count())
        throw std::invalid_argument("group size N = " + std::to_string(config.group_size) + " exceeds the " +
                                    to_string(d == 0 ? Domain::Source : Domain::Target) + " user count " +
                                    std::to_string(graph.user_count()));
      b.groups[d] = sample_group_indices(graph.user_count(), config.group_size, group_rng);
    }
    if (config.uses_domain_term()) {
      const std::size_t offset = d == 0 ? 0 : pair.source.item_count();
      b.cross_pairs[d] = sampling.exact
                             ? exact_cross_domain_pairs(graph, b.groups[d], offset, joint)
                             : cross_domain_pairs(graph, b.groups[d], offset, joint, sampling.negatives, negative_rng);
    }
  }
  return b;
}

namespace {

Tensor draw(const DiagGaussian& g, const ForwardContext& ctx) {
  return ctx.noise ? sample(g, *ctx.noise) : g.mean;
}

/// Distinct indices in first-seen order and the batch rewritten against them.
struct Compacted {
  std::vector<std::size_t> users, items;
  PairBatch batch;
};

Compacted compact(const PairBatch& in) {
  Compacted c;
  c.batch = in;
  std::map<std::size_t, std::size_t> users, items;
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [u, new_u] = users.try_emplace(in.users[i], c.users.size());
    if (new_u) c.users.push_back(in.users[i]);
    c.batch.users[i] = u->second;
    auto [v, new_v] = items.try_emplace(in.items[i], c.items.size());
    if (new_v) c.items.push_back(in.items[i]);
    c.batch.items[i] = v->second;
  }
  return c;
}

DiagGaussian gather(const DiagGaussian& g, std::span<const std::size_t> rows) {
  return {gather_rows(g.mean, rows), gather_rows(g.scale, rows)};
}

}  // namespace

LossTerms compute_losses(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                         const VibWeights& beta, const StepBatch& batch, const ForwardContext& ctx) {
  LossTerms terms;
  const auto ic = config.identifier();
  std::array<Tensor, 2> z2, projected, user_terms;
  std::array<DiagGaussian, 2> q2, prior;
  for (int d = 0; d < 2; ++d) {
    const Domain domain = d == 0 ? Domain::Source : Domain::Target;
    const auto& graph = pair.graph(domain);
    const auto& dp = params.domain(domain);
    const EncodedNodes enc = encode(graph, dp.encoder, config.encoder, ctx.dropout);
    if (config.variant == Variant::A) {
      user_terms[d] = reconstruction_loss(enc.users, enc.items, batch.user_pairs[d]);
      continue;
    }
    const DiagGaussian q_users = infer_level1(enc.users, dp.identifier, Side::User, ic);
    const DiagGaussian q_items = infer_level1(enc.items, dp.identifier, Side::Item, ic);
    if (config.uses_user_terms()) {
      const auto c = compact(batch.user_pairs[d]);
      const DiagGaussian qu = gather(q_users, c.users);
      const DiagGaussian qv = gather(q_items, c.items);
      const Tensor zu = draw(qu, ctx), zv = draw(qv, ctx);
      user_terms[d] = user_vib_loss({qu, zu, qv, zv, c.batch}, beta.user(domain), beta.item(domain));
    }
    if (config.uses_level2()) {
      const Tensor z1_group = draw(gather(q_users, batch.groups[d]), ctx);
      q2[d] = infer_level2(z1_group, dp.identifier);
      prior[d] = conditional_prior(z1_group, dp.identifier, config.encoder.dim);
      z2[d] = draw(q2[d], ctx);
    }
    if (config.uses_domain_term()) projected[d] = params.item_projection(draw(q_items, ctx));
  }
  terms.user_source = user_terms[0];
  terms.user_target = user_terms[1];
  if (config.uses_domain_term()) {
    const Tensor joint = concat_rows(std::vector<Tensor>{projected[0], projected[1]});
    terms.domain = domain_vib_loss({q2[0], prior[0], z2[0], batch.cross_pairs[0]},
                                   {q2[1], prior[1], z2[1], batch.cross_pairs[1]}, joint,
                                   beta.domain(Domain::Source), beta.domain(Domain::Target));
  }
  if (config.uses_matching())
    terms.matching = matching_loss(invariant_preference(z2[0], z2[1], params.matching, ctx.dropout));
  return terms;
}

Tensor score_cold_users(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                        Direction direction, std::span<const std::vector<std::size_t>> histories) {
  const Domain from = from_domain(direction), to = to_domain(direction);
  const auto& fp = params.domain(from);
  const auto& tp = params.domain(to);
  const auto ic = config.identifier();
  const Tensor users = encode_cold_users(pair.graph(from), fp.encoder, config.encoder, histories);
  const Tensor items = encode(pair.graph(to), tp.encoder, config.encoder).items;
  if (config.variant == Variant::A) return matmul_nt(users, items).detach();
  const Tensor mu1_users = infer_level1(users, fp.identifier, Side::User, ic).mean;
  const Tensor mu1_items = infer_level1(items, tp.identifier, Side::Item, ic).mean;
  if (config.variant == Variant::B) return matmul_nt(mu1_users, mu1_items).detach();
  const Tensor mu2 = infer_level2(mu1_users, fp.identifier).mean;
  return matmul_nt(mu2, params.item_projection(mu1_items)).detach();
}

}  // namespace prefmatch
