#include "prefmatch/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "prefmatch/matching.hpp"

namespace prefmatch {

double score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("score", {1, a.size()}, {1, b.size()});
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot >= 0.0 ? 1.0 / (1.0 + std::exp(-dot)) : std::exp(dot) / (1.0 + std::exp(dot));
}

Tensor pair_logits(const Tensor& users, const Tensor& items) { return row_dot(users, items); }

void PairBatch::add(std::size_t user, std::size_t item, double label, double weight) {
  users.push_back(user);
  items.push_back(item);
  labels.push_back(label);
  weights.push_back(weight);
}

void PairBatch::validate(std::size_t user_rows, std::size_t item_rows) const {
  if (users.empty()) throw std::invalid_argument("reconstruction: empty pair set");
  if (items.size() != users.size() || labels.size() != users.size() || weights.size() != users.size())
    throw std::invalid_argument("reconstruction: pair arrays differ in length");
  if (!(normalizer > 0.0)) throw std::invalid_argument("reconstruction: normalizer must be positive");
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i] >= user_rows || items[i] >= item_rows) throw std::out_of_range("reconstruction: pair index out of range");
    if (labels[i] != 0.0 && labels[i] != 1.0) throw std::invalid_argument("reconstruction: labels must be 0 or 1");
  }
}

PairBatch sampled_pairs(const BipartiteGraph& graph, std::span<const EdgeRef> edges, std::size_t negatives, Rng& rng) {
  PairBatch b;
  for (const auto& e : edges) {
    b.add(e.user, e.item, 1.0);
    const auto pos = graph.positives(e.user);
    const std::size_t n = std::min(negatives, graph.item_count() - pos.size());
    if (n == 0) continue;
    for (auto v : sample_negatives(pos, graph.item_count(), n, rng)) b.add(e.user, v, 0.0);
  }
  b.normalizer = static_cast<double>(b.size());
  return b;
}

PairBatch exact_pairs(const BipartiteGraph& graph) {
  PairBatch b;
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto pos = graph.positives(u);
    for (std::size_t v = 0; v < graph.item_count(); ++v)
      b.add(u, v, std::binary_search(pos.begin(), pos.end(), v) ? 1.0 : 0.0);
  }
  b.normalizer = static_cast<double>(b.size());
  return b;
}

PairBatch importance_pairs(const BipartiteGraph& graph, std::size_t negatives, Rng& rng) {
  PairBatch b;
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const auto pos = graph.positives(u);
    for (auto v : pos) b.add(u, v, 1.0);
    const std::size_t available = graph.item_count() - pos.size();
    const std::size_t n = std::min(negatives, available);
    if (n == 0) continue;
    const double w = static_cast<double>(available) / static_cast<double>(n);
    for (auto v : sample_negatives(pos, graph.item_count(), n, rng)) b.add(u, v, 0.0, w);
  }
  b.normalizer = static_cast<double>(graph.user_count() * graph.item_count());
  return b;
}

Tensor reconstruction_loss(const Tensor& z_users, const Tensor& z_items, const PairBatch& batch) {
  if (z_users.rank() != 2 || z_items.rank() != 2 || z_users.cols() != z_items.cols())
    throw ShapeError("reconstruction_loss", z_users.shape(), z_items.shape());
  batch.validate(z_users.rows(), z_items.rows());
  const Tensor logits = pair_logits(gather_rows(z_users, batch.users), gather_rows(z_items, batch.items));
  const Tensor labels = Tensor::from({batch.size(), 1}, batch.labels);
  const Tensor weights = Tensor::from({batch.size(), 1}, batch.weights);
  // softplus(x) - y x is -[y log s(x) + (1 - y) log(1 - s(x))].
  const Tensor bce = sub(softplus(logits), mul(labels, logits));
  return scale(sum(mul(weights, bce)), 1.0 / batch.normalizer);
}

void VibWeights::validate() const {
  auto check = [](double b, const char* name) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument(std::string("beta ") + name + " must be >= 0");
  };
  check(beta, "");
  for (const auto* o : {&user_source, &item_source, &user_target, &item_target, &domain_source, &domain_target})
    if (*o) check(**o, "override");
}

namespace {

Tensor prior_kl(const DiagGaussian& q) {
  return gaussian_kl(q, DiagGaussian::standard(q.rows(), q.cols()));
}

Tensor weighted(const Tensor& t, double w) { return w == 1.0 ? t : scale(t, w); }

}  // namespace

Tensor user_vib_loss(const UserVibInputs& in, double beta_user, double beta_item) {
  Tensor loss = reconstruction_loss(in.user_samples, in.item_samples, in.batch);
  if (beta_user != 0.0) loss = add(loss, weighted(prior_kl(in.user_posterior), beta_user));
  if (beta_item != 0.0) loss = add(loss, weighted(prior_kl(in.item_posterior), beta_item));
  return loss;
}

Tensor domain_vib_loss(const DomainVibSide& source, const DomainVibSide& target, const Tensor& joint_items,
                       double beta_source, double beta_target) {
  Tensor loss = add(reconstruction_loss(source.samples, joint_items, source.batch),
                    reconstruction_loss(target.samples, joint_items, target.batch));
  if (beta_source != 0.0) loss = add(loss, weighted(gaussian_kl(source.posterior, source.prior), beta_source));
  if (beta_target != 0.0) loss = add(loss, weighted(gaussian_kl(target.posterior, target.prior), beta_target));
  return loss;
}

namespace {

std::vector<std::size_t> shifted(std::span<const std::size_t> pos, std::size_t offset) {
  std::vector<std::size_t> out(pos.begin(), pos.end());
  for (auto& v : out) v += offset;
  return out;
}

void check_joint(const BipartiteGraph& graph, std::size_t offset, std::size_t joint_items) {
  if (offset + graph.item_count() > joint_items)
    throw std::out_of_range("cross_domain_pairs: domain items exceed the joint item space");
}

}  // namespace

PairBatch cross_domain_pairs(const BipartiteGraph& graph, std::span<const std::size_t> group, std::size_t offset,
                             std::size_t joint_items, std::size_t negatives, Rng& rng) {
  check_joint(graph, offset, joint_items);
  PairBatch b;
  for (std::size_t n = 0; n < group.size(); ++n) {
    const auto pos = shifted(graph.positives(group[n]), offset);
    for (auto v : pos) b.add(n, v, 1.0);
    const std::size_t count = std::min(negatives * pos.size(), joint_items - pos.size());
    if (count == 0) continue;
    for (auto v : sample_negatives(pos, joint_items, count, rng)) b.add(n, v, 0.0);
  }
  b.normalizer = static_cast<double>(b.size());
  return b;
}

PairBatch exact_cross_domain_pairs(const BipartiteGraph& graph, std::span<const std::size_t> group,
                                   std::size_t offset, std::size_t joint_items) {
  check_joint(graph, offset, joint_items);
  PairBatch b;
  for (std::size_t n = 0; n < group.size(); ++n) {
    const auto pos = shifted(graph.positives(group[n]), offset);
    for (std::size_t v = 0; v < joint_items; ++v)
      b.add(n, v, std::binary_search(pos.begin(), pos.end(), v) ? 1.0 : 0.0);
  }
  b.normalizer = static_cast<double>(b.size());
  return b;
}

TotalLoss total_loss(const LossTerms& terms, std::size_t epoch, std::size_t warmup) {
  struct Term {
    const Tensor* t;
    const char* name;
    double* slot;
  };
  TotalLoss out;
  auto& br = out.breakdown;
  const Term all[] = {{&terms.matching, "L_m", &br.matching},
                      {&terms.domain, "L_d", &br.domain},
                      {&terms.user_source, "L_u_source", &br.user_source},
                      {&terms.user_target, "L_u_target", &br.user_target}};
  Tensor objective;
  for (const auto& term : all) {
    if (!term.t->defined()) continue;
    const double v = term.t->item();
    if (!std::isfinite(v)) throw NumericError("total_loss", std::string(term.name) + " is not finite");
    *term.slot = v;
    if (term.t == &terms.matching && epoch < warmup) continue;
    objective = objective.defined() ? add(objective, *term.t) : *term.t;
  }
  br.total = br.matching + br.domain + br.user_source + br.user_target;
  out.objective = objective.defined() ? objective : Tensor::scalar(0.0);
  return out;
}

}  // namespace prefmatch
