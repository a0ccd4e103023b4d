#include "prefmatch/layers.hpp"

#include <cmath>

namespace prefmatch {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Dense Dense::init(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d;
  d.weight = uniform_param({in, out}, bound, rng);
  if (with_bias) d.bias = uniform_param({1, out}, bound, rng);
  return d;
}

Tensor Dense::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in()) throw ShapeError("dense", x.shape(), weight.shape());
  auto y = matmul(x, weight);
  return bias.defined() ? add_row(y, bias) : y;
}

void Dense::collect(std::vector<NamedParam>& out, const std::string& name, ParamGroup group) const {
  out.push_back({name + ".weight", weight, group});
  if (bias.defined()) out.push_back({name + ".bias", bias, group});
}

}  // namespace prefmatch
