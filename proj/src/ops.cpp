#include "prefmatch/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace prefmatch {
namespace {

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(op, a.shape(), {});
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

bool tracks(std::initializer_list<const Tensor*> ts) {
  for (auto* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Elementwise unary op; `deriv(x, y)` returns dy/dx.
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  if (!a.requires_grad()) return Tensor::make_result(op, a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result(op, a.shape(), std::move(out), {a}, [a, deriv](const Node& self) {
    Node& an = a.node();
    an.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i)
      an.grad[i] += self.grad[i] * deriv(an.value[i], self.value[i]);
  });
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c (m x k) += a (m x n) * b^T where b is k x n
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      c[i * k + p] += s;
    }
  }
}

// c (k x n) += a^T * b where a is m x k, b is m x n
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  if (!tracks({&a, &b})) return Tensor::make_result("matmul", {m, n}, std::move(out), {}, nullptr);
  return Tensor::make_result("matmul", {m, n}, std::move(out), {a, b}, [a, b, m, k, n](const Node& self) {
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      gemm_nt_acc(self.grad.data(), b.values().data(), an.grad.data(), m, n, k);
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      gemm_tn_acc(a.values().data(), self.grad.data(), bn.grad.data(), m, k, n);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt", a.shape(), b.shape());
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  std::vector<double> out(m * k, 0.0);
  gemm_nt_acc(a.values().data(), b.values().data(), out.data(), m, n, k);
  if (!tracks({&a, &b})) return Tensor::make_result("matmul_nt", {m, k}, std::move(out), {}, nullptr);
  return Tensor::make_result("matmul_nt", {m, k}, std::move(out), {a, b}, [a, b, m, n, k](const Node& self) {
    // out = a b^T: da = g b, db = g^T a
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      gemm_acc(self.grad.data(), b.values().data(), an.grad.data(), m, k, n);
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      gemm_tn_acc(self.grad.data(), a.values().data(), bn.grad.data(), m, k, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  if (!a.requires_grad()) return Tensor::make_result("transpose", {n, m}, std::move(out), {}, nullptr);
  return Tensor::make_result("transpose", {n, m}, std::move(out), {a}, [a, m, n](const Node& self) {
    Node& an = a.node();
    an.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != m) throw ShapeError("concat_cols", parts[0].shape(), p.shape());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  bool any = false;
  for (const auto& p : parts) {
    const std::size_t n = p.cols();
    const auto pv = p.values();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(pv.data() + i * n, n, out.data() + i * total + off);
    offsets.push_back(off);
    off += n;
    any = any || p.requires_grad();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  if (!any) return Tensor::make_result("concat_cols", {m, total}, std::move(out), {}, nullptr);
  return Tensor::make_result("concat_cols", {m, total}, std::move(out), inputs,
                             [inputs, offsets, m, total](const Node& self) {
                               for (std::size_t t = 0; t < inputs.size(); ++t) {
                                 if (!inputs[t].requires_grad()) continue;
                                 Node& pn = inputs[t].node();
                                 pn.ensure_grad();
                                 const std::size_t n = inputs[t].cols();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j)
                                     pn.grad[i * n + j] += self.grad[i * total + offsets[t] + j];
                               }
                             });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  bool any = false;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != n) throw ShapeError("concat_rows", parts[0].shape(), p.shape());
    total += p.rows();
    any = any || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  if (!any) return Tensor::make_result("concat_rows", {total, n}, std::move(out), {}, nullptr);
  return Tensor::make_result("concat_rows", {total, n}, std::move(out), inputs, [inputs](const Node& self) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      const std::size_t len = p.numel();
      if (p.requires_grad()) {
        Node& pn = p.node();
        pn.ensure_grad();
        for (std::size_t i = 0; i < len; ++i) pn.grad[i] += self.grad[off + i];
      }
      off += len;
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", a);
  if (begin >= end || end > a.cols()) throw ShapeError("slice_cols", a.shape(), {begin, end});
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  const auto av = a.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(av.data() + i * n + begin, w, out.data() + i * w);
  if (!a.requires_grad()) return Tensor::make_result("slice_cols", {m, w}, std::move(out), {}, nullptr);
  return Tensor::make_result("slice_cols", {m, w}, std::move(out), {a}, [a, m, n, w, begin](const Node& self) {
    Node& an = a.node();
    an.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) an.grad[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_matrix("gather_rows", a);
  if (rows.empty()) throw ShapeError("gather_rows", a.shape(), {0});
  const std::size_t n = a.cols();
  const auto av = a.values();
  std::vector<double> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) throw ShapeError("gather_rows", a.shape(), {rows[i]});
    std::copy_n(av.data() + rows[i] * n, n, out.data() + i * n);
  }
  if (!a.requires_grad()) return Tensor::make_result("gather_rows", {rows.size(), n}, std::move(out), {}, nullptr);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::make_result("gather_rows", {rows.size(), n}, std::move(out), {a},
                             [a, idx = std::move(idx), n](const Node& self) {
                               Node& an = a.node();
                               an.ensure_grad();
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < n; ++j) an.grad[idx[i] * n + j] += self.grad[i * n + j];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  if (!tracks({&a, &b})) return Tensor::make_result("add", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("add", a.shape(), std::move(out), {a, b}, [a, b](const Node& self) {
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      Node& tn = t->node();
      tn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) tn.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  if (!tracks({&a, &b})) return Tensor::make_result("sub", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("sub", a.shape(), std::move(out), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  if (!tracks({&a, &b})) return Tensor::make_result("mul", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("mul", a.shape(), std::move(out), {a, b}, [a, b](const Node& self) {
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      const auto bv = b.values();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] * bv[i];
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      const auto av = a.values();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] += self.grad[i] * av[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  if (!tracks({&a, &b})) return Tensor::make_result("div", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("div", a.shape(), std::move(out), {a, b}, [a, b](const Node& self) {
    const auto bv = b.values();
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] / bv[i];
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] -= self.grad[i] * self.value[i] / bv[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_matrix("add_row", a);
  if (row.rank() != 2 || row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row", a.shape(), row.shape());
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto rv = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  if (!tracks({&a, &row})) return Tensor::make_result("add_row", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("add_row", a.shape(), std::move(out), {a, row}, [a, row, m, n](const Node& self) {
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    }
    if (row.requires_grad()) {
      Node& rn = row.node();
      rn.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) rn.grad[j] += self.grad[i * n + j];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary(
      "clamp_min", a, [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Tensor softmax(const Tensor& a, int axis) {
  require_matrix("softmax", a);
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  const std::size_t m = a.rows(), n = a.cols();
  // Treat axis 0 as rows of the transpose via strides.
  const std::size_t lines = axis == 1 ? m : n, len = axis == 1 ? n : m;
  const std::size_t line_stride = axis == 1 ? n : 1, elem_stride = axis == 1 ? 1 : n;
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t base = l * line_stride;
    double mx = av[base];
    for (std::size_t e = 1; e < len; ++e) mx = std::max(mx, av[base + e * elem_stride]);
    double z = 0.0;
    for (std::size_t e = 0; e < len; ++e) {
      const double v = std::exp(av[base + e * elem_stride] - mx);
      out[base + e * elem_stride] = v;
      z += v;
    }
    for (std::size_t e = 0; e < len; ++e) out[base + e * elem_stride] /= z;
  }
  if (!a.requires_grad()) return Tensor::make_result("softmax", a.shape(), std::move(out), {}, nullptr);
  return Tensor::make_result("softmax", a.shape(), std::move(out), {a},
                             [a, lines, len, line_stride, elem_stride](const Node& self) {
                               Node& an = a.node();
                               an.ensure_grad();
                               for (std::size_t l = 0; l < lines; ++l) {
                                 const std::size_t base = l * line_stride;
                                 double dot = 0.0;
                                 for (std::size_t e = 0; e < len; ++e) {
                                   const auto k = base + e * elem_stride;
                                   dot += self.grad[k] * self.value[k];
                                 }
                                 for (std::size_t e = 0; e < len; ++e) {
                                   const auto k = base + e * elem_stride;
                                   an.grad[k] += self.value[k] * (self.grad[k] - dot);
                                 }
                               }
                             });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  if (!a.requires_grad()) return Tensor::make_result("sum", {1, 1}, {s}, {}, nullptr);
  return Tensor::make_result("sum", {1, 1}, {s}, {a}, [a](const Node& self) {
    Node& an = a.node();
    an.ensure_grad();
    for (auto& g : an.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor row_sum(const Tensor& a) {
  require_matrix("row_sum", a);
  const std::size_t m = a.rows(), n = a.cols();
  const auto av = a.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  if (!a.requires_grad()) return Tensor::make_result("row_sum", {m, 1}, std::move(out), {}, nullptr);
  return Tensor::make_result("row_sum", {m, 1}, std::move(out), {a}, [a, m, n](const Node& self) {
    Node& an = a.node();
    an.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an.grad[i * n + j] += self.grad[i];
  });
}

Tensor row_mean(const Tensor& a) { return scale(row_sum(a), 1.0 / static_cast<double>(a.cols())); }

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_matrix("row_dot", a);
  require_same("row_dot", a, b);
  const std::size_t m = a.rows(), n = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += av[i * n + j] * bv[i * n + j];
    out[i] = s;
  }
  if (!tracks({&a, &b})) return Tensor::make_result("row_dot", {m, 1}, std::move(out), {}, nullptr);
  return Tensor::make_result("row_dot", {m, 1}, std::move(out), {a, b}, [a, b, m, n](const Node& self) {
    if (a.requires_grad()) {
      Node& an = a.node();
      an.ensure_grad();
      const auto bv = b.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an.grad[i * n + j] += self.grad[i] * bv[i * n + j];
    }
    if (b.requires_grad()) {
      Node& bn = b.node();
      bn.ensure_grad();
      const auto av = a.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bn.grad[i * n + j] += self.grad[i] * av[i * n + j];
    }
  });
}

Tensor dropout(const Tensor& a, double rate, bool train, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  if (rng == nullptr) throw std::invalid_argument("dropout in train mode needs an rng stream");
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.numel());
  for (auto& m : mask) m = keep(*rng) ? inv : 0.0;
  return mul(a, Tensor::from(a.shape(), std::move(mask)));
}

}  // namespace prefmatch
