#include "hargcnn/ops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

namespace {

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    fail(ErrorKind::dimension, fmt::format("{} must be a matrix, got {}", what, shape_string(t.shape())));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::dimension,
         fmt::format("{}: shape {} does not match {}", what, shape_string(a.shape()), shape_string(b.shape())));
  }
}

// Transposed products used by the adjoints.
Tensor matmul_at_b(const Tensor& a, const Tensor& b) {  // a^T b
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out({k, m});
  for (std::size_t i = 0; i < n; ++i) {
    const auto ar = a.row(i);
    const auto br = b.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      auto orow = out.row(p);
      for (std::size_t j = 0; j < m; ++j) orow[j] += s * br[j];
    }
  }
  return out;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {  // a b^T
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto br = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) = s;
    }
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> resolve_weights(std::span<const double> row_weight, std::size_t rows) {
  if (row_weight.empty()) return std::vector<double>(rows, 1.0);
  if (row_weight.size() != rows) {
    fail(ErrorKind::dimension, fmt::format("row weights have {} entries for {} rows", row_weight.size(), rows));
  }
  return {row_weight.begin(), row_weight.end()};
}

void check_conv_config(int kernel, int padding) {
  if (kernel <= 0 || kernel % 2 == 0) {
    fail(ErrorKind::config, fmt::format("conv kernel must be odd and positive, got {}", kernel));
  }
  if (padding != (kernel - 1) / 2) {
    fail(ErrorKind::config,
         fmt::format("conv padding must be (kernel-1)/2 = {} to preserve node count, got {}", (kernel - 1) / 2,
                     padding));
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b, int kernel) {
  require_rank2(x, "conv input");
  require_rank2(w, "conv weight");
  const std::size_t d_in = x.cols();
  if (w.rows() != static_cast<std::size_t>(kernel) * d_in || b.size() != w.cols()) {
    fail(ErrorKind::dimension,
         fmt::format("conv with kernel {}: input {} incompatible with weight {} / bias {}", kernel,
                     shape_string(x.shape()), shape_string(w.shape()), shape_string(b.shape())));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul lhs");
  require_rank2(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    fail(ErrorKind::dimension,
         fmt::format("matmul: {} x {} inner dimensions differ", shape_string(a.shape()), shape_string(b.shape())));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const auto ar = a.row(i);
    auto orow = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      const auto br = b.row(p);
      for (std::size_t j = 0; j < m; ++j) orow[j] += s * br[j];
    }
  }
  return out;
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank2(x, "linear input");
  require_rank2(w, "linear weight");
  if (x.cols() != w.rows() || b.size() != w.cols()) {
    fail(ErrorKind::dimension, fmt::format("linear: input {} incompatible with weight {} / bias {}",
                                           shape_string(x.shape()), shape_string(w.shape()),
                                           shape_string(b.shape())));
  }
  Tensor out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  return out;
}

Tensor node_conv(const Tensor& x, const Tensor& w, const Tensor& b, int kernel, int padding) {
  check_conv_config(kernel, padding);
  check_conv_shapes(x, w, b, kernel);
  const std::size_t n = x.rows(), d_in = x.cols(), d_out = w.cols();
  Tensor out({n, d_out});
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::size_t o = 0; o < d_out; ++o) orow[o] = b[o];
    for (int t = 0; t < kernel; ++t) {
      const long src = static_cast<long>(i) + t - padding;
      if (src < 0 || src >= static_cast<long>(n)) continue;
      const auto xr = x.row(static_cast<std::size_t>(src));
      for (std::size_t c = 0; c < d_in; ++c) {
        const double s = xr[c];
        if (s == 0.0) continue;
        const auto wr = w.row(static_cast<std::size_t>(t) * d_in + c);
        for (std::size_t o = 0; o < d_out; ++o) orow[o] += s * wr[o];
      }
    }
  }
  return out;
}

Tensor node_conv(const Tensor& x, const Tensor& w, const Tensor& b, int kernel) {
  return node_conv(x, w, b, kernel, (kernel - 1) / 2);
}

Tensor prelu(const Tensor& x, const Tensor& alpha) {
  if (alpha.size() != x.cols()) {
    fail(ErrorKind::dimension, fmt::format("prelu: {} slopes for input {}", alpha.size(), shape_string(x.shape())));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] < 0.0) r[j] *= alpha[j];
    }
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = stable_sigmoid(v);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (auto& v : r) {
      v = std::exp(v - mx);
      z += v;
    }
    for (auto& v : r) v /= z;
  }
  return out;
}

double bce_loss(const Tensor& pred, const Tensor& target, std::span<const double> row_weight) {
  require_same_shape(pred, target, "bce_loss");
  const auto w = resolve_weights(row_weight, pred.rows());
  double total = 0.0, denom = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    if (w[i] == 0.0) continue;
    const auto pr = pred.row(i);
    const auto tr = target.row(i);
    for (std::size_t j = 0; j < pr.size(); ++j) {
      const double t = tr[j];
      if (t != 0.0 && t != 1.0) fail(ErrorKind::validation, fmt::format("bce target {} is not in {{0,1}}", t));
      const double p = std::clamp(pr[j], kBceEps, 1.0 - kBceEps);
      total += -w[i] * (t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    denom += w[i] * static_cast<double>(pr.size());
  }
  return denom > 0.0 ? total / denom : 0.0;
}

double ce_loss(const Tensor& logits, std::span<const int> classes, std::span<const double> row_weight) {
  require_rank2(logits, "ce_loss logits");
  if (classes.size() != logits.rows()) {
    fail(ErrorKind::dimension, fmt::format("ce_loss: {} classes for {} rows", classes.size(), logits.rows()));
  }
  const auto w = resolve_weights(row_weight, logits.rows());
  const int c_count = static_cast<int>(logits.cols());
  double total = 0.0, denom = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const int c = classes[i];
    if (c < 0 || c >= c_count) {
      fail(ErrorKind::validation, fmt::format("class index {} outside [0, {})", c, c_count));
    }
    if (w[i] == 0.0) continue;
    const auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    total += w[i] * (mx + std::log(z) - r[static_cast<std::size_t>(c)]);
    denom += w[i];
  }
  return denom > 0.0 ? total / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Recorded ops

Var matmul(Var a, Var b) {
  Tape& tape = *a.tape();
  return tape.push(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.needs_grad(a.id())) t.accumulate(a.id(), matmul_a_bt(g, t.value(b.id())));
    if (t.needs_grad(b.id())) t.accumulate(b.id(), matmul_at_b(t.value(a.id()), g));
  });
}

Var left_multiply(const Tensor& m, Var x) {
  Tape& tape = *x.tape();
  return tape.push(matmul(m, x.value()), {x}, [m, x](Tape& t, const Tensor& g) {
    t.accumulate(x.id(), matmul_at_b(m, g));
  });
}

Var add_row_bias(Var x, Var b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.size() != xv.cols()) {
    fail(ErrorKind::dimension,
         fmt::format("bias {} does not match input {}", shape_string(bv.shape()), shape_string(xv.shape())));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv[j];
  }
  return x.tape()->push(std::move(out), {x, b}, [x, b](Tape& t, const Tensor& g) {
    t.accumulate(x.id(), g);
    if (t.needs_grad(b.id())) {
      Tensor& gb = t.grad_slot(b.id());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const auto r = g.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) gb[j] += r[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a.id(), g);
    t.accumulate(b.id(), g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.needs_grad(a.id())) {
      Tensor d = g;
      const Tensor& bv = t.value(b.id());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= bv[i];
      t.accumulate(a.id(), d);
    }
    if (t.needs_grad(b.id())) {
      Tensor d = g;
      const Tensor& av = t.value(a.id());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= av[i];
      t.accumulate(b.id(), d);
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->push(Tensor({1}, std::vector<double>{s}), {x}, [x](Tape& t, const Tensor& g) {
    Tensor d = Tensor::zeros_like(t.value(x.id()));
    d.fill(g[0]);
    t.accumulate(x.id(), d);
  });
}

Var linear(Var x, Var w, Var b) {
  if (x.value().cols() != w.value().rows() || b.value().size() != w.value().cols()) {
    (void)linear_forward(x.value(), w.value(), b.value());  // raises the dimension error
  }
  return add_row_bias(matmul(x, w), b);
}

Var node_conv(Var x, Var w, Var b, int kernel) {
  const int padding = (kernel - 1) / 2;
  Tensor out = node_conv(x.value(), w.value(), b.value(), kernel, padding);
  return x.tape()->push(std::move(out), {x, w, b}, [x, w, b, kernel, padding](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x.id());
    const Tensor& wv = t.value(w.id());
    const std::size_t n = xv.rows(), d_in = xv.cols(), d_out = wv.cols();
    const bool need_x = t.needs_grad(x.id());
    const bool need_w = t.needs_grad(w.id());
    Tensor* gx = need_x ? &t.grad_slot(x.id()) : nullptr;
    Tensor* gw = need_w ? &t.grad_slot(w.id()) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const auto gr = g.row(i);
      for (int tap = 0; tap < kernel; ++tap) {
        const long src = static_cast<long>(i) + tap - padding;
        if (src < 0 || src >= static_cast<long>(n)) continue;
        const auto xr = xv.row(static_cast<std::size_t>(src));
        for (std::size_t c = 0; c < d_in; ++c) {
          const std::size_t wrow = static_cast<std::size_t>(tap) * d_in + c;
          const auto wr = wv.row(wrow);
          if (gw) {
            const double s = xr[c];
            if (s != 0.0) {
              auto gwr = gw->row(wrow);
              for (std::size_t o = 0; o < d_out; ++o) gwr[o] += s * gr[o];
            }
          }
          if (gx) {
            double acc = 0.0;
            for (std::size_t o = 0; o < d_out; ++o) acc += wr[o] * gr[o];
            (*gx)(static_cast<std::size_t>(src), c) += acc;
          }
        }
      }
    }
    if (t.needs_grad(b.id())) {
      Tensor& gb = t.grad_slot(b.id());
      for (std::size_t i = 0; i < n; ++i) {
        const auto gr = g.row(i);
        for (std::size_t o = 0; o < d_out; ++o) gb[o] += gr[o];
      }
    }
  });
}

Var prelu(Var x, Var alpha) {
  return x.tape()->push(prelu(x.value(), alpha.value()), {x, alpha}, [x, alpha](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x.id());
    const Tensor& av = t.value(alpha.id());
    if (t.needs_grad(x.id())) {
      Tensor d = g;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        auto dr = d.row(i);
        const auto xr = xv.row(i);
        for (std::size_t j = 0; j < dr.size(); ++j) {
          if (xr[j] < 0.0) dr[j] *= av[j];
        }
      }
      t.accumulate(x.id(), d);
    }
    if (t.needs_grad(alpha.id())) {
      Tensor& ga = t.grad_slot(alpha.id());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const auto gr = g.row(i);
        const auto xr = xv.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) {
          if (xr[j] < 0.0) ga[j] += gr[j] * xr[j];
        }
      }
    }
  });
}

Var sigmoid(Var x) {
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  return tape.push(sigmoid(x.value()), {x}, [x, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
    t.accumulate(x.id(), d);
  });
}

Var tanh(Var x) {
  Tensor y = x.value();
  for (auto& v : y.data()) v = std::tanh(v);
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  return tape.push(std::move(y), {x}, [x, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - y[i] * y[i];
    t.accumulate(x.id(), d);
  });
}

Var softmax_rows(Var x) {
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  return tape.push(softmax_rows(x.value()), {x}, [x, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor d = g;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      auto dr = d.row(i);
      const auto yr = y.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < dr.size(); ++j) dot += dr[j] * yr[j];
      for (std::size_t j = 0; j < dr.size(); ++j) dr[j] = yr[j] * (dr[j] - dot);
    }
    t.accumulate(x.id(), d);
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.rows() || count == 0) {
    fail(ErrorKind::dimension, fmt::format("row slice [{}, {}) outside {}", begin, begin + count, shape_string(xv.shape())));
  }
  const std::size_t c = xv.cols();
  std::vector<double> data(xv.data().begin() + static_cast<long>(begin * c),
                           xv.data().begin() + static_cast<long>((begin + count) * c));
  return x.tape()->push(Tensor({count, c}, std::move(data)), {x}, [x, begin, count](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(x.id());
    for (std::size_t i = 0; i < count; ++i) {
      auto dst = gx.row(begin + i);
      const auto src = g.row(i);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.cols() || count == 0) {
    fail(ErrorKind::dimension, fmt::format("column slice [{}, {}) outside {}", begin, begin + count, shape_string(xv.shape())));
  }
  Tensor out({xv.rows(), count});
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    const auto src = xv.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < count; ++j) dst[j] = src[begin + j];
  }
  return x.tape()->push(std::move(out), {x}, [x, begin, count](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_slot(x.id());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto dst = gx.row(i);
      const auto src = g.row(i);
      for (std::size_t j = 0; j < count; ++j) dst[begin + j] += src[j];
    }
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) fail(ErrorKind::dimension, "stack_rows needs at least one row");
  Tape& tape = *rows.front().tape();
  const std::size_t c = rows.front().value().cols();
  std::size_t total = 0;
  for (const auto& r : rows) {
    if (r.value().cols() != c) fail(ErrorKind::dimension, "stack_rows: column counts differ");
    total += r.value().rows();
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const auto& r : rows) {
    const auto d = r.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  return tape.push(Tensor({total, c}, std::move(data)), rows, [rows](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const auto& r : rows) {
      const std::size_t n = t.value(r.id()).rows();
      if (t.needs_grad(r.id())) {
        Tensor& gr = t.grad_slot(r.id());
        for (std::size_t i = 0; i < n; ++i) {
          const auto src = g.row(offset + i);
          auto dst = gr.row(i);
          for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
      }
      offset += n;
    }
  });
}

Var bce_loss(Var pred, const Tensor& target, std::span<const double> row_weight) {
  const double value = bce_loss(pred.value(), target, row_weight);
  auto w = resolve_weights(row_weight, pred.value().rows());
  return pred.tape()->push(Tensor({1}, std::vector<double>{value}), {pred},
                           [pred, target, w = std::move(w)](Tape& t, const Tensor& g) {
                             const Tensor& p = t.value(pred.id());
                             double denom = 0.0;
                             for (double wi : w) denom += wi * static_cast<double>(p.cols());
                             if (denom == 0.0) return;
                             Tensor d = Tensor::zeros_like(p);
                             for (std::size_t i = 0; i < p.rows(); ++i) {
                               if (w[i] == 0.0) continue;
                               for (std::size_t j = 0; j < p.cols(); ++j) {
                                 const double pv = p(i, j);
                                 if (pv < kBceEps || pv > 1.0 - kBceEps) continue;  // clamped: flat
                                 const double tv = target(i, j);
                                 d(i, j) = g[0] * w[i] * (-tv / pv + (1.0 - tv) / (1.0 - pv)) / denom;
                               }
                             }
                             t.accumulate(pred.id(), d);
                           });
}

Var ce_loss(Var logits, std::span<const int> classes, std::span<const double> row_weight) {
  const double value = ce_loss(logits.value(), classes, row_weight);
  auto w = resolve_weights(row_weight, logits.value().rows());
  std::vector<int> cls(classes.begin(), classes.end());
  return logits.tape()->push(
      Tensor({1}, std::vector<double>{value}), {logits},
      [logits, cls = std::move(cls), w = std::move(w)](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(logits.id());
        double denom = 0.0;
        for (double wi : w) denom += wi;
        if (denom == 0.0) return;
        Tensor d = softmax_rows(x);
        for (std::size_t i = 0; i < d.rows(); ++i) {
          auto r = d.row(i);
          r[static_cast<std::size_t>(cls[i])] -= 1.0;
          const double scale = g[0] * w[i] / denom;
          for (auto& v : r) v *= scale;
        }
        t.accumulate(logits.id(), d);
      });
}

}  // namespace hargcnn
