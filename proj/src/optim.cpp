#include "hargcnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  fail(ErrorKind::config, fmt::format("unknown optimizer '{}' (expected adam or sgd)", name));
}

namespace {

void check_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::config, fmt::format("learning rate must be > 0, got {}", lr));
}

void ensure_state(std::vector<Tensor>& state, std::span<Parameter> params) {
  if (state.empty()) {
    state.reserve(params.size());
    for (const auto& p : params) state.push_back(Tensor::zeros_like(p.value));
    return;
  }
  if (state.size() != params.size()) fail(ErrorKind::state, "optimizer parameter list changed between steps");
}

}  // namespace

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  check_lr(lr);
  if (momentum < 0.0 || momentum >= 1.0) fail(ErrorKind::config, fmt::format("momentum must be in [0,1), got {}", momentum));
}

void Sgd::step(std::span<Parameter> params) {
  if (momentum_ == 0.0) {
    for (auto& p : params) {
      auto v = p.value.data();
      const auto g = p.grad.data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
    }
    return;
  }
  ensure_state(velocity_, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto v = params[k].value.data();
    const auto g = params[k].grad.data();
    auto vel = velocity_[k].data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      vel[i] = momentum_ * vel[i] + g[i];
      v[i] -= lr_ * vel[i];
    }
  }
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  check_lr(lr);
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || !(eps > 0.0)) {
    fail(ErrorKind::config, "adam needs beta1, beta2 in [0,1) and eps > 0");
  }
}

void Adam::step(std::span<Parameter> params) {
  ensure_state(m_, params);
  ensure_state(v_, params);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].value.data();
    const auto g = params[k].grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr, double momentum) {
  if (kind == OptimizerKind::adam) return std::make_unique<Adam>(lr);
  return std::make_unique<Sgd>(lr, momentum);
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<Parameter> params, int probes_per_tensor,
                           double h, std::uint64_t seed) {
  if (probes_per_tensor <= 0) fail(ErrorKind::config, "grad_check needs at least one probe per tensor");
  if (!(h > 0.0)) fail(ErrorKind::config, "grad_check step h must be positive");

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (auto& p : params) {
    const std::size_t size = p.value.size();
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (size > static_cast<std::size_t>(probes_per_tensor)) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(probes_per_tensor));
    }
    for (std::size_t i : idx) {
      const double original = p.value[i];
      p.value[i] = original + h;
      const double up = loss();
      p.value[i] = original - h;
      const double down = loss();
      p.value[i] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      const double err = std::abs(analytic - numeric) / denom;
      ++report.probes;
      if (err > report.max_rel_error || report.probes == 1) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace hargcnn
