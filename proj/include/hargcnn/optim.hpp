#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hargcnn/tensor.hpp"

namespace hargcnn {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Apply one update using the gradients currently stored in `params`.
  /// The parameter list must be the same (same order, same shapes) on every call.
  virtual void step(std::span<Parameter> params) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr, double momentum = 0.0);
  void step(std::span<Parameter> params) override;

 private:
  double lr_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

/// Adam with bias correction.
class Adam final : public Optimizer {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<Parameter> params) override;

  std::int64_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr, double momentum = 0.0);

inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central-difference verification of analytic gradients.
///
/// `params` must already hold d(loss)/d(theta) in their grad tensors at the
/// current values. For each tensor, up to `probes_per_tensor` distinct entries
/// (all of them when the tensor is smaller) are perturbed by +-h and the
/// relative error |a - n| / max(|a|, |n|, kGradCheckFloor) is recorded. The
/// floor keeps round-off in (L(+h) - L(-h)) / 2h, about 1e-11 at h = 1e-5, from
/// dominating gradients near zero. Values are restored exactly afterwards.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<Parameter> params,
                           int probes_per_tensor = 20, double h = 1e-5, std::uint64_t seed = 0);

}  // namespace hargcnn
