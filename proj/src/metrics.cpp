#include "hargcnn/metrics.hpp"

#include <fmt/format.h>

#include "hargcnn/error.hpp"

namespace hargcnn {

std::string to_string(Averaging a) { return a == Averaging::macro ? "macro" : "micro"; }

Averaging averaging_from_string(const std::string& name) {
  if (name == "macro") return Averaging::macro;
  if (name == "micro") return Averaging::micro;
  fail(ErrorKind::config, fmt::format("unknown averaging '{}' (expected macro or micro)", name));
}

Tensor binarize(const Tensor& scores, bool multilabel, double threshold) {
  Tensor out(scores.shape(), 0.0);
  const auto n = scores.rows(), c = scores.cols();
  for (std::size_t i = 0; i < n; ++i) {
    if (multilabel) {
      for (std::size_t j = 0; j < c; ++j) out(i, j) = scores(i, j) >= threshold ? 1.0 : 0.0;
    } else {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j) {
        if (scores(i, j) > scores(i, best)) best = j;
      }
      out(i, best) = 1.0;
    }
  }
  return out;
}

void ConfusionCounts::add(const Tensor& predictions, const Tensor& truths, std::span<const std::uint8_t> target_mask) {
  if (predictions.shape() != truths.shape()) {
    fail(ErrorKind::dimension, fmt::format("predictions {} vs truths {}", shape_string(predictions.shape()),
                                           shape_string(truths.shape())));
  }
  const auto n = truths.rows(), c = truths.cols();
  if (!target_mask.empty() && target_mask.size() != n) fail(ErrorKind::dimension, fmt::format("mask has {} entries for {} nodes", target_mask.size(), n));
  if (per_class.empty()) per_class.resize(c);
  if (per_class.size() != c) fail(ErrorKind::dimension, fmt::format("counts track {} classes, data has {}", per_class.size(), c));
  for (std::size_t i = 0; i < n; ++i) {
    if (!target_mask.empty() && !target_mask[i]) continue;
    ++targets;
    bool all_right = true;
    for (std::size_t j = 0; j < c; ++j) {
      const bool p = predictions(i, j) >= 0.5;
      const bool t = truths(i, j) >= 0.5;
      auto& k = per_class[j];
      if (p && t) ++k.tp;
      else if (p) ++k.fp;
      else if (t) ++k.fn;
      else ++k.tn;
      all_right = all_right && p == t;
    }
    if (all_right) ++exact_match;
  }
}

ConfusionCounts& ConfusionCounts::merge(const ConfusionCounts& other) {
  if (per_class.empty()) per_class.resize(other.per_class.size());
  if (!other.per_class.empty() && per_class.size() != other.per_class.size()) {
    fail(ErrorKind::dimension, "cannot merge counts over different class sets");
  }
  for (std::size_t j = 0; j < other.per_class.size(); ++j) {
    per_class[j].tp += other.per_class[j].tp;
    per_class[j].fp += other.per_class[j].fp;
    per_class[j].fn += other.per_class[j].fn;
    per_class[j].tn += other.per_class[j].tn;
  }
  targets += other.targets;
  exact_match += other.exact_match;
  return *this;
}

double f1_score(const ClassCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

MetricsReport finalize_report(const ConfusionCounts& counts, bool multilabel, Averaging averaging) {
  if (counts.targets == 0) fail(ErrorKind::no_targets, "no hidden nodes to score");
  MetricsReport r;
  r.multilabel = multilabel;
  r.averaging = averaging;
  r.hidden_node_count = counts.targets;
  ClassCounts pooled;
  double f1_sum = 0.0, acc_sum = 0.0;
  for (const auto& c : counts.per_class) {
    ClassMetrics m;
    m.counts = c;
    m.f1 = f1_score(c);
    m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(counts.targets);
    f1_sum += m.f1;
    acc_sum += m.acc;
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    r.per_class.push_back(m);
  }
  const auto classes = static_cast<double>(counts.per_class.size());
  r.macro_f1 = averaging == Averaging::macro ? f1_sum / classes : f1_score(pooled);
  r.mean_acc = multilabel ? acc_sum / classes
                          : static_cast<double>(counts.exact_match) / static_cast<double>(counts.targets);
  return r;
}

MetricsReport compute_report(const Tensor& predictions, const Tensor& truths, std::span<const std::uint8_t> target_mask,
                             bool multilabel, Averaging averaging) {
  ConfusionCounts counts(truths.cols());
  counts.add(predictions, truths, target_mask);
  return finalize_report(counts, multilabel, averaging);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t j = 0; j < per_class.size(); ++j) {
    const auto& m = per_class[j];
    classes.push_back({{"class", j}, {"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn},
                       {"tn", m.counts.tn}, {"f1", m.f1}, {"acc", m.acc}});
  }
  return {{"f1", macro_f1},
          {"averaging", to_string(averaging)},
          {"mean_acc", mean_acc},
          {"hidden_node_count", hidden_node_count},
          {"multilabel", multilabel},
          {"per_class", classes}};
}

std::string MetricsReport::cell() const { return fmt::format("{:.3f} / {:.2f}", macro_f1, 100.0 * mean_acc); }

std::string MetricsReport::table() const {
  std::string out = fmt::format("{:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}\n", "class", "tp", "fp", "fn", "tn", "f1", "acc%");
  for (std::size_t j = 0; j < per_class.size(); ++j) {
    const auto& m = per_class[j];
    out += fmt::format("{:>5} {:>7} {:>7} {:>7} {:>7} {:>7.3f} {:>8.2f}\n", j, m.counts.tp, m.counts.fp, m.counts.fn,
                       m.counts.tn, m.f1, 100.0 * m.acc);
  }
  out += fmt::format("{} F1 / Acc over {} hidden nodes: {}\n", to_string(averaging), hidden_node_count, cell());
  return out;
}

}  // namespace hargcnn
