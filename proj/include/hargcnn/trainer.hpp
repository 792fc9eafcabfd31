#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hargcnn/checkpoint.hpp"
#include "hargcnn/corruption.hpp"
#include "hargcnn/data.hpp"
#include "hargcnn/metrics.hpp"
#include "hargcnn/models.hpp"
#include "hargcnn/optim.hpp"

namespace hargcnn {

enum class LossTarget { all_nodes, hidden_only };

std::string to_string(LossTarget t);
LossTarget loss_target_from_string(const std::string& name);

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;  // 0 freezes the parameters (no optimizer is built)
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.0;
  int graphs_per_step = 32;
  std::uint64_t seed = 0;
  LossTarget loss_target = LossTarget::all_nodes;
  std::vector<double> eval_missing_fracs{0.33, 0.66};
  int repeats = 3;
  CorruptionConfig corruption;  // training-time label hiding and feature noise
  bool zero_all_labels = false;  // ablation: the model never sees any label
  std::int64_t max_steps = 0;    // 0 = no cap beyond epochs

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // optimizer steps completed
  double mean_loss = 0.0;
  double seconds = 0.0;
  std::optional<MetricsReport> monitor;
};

struct RunHistory {
  std::vector<double> step_loss;
  std::vector<EpochRecord> epochs;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Masks of hidden evaluation targets, fixed once per (test set, frac, seed).
struct EvalMasks {
  double frac = 0.0;
  std::uint64_t seed = 0;
  std::vector<Mask> masks;

  std::uint64_t hash() const;
  nlohmann::json to_json() const;
  static EvalMasks from_json(const nlohmann::json& doc);
  friend bool operator==(const EvalMasks&, const EvalMasks&) = default;
};

/// max(1, round(frac * n)) with at least one node left labeled.
std::size_t eval_hidden_count(std::size_t n, double frac);
/// Graph i's mask depends only on (seed, i, frac).
EvalMasks make_eval_masks(std::span<const ActivityGraph> graphs, double frac, std::uint64_t seed);

struct EvalOptions {
  double threshold = 0.5;
  Averaging averaging = Averaging::macro;
  bool zero_all_labels = false;
  int threads = 1;
};

/// Clean features, labels zeroed at masked nodes, scored on masked nodes only.
ConfusionCounts evaluate_counts(const Model& model, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                                const EvalOptions& opts = {});
MetricsReport evaluate(const Model& model, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                       const EvalOptions& opts = {});
MetricsReport evaluate(const Checkpoint& checkpoint, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                       const EvalOptions& opts = {});

/// Pointwise mean of f1 and accuracy over repeated runs (counts are summed).
MetricsReport mean_report(std::span<const MetricsReport> runs);

/// Loss of one graph on `tape`: BCE on sigmoid scores (multi-label) or CE on
/// logits (single-label), over the selected rows.
Var graph_loss(Tape& tape, Model& model, const Tensor& input, const ActivityGraph& graph,
               std::span<const double> row_weight);
double graph_loss_value(const Model& model, const Tensor& input, const ActivityGraph& graph,
                        std::span<const double> row_weight);

struct TrainResult {
  Checkpoint final_checkpoint;
  Checkpoint best_checkpoint;  // best monitored F1; equals final without a monitor
  int best_epoch = 0;
  RunHistory history;
};

struct Monitor {
  std::span<const ActivityGraph> graphs;
  const EvalMasks* masks = nullptr;
  EvalOptions options;
};

/// Minibatch training. Every step draws graphs_per_step graphs from a seeded
/// shuffle, corrupts them with the training RNG, and averages the per-graph
/// loss against ground truth. Deterministic given cfg.seed and the model's
/// initial parameters.
TrainResult train(Model& model, std::span<const ActivityGraph> graphs, const TrainConfig& cfg,
                  const Monitor* monitor = nullptr, nlohmann::json checkpoint_metadata = nlohmann::json::object());

// ---------------------------------------------------------------------------
// Comparison protocol

struct CompareConfig {
  std::vector<ModelKind> models{ModelKind::har_gcnn, ModelKind::cnn_baseline, ModelKind::lstm_baseline};
  std::vector<int> nodes{3};
  PipelineConfig pipeline;  // `nodes` is overridden per grid row
  TrainConfig train;
  std::uint64_t eval_seed = 0;
  EvalOptions eval;
  AdjacencyVariant adjacency = AdjacencyVariant::as_written;
  std::function<ModelSpec(ModelKind, const DatasetSpec&)> make_spec;  // default_spec when empty
};

struct CompareCell {
  ModelKind model = ModelKind::har_gcnn;
  int nodes = 0;
  double frac = 0.0;
  std::uint64_t mask_hash = 0;
  std::vector<MetricsReport> runs;
  MetricsReport mean;
};

struct CompareTable {
  std::vector<ModelKind> models;
  std::vector<int> nodes;
  std::vector<double> fracs;
  std::vector<CompareCell> cells;  // model-major, then nodes, then frac

  const CompareCell& at(ModelKind model, int nodes, double frac) const;
  std::string text() const;
  nlohmann::json to_json() const;
};

/// Train and score every model kind on identical graphs and identical masks,
/// `repeats` seeds per cell.
CompareTable compare(std::span<const RecordStream> streams, const DatasetSpec& spec, const CompareConfig& cfg);

// ---------------------------------------------------------------------------

/// Finite-difference check of a freshly initialized model on one random graph.
GradCheckReport gradcheck_model(const ModelSpec& spec, std::size_t nodes, std::uint64_t seed,
                                int probes_per_tensor = 20, double h = 1e-5);

}  // namespace hargcnn
