#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hargcnn/autograd.hpp"
#include "hargcnn/corruption.hpp"
#include "hargcnn/graph.hpp"
#include "hargcnn/tensor.hpp"

namespace hargcnn {

enum class ModelKind { har_gcnn, cnn_baseline, lstm_baseline };

std::string to_string(ModelKind kind);
/// Accepts the short CLI names (gcnn, cnn, lstm) as well as the full ones.
ModelKind model_kind_from_string(const std::string& name);
std::string display_name(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::har_gcnn;
  int features = 0;
  int classes = 0;
  bool multilabel = true;
  int hidden = 32;  // channel width of the graph/conv stacks
  int kernel = 1;   // node-axis conv kernel (odd); padding is (kernel-1)/2
  AdjacencyVariant adjacency = AdjacencyVariant::as_written;
  int lstm_hidden = 12;

  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Budget-matched defaults. The Extra-Sensory shape (F=224, C=51) gets the
/// ~15k configuration; every other shape gets the ~5k (PAMAP-sized) one.
ModelSpec default_spec(ModelKind kind, int features, int classes, bool multilabel);

/// Exact number of scalar parameters (weights, biases, PReLU slopes).
std::size_t param_count(const ModelSpec& spec);

/// 15000 for F=224/C=51, 5000 for F=52/C=12, nothing otherwise.
std::optional<std::size_t> param_budget(int features, int classes);

/// Scores for each node: sigmoid outputs (multi-label) or softmax rows.
struct ModelOutput {
  Tensor logits;
  Tensor scores;
};

/// A model is its spec plus an ordered list of named parameters. Forward
/// passes never mutate the model, so `predict` may run concurrently.
class Model {
 public:
  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); PReLU slopes 0.25.
  static Model create(const ModelSpec& spec, std::uint64_t seed);
  /// Rebuild from stored tensors; names and shapes must match the spec layout.
  static Model from_parameters(const ModelSpec& spec, std::vector<Parameter> params);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }
  const Parameter& parameter(const std::string& name) const;
  Parameter& parameter(const std::string& name);
  void zero_grad();

  /// Record the forward pass on `tape` (parameters as gradient leaves) and
  /// return the logits. `input` is n x (F + C).
  Var forward(Tape& tape, const Tensor& input);
  /// Read-only forward.
  ModelOutput predict(const Tensor& input) const;
  ModelOutput predict(const CorruptedGraph& graph) const { return predict(graph.model_input()); }

  /// Output activation matching the spec (sigmoid or row softmax) on a tape.
  Var activate(Var logits) const;

  void check_input(const Tensor& input) const;

 private:
  Model(ModelSpec spec, std::vector<Parameter> params);

  template <typename Bind>
  Var forward_impl(Tape& tape, const Tensor& input, Bind&& bind) const;

  ModelSpec spec_;
  std::vector<Parameter> params_;
};

/// GCNN(V) = sigma(A_norm V W + b), with sigma = PReLU(alpha) when given.
Var gcnn_layer(Var v, const NormalizedAdjacency& adjacency, Var w, Var b, const Var* alpha = nullptr);
Tensor gcnn_layer_forward(const Tensor& v, const NormalizedAdjacency& adjacency, const Tensor& w, const Tensor& b);

/// One LSTM step for a single row input; gate order i, f, g, o. `w_ih` is
/// d_in x 4g, `w_hh` is g x 4g, `b` is 4g.
struct LstmState {
  Var h;
  Var c;
};
LstmState lstm_cell(Var x, const LstmState& prev, Var w_ih, Var w_hh, Var b, std::size_t hidden);

}  // namespace hargcnn
