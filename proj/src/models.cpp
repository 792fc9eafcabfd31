#include "hargcnn/models.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hargcnn/error.hpp"
#include "hargcnn/ops.hpp"
#include "hargcnn/random.hpp"

namespace hargcnn {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::har_gcnn: return "har_gcnn";
    case ModelKind::cnn_baseline: return "cnn_baseline";
    case ModelKind::lstm_baseline: return "lstm_baseline";
  }
  return "unknown";
}

std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::har_gcnn: return "HAR-GCNN";
    case ModelKind::cnn_baseline: return "CNN";
    case ModelKind::lstm_baseline: return "LSTM";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "gcnn" || name == "har_gcnn" || name == "har-gcnn") return ModelKind::har_gcnn;
  if (name == "cnn" || name == "cnn_baseline") return ModelKind::cnn_baseline;
  if (name == "lstm" || name == "lstm_baseline") return ModelKind::lstm_baseline;
  fail(ErrorKind::config, fmt::format("unknown model '{}' (expected gcnn, cnn or lstm)", name));
}

void ModelSpec::validate() const {
  if (features <= 0 || classes <= 0) {
    fail(ErrorKind::config, fmt::format("model needs F > 0 and C > 0, got F={} C={}", features, classes));
  }
  if (kernel <= 0 || kernel % 2 == 0) fail(ErrorKind::config, fmt::format("conv kernel must be odd and positive, got {}", kernel));
  if (kind == ModelKind::lstm_baseline) {
    if (lstm_hidden <= 0) fail(ErrorKind::config, fmt::format("lstm_hidden must be positive, got {}", lstm_hidden));
  } else if (hidden <= 0) {
    fail(ErrorKind::config, fmt::format("hidden width must be positive, got {}", hidden));
  }
}

ModelSpec default_spec(ModelKind kind, int features, int classes, bool multilabel) {
  const bool large = features == 224 && classes == 51;
  ModelSpec s;
  s.kind = kind;
  s.features = features;
  s.classes = classes;
  s.multilabel = multilabel;
  switch (kind) {
    case ModelKind::har_gcnn:
      s.hidden = large ? 32 : 28;
      s.kernel = 1;
      break;
    case ModelKind::cnn_baseline:
      s.hidden = 14;
      s.kernel = 3;
      break;
    case ModelKind::lstm_baseline:
      s.hidden = large ? 32 : 28;
      s.lstm_hidden = large ? 12 : 16;
      s.kernel = 1;
      break;
  }
  return s;
}

std::optional<std::size_t> param_budget(int features, int classes) {
  if (features == 224 && classes == 51) return 15000;
  if (features == 52 && classes == 12) return 5000;
  return std::nullopt;
}

namespace {

struct Slot {
  std::string name;
  Shape shape;
  std::size_t fan_in = 1;
  bool prelu = false;
};

std::vector<Slot> layout(const ModelSpec& s) {
  s.validate();
  const auto d0 = static_cast<std::size_t>(s.features + s.classes);
  const auto c = static_cast<std::size_t>(s.classes);
  const auto k = static_cast<std::size_t>(s.kernel);
  std::vector<Slot> slots;
  auto conv = [&](const std::string& name, std::size_t d_in, std::size_t d_out, bool with_prelu) {
    slots.push_back({name + ".weight", {k * d_in, d_out}, k * d_in});
    slots.push_back({name + ".bias", {d_out}, k * d_in});
    if (with_prelu) slots.push_back({name + ".prelu", {d_out}, 1, true});
  };

  switch (s.kind) {
    case ModelKind::har_gcnn: {
      const auto h = static_cast<std::size_t>(s.hidden);
      slots.push_back({"gcn.weight", {d0, h}, d0});
      slots.push_back({"gcn.bias", {h}, d0});
      slots.push_back({"gcn.prelu", {h}, 1, true});
      for (int i = 1; i <= 3; ++i) conv(fmt::format("conv{}", i), h, h, true);
      conv("out", h, c, false);
      break;
    }
    case ModelKind::cnn_baseline: {
      const auto h = static_cast<std::size_t>(s.hidden);
      conv("conv1", d0, h, true);
      for (int i = 2; i <= 4; ++i) conv(fmt::format("conv{}", i), h, h, true);
      conv("conv5", h, c, false);
      break;
    }
    case ModelKind::lstm_baseline: {
      const auto g = static_cast<std::size_t>(s.lstm_hidden);
      slots.push_back({"lstm.w_ih", {d0, 4 * g}, d0 + g});
      slots.push_back({"lstm.w_hh", {g, 4 * g}, d0 + g});
      slots.push_back({"lstm.bias", {4 * g}, d0 + g});
      conv("head", g, g, true);
      conv("out", g, c, false);
      break;
    }
  }
  return slots;
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

std::size_t param_count(const ModelSpec& spec) {
  std::size_t total = 0;
  for (const auto& slot : layout(spec)) total += element_count(slot.shape);
  return total;
}

Model::Model(ModelSpec spec, std::vector<Parameter> params) : spec_(spec), params_(std::move(params)) {}

Model Model::create(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Parameter> params;
  for (const auto& slot : layout(spec)) {
    Tensor value(slot.shape);
    if (slot.prelu) {
      value.fill(0.25);
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : value.data()) v = dist(rng);
    }
    params.emplace_back(slot.name, std::move(value));
  }
  return Model(spec, std::move(params));
}

Model Model::from_parameters(const ModelSpec& spec, std::vector<Parameter> params) {
  const auto slots = layout(spec);
  if (slots.size() != params.size()) {
    fail(ErrorKind::validation, fmt::format("{} expects {} parameter tensors, got {}", to_string(spec.kind),
                                            slots.size(), params.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (params[i].name != slots[i].name || params[i].value.shape() != slots[i].shape) {
      fail(ErrorKind::validation,
           fmt::format("parameter {} is '{}' {}, expected '{}' {}", i, params[i].name,
                       shape_string(params[i].value.shape()), slots[i].name, shape_string(slots[i].shape)));
    }
    params[i].grad = Tensor::zeros_like(params[i].value);
  }
  return Model(spec, std::move(params));
}

const Parameter& Model::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  fail(ErrorKind::validation, fmt::format("no parameter named '{}'", name));
}

Parameter& Model::parameter(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const Model&>(*this).parameter(name));
}

void Model::zero_grad() { hargcnn::zero_grad(params_); }

void Model::check_input(const Tensor& input) const {
  const auto width = static_cast<std::size_t>(spec_.features + spec_.classes);
  if (input.rank() != 2 || input.cols() != width) {
    fail(ErrorKind::validation, fmt::format("{} expects n x {} input (F={} + C={}), got {}", to_string(spec_.kind),
                                            width, spec_.features, spec_.classes, shape_string(input.shape())));
  }
}

Var gcnn_layer(Var v, const NormalizedAdjacency& adjacency, Var w, Var b, const Var* alpha) {
  if (adjacency.matrix.rows() != v.value().rows()) {
    fail(ErrorKind::dimension, fmt::format("adjacency {} does not match {} nodes", shape_string(adjacency.matrix.shape()),
                                           v.value().rows()));
  }
  Var z = add_row_bias(left_multiply(adjacency.matrix, matmul(v, w)), b);
  return alpha ? prelu(z, *alpha) : z;
}

Tensor gcnn_layer_forward(const Tensor& v, const NormalizedAdjacency& adjacency, const Tensor& w, const Tensor& b) {
  Tape tape(false);
  return gcnn_layer(tape.constant(v), adjacency, tape.constant(w), tape.constant(b)).value();
}

LstmState lstm_cell(Var x, const LstmState& prev, Var w_ih, Var w_hh, Var b, std::size_t hidden) {
  Var gates = add_row_bias(add(matmul(x, w_ih), matmul(prev.h, w_hh)), b);
  Var i = sigmoid(slice_cols(gates, 0, hidden));
  Var f = sigmoid(slice_cols(gates, hidden, hidden));
  Var g = tanh(slice_cols(gates, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Var c = add(mul(f, prev.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

template <typename Bind>
Var Model::forward_impl(Tape& tape, const Tensor& input, Bind&& bind) const {
  check_input(input);
  const int k = spec_.kernel;
  std::size_t next = 0;
  auto p = [&]() { return bind(next++); };
  Var x = tape.constant(input);

  switch (spec_.kind) {
    case ModelKind::har_gcnn: {
      const auto& adj = normalize_adjacency(static_cast<int>(input.rows()), spec_.adjacency);
      Var w = p(), b = p(), a = p();
      Var h = gcnn_layer(x, adj, w, b, &a);
      for (int layer = 0; layer < 3; ++layer) {
        Var cw = p(), cb = p(), ca = p();
        h = prelu(node_conv(h, cw, cb, k), ca);
      }
      Var ow = p(), ob = p();
      return node_conv(h, ow, ob, k);
    }
    case ModelKind::cnn_baseline: {
      Var w = p(), b = p(), a = p();
      Var h = prelu(node_conv(x, w, b, k), a);
      for (int layer = 0; layer < 3; ++layer) {
        Var cw = p(), cb = p(), ca = p();
        h = add(h, prelu(node_conv(h, cw, cb, k), ca));
      }
      Var ow = p(), ob = p();
      return node_conv(h, ow, ob, k);
    }
    case ModelKind::lstm_baseline: {
      const auto g = static_cast<std::size_t>(spec_.lstm_hidden);
      Var w_ih = p(), w_hh = p(), bias = p();
      LstmState state{tape.constant(Tensor({1, g})), tape.constant(Tensor({1, g}))};
      std::vector<Var> hs;
      hs.reserve(input.rows());
      for (std::size_t t = 0; t < input.rows(); ++t) {
        state = lstm_cell(slice_rows(x, t, 1), state, w_ih, w_hh, bias, g);
        hs.push_back(state.h);
      }
      Var h = stack_rows(hs);
      Var hw = p(), hb = p(), ha = p();
      h = prelu(node_conv(h, hw, hb, k), ha);
      Var ow = p(), ob = p();
      return node_conv(h, ow, ob, k);
    }
  }
  fail(ErrorKind::state, "unhandled model kind");
}

Var Model::forward(Tape& tape, const Tensor& input) {
  return forward_impl(tape, input, [&](std::size_t i) { return tape.param(params_[i]); });
}

Var Model::activate(Var logits) const { return spec_.multilabel ? sigmoid(logits) : softmax_rows(logits); }

ModelOutput Model::predict(const Tensor& input) const {
  Tape tape(false);
  Var logits = forward_impl(tape, input, [&](std::size_t i) { return tape.param_ref(params_[i]); });
  Var scores = activate(logits);
  return {logits.value(), scores.value()};
}

}  // namespace hargcnn
