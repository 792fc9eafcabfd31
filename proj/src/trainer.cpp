#include "hargcnn/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "hargcnn/error.hpp"
#include "hargcnn/hash.hpp"
#include "hargcnn/ops.hpp"
#include "hargcnn/random.hpp"

namespace hargcnn {

using nlohmann::json;

std::string to_string(LossTarget t) { return t == LossTarget::all_nodes ? "all_nodes" : "hidden_only"; }

LossTarget loss_target_from_string(const std::string& name) {
  if (name == "all_nodes" || name == "all-nodes" || name == "all") return LossTarget::all_nodes;
  if (name == "hidden_only" || name == "hidden-only" || name == "hidden") return LossTarget::hidden_only;
  fail(ErrorKind::config, fmt::format("unknown loss target '{}' (expected all_nodes or hidden_only)", name));
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::config, fmt::format("epochs must be >= 1, got {}", epochs));
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::config, fmt::format("lr must be finite and >= 0, got {}", lr));
  if (graphs_per_step < 1) fail(ErrorKind::config, fmt::format("graphs_per_step must be >= 1, got {}", graphs_per_step));
  if (repeats < 1) fail(ErrorKind::config, fmt::format("repeats must be >= 1, got {}", repeats));
  if (max_steps < 0) fail(ErrorKind::config, "max_steps must be >= 0");
  for (double f : eval_missing_fracs) {
    if (!(f > 0.0 && f < 1.0)) fail(ErrorKind::config, fmt::format("missing fraction {} outside (0, 1)", f));
  }
  corruption.validate();
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"lr", lr},
          {"optimizer", hargcnn::to_string(optimizer)},
          {"momentum", momentum},
          {"graphs_per_step", graphs_per_step},
          {"seed", seed},
          {"loss_target", hargcnn::to_string(loss_target)},
          {"eval_missing_fracs", eval_missing_fracs},
          {"repeats", repeats},
          {"zero_all_labels", zero_all_labels},
          {"max_steps", max_steps},
          {"corruption",
           {{"hide_prob", corruption.hide_prob},
            {"noise_prob", corruption.noise_prob},
            {"noise_std", corruption.noise_std},
            {"max_hidden_frac", corruption.max_hidden_frac},
            {"mode", hargcnn::to_string(corruption.mode)}}}};
}

TrainConfig TrainConfig::from_json(const json& doc) {
  try {
    TrainConfig c;
    c.epochs = doc.at("epochs").get<int>();
    c.lr = doc.at("lr").get<double>();
    c.optimizer = optimizer_from_string(doc.at("optimizer").get<std::string>());
    c.momentum = doc.at("momentum").get<double>();
    c.graphs_per_step = doc.at("graphs_per_step").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.loss_target = loss_target_from_string(doc.at("loss_target").get<std::string>());
    c.eval_missing_fracs = doc.at("eval_missing_fracs").get<std::vector<double>>();
    c.repeats = doc.at("repeats").get<int>();
    c.zero_all_labels = doc.at("zero_all_labels").get<bool>();
    c.max_steps = doc.at("max_steps").get<std::int64_t>();
    const auto& k = doc.at("corruption");
    c.corruption.hide_prob = k.at("hide_prob").get<double>();
    c.corruption.noise_prob = k.at("noise_prob").get<double>();
    c.corruption.noise_std = k.at("noise_std").get<double>();
    c.corruption.max_hidden_frac = k.at("max_hidden_frac").get<double>();
    c.corruption.mode = corruption_mode_from_string(k.at("mode").get<std::string>());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed train config: {}", e.what()));
  }
}

json RunHistory::to_json() const {
  json epochs_doc = json::array();
  for (const auto& e : epochs) {
    json rec = {{"epoch", e.epoch}, {"step", e.step}, {"mean_loss", e.mean_loss}, {"seconds", e.seconds}};
    if (e.monitor) rec["monitor"] = e.monitor->to_json();
    epochs_doc.push_back(std::move(rec));
  }
  return {{"step_loss", step_loss}, {"epochs", epochs_doc}, {"seconds", seconds}};
}

// ---------------------------------------------------------------------------
// Evaluation masks

std::size_t eval_hidden_count(std::size_t n, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) fail(ErrorKind::config, fmt::format("missing fraction {} outside (0, 1)", frac));
  if (n < 2) fail(ErrorKind::validation, fmt::format("a {}-node graph cannot hide a label and keep one", n));
  const auto h = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  return std::clamp<std::size_t>(h, 1, n - 1);
}

EvalMasks make_eval_masks(std::span<const ActivityGraph> graphs, double frac, std::uint64_t seed) {
  EvalMasks out;
  out.frac = frac;
  out.seed = seed;
  out.masks.reserve(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto n = graphs[g].size();
    const auto hidden = eval_hidden_count(n, frac);
    Rng rng(derive_seed(seed, {g, std::bit_cast<std::uint64_t>(frac)}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Mask m(n, 0);
    for (std::size_t i = 0; i < hidden; ++i) m[order[i]] = 1;
    out.masks.push_back(std::move(m));
  }
  return out;
}

std::uint64_t EvalMasks::hash() const {
  Fnv1a h;
  h.update_u64(masks.size());
  for (const auto& m : masks) {
    h.update_u64(m.size());
    h.update(m);
  }
  return h.digest();
}

json EvalMasks::to_json() const {
  json rows = json::array();
  for (const auto& m : masks) {
    std::string s;
    for (auto b : m) s += b ? '1' : '0';
    rows.push_back(std::move(s));
  }
  return {{"frac", frac}, {"seed", seed}, {"hash", hex64(hash())}, {"masks", rows}};
}

EvalMasks EvalMasks::from_json(const json& doc) {
  try {
    EvalMasks out;
    out.frac = doc.at("frac").get<double>();
    out.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& row : doc.at("masks")) {
      Mask m;
      for (char ch : row.get<std::string>()) {
        if (ch != '0' && ch != '1') fail(ErrorKind::format, "mask rows must be strings of 0/1");
        m.push_back(ch == '1' ? 1 : 0);
      }
      out.masks.push_back(std::move(m));
    }
    if (doc.contains("hash") && doc.at("hash").get<std::string>() != hex64(out.hash())) {
      fail(ErrorKind::format, "mask file hash does not match its contents");
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed mask file: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void check_compatible(const ModelSpec& spec, std::span<const ActivityGraph> graphs) {
  for (const auto& g : graphs) {
    if (g.feature_dim() != static_cast<std::size_t>(spec.features) ||
        g.class_dim() != static_cast<std::size_t>(spec.classes)) {
      fail(ErrorKind::validation, fmt::format("model expects F={} C={}, data has F={} C={}", spec.features,
                                              spec.classes, g.feature_dim(), g.class_dim()));
    }
  }
}

ConfusionCounts graph_counts(const Model& model, const ActivityGraph& g, const Mask& mask, const EvalOptions& opts) {
  if (mask.size() != g.size()) {
    fail(ErrorKind::validation, fmt::format("mask of {} entries for a {}-node graph", mask.size(), g.size()));
  }
  const auto input = model_input(g, g.feature_matrix(), mask, opts.zero_all_labels);
  const auto out = model.predict(input);
  const auto pred = binarize(out.scores, model.spec().multilabel, opts.threshold);
  Mask targets = mask;
  for (std::size_t i = 0; i < g.size(); ++i) targets[i] = targets[i] && g.node(i).label_known;
  ConfusionCounts c(g.class_dim());
  c.add(pred, g.label_matrix(), targets);
  return c;
}

}  // namespace

ConfusionCounts evaluate_counts(const Model& model, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                                const EvalOptions& opts) {
  check_compatible(model.spec(), graphs);
  if (masks.masks.size() != graphs.size()) {
    fail(ErrorKind::validation, fmt::format("{} masks for {} test graphs", masks.masks.size(), graphs.size()));
  }
  std::vector<ConfusionCounts> per_graph(graphs.size());
  const auto threads = static_cast<std::size_t>(std::max(1, opts.threads));
  if (threads == 1 || graphs.size() < 2) {
    for (std::size_t i = 0; i < graphs.size(); ++i) per_graph[i] = graph_counts(model, graphs[i], masks.masks[i], opts);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < graphs.size(); i += threads) {
            per_graph[i] = graph_counts(model, graphs[i], masks.masks[i], opts);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  ConfusionCounts total(static_cast<std::size_t>(model.spec().classes));
  for (const auto& c : per_graph) total.merge(c);
  return total;
}

MetricsReport evaluate(const Model& model, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                       const EvalOptions& opts) {
  return finalize_report(evaluate_counts(model, graphs, masks, opts), model.spec().multilabel, opts.averaging);
}

MetricsReport evaluate(const Checkpoint& checkpoint, std::span<const ActivityGraph> graphs, const EvalMasks& masks,
                       const EvalOptions& opts) {
  return evaluate(checkpoint.restore(), graphs, masks, opts);
}

MetricsReport mean_report(std::span<const MetricsReport> runs) {
  if (runs.empty()) fail(ErrorKind::state, "mean of zero reports");
  MetricsReport out = runs.front();
  const auto k = static_cast<double>(runs.size());
  out.macro_f1 = 0.0;
  out.mean_acc = 0.0;
  for (auto& m : out.per_class) m = ClassMetrics{};
  for (const auto& r : runs) {
    if (r.per_class.size() != out.per_class.size()) fail(ErrorKind::dimension, "reports differ in class count");
    out.macro_f1 += r.macro_f1 / k;
    out.mean_acc += r.mean_acc / k;
    for (std::size_t j = 0; j < r.per_class.size(); ++j) {
      auto& m = out.per_class[j];
      m.counts.tp += r.per_class[j].counts.tp;
      m.counts.fp += r.per_class[j].counts.fp;
      m.counts.fn += r.per_class[j].counts.fn;
      m.counts.tn += r.per_class[j].counts.tn;
      m.f1 += r.per_class[j].f1 / k;
      m.acc += r.per_class[j].acc / k;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<int> class_ids(const ActivityGraph& g) {
  std::vector<int> ids(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& l = g.node(i).labels;
    ids[i] = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
  }
  return ids;
}

}  // namespace

Var graph_loss(Tape& tape, Model& model, const Tensor& input, const ActivityGraph& graph,
               std::span<const double> row_weight) {
  Var logits = model.forward(tape, input);
  if (model.spec().multilabel) return bce_loss(sigmoid(logits), graph.label_matrix(), row_weight);
  const auto ids = class_ids(graph);
  return ce_loss(logits, ids, row_weight);
}

double graph_loss_value(const Model& model, const Tensor& input, const ActivityGraph& graph,
                        std::span<const double> row_weight) {
  const auto out = model.predict(input);
  if (model.spec().multilabel) return bce_loss(out.scores, graph.label_matrix(), row_weight);
  const auto ids = class_ids(graph);
  return ce_loss(out.logits, ids, row_weight);
}

TrainResult train(Model& model, std::span<const ActivityGraph> graphs, const TrainConfig& cfg, const Monitor* monitor,
                  json checkpoint_metadata) {
  cfg.validate();
  if (graphs.empty()) fail(ErrorKind::validation, "no training graphs");
  check_compatible(model.spec(), graphs);
  if (monitor && !monitor->masks) fail(ErrorKind::state, "monitor needs evaluation masks");

  const auto clock_start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count(); };

  std::unique_ptr<Optimizer> opt;
  if (cfg.lr > 0.0) opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.momentum);
  Rng order_rng(derive_seed(cfg.seed, {0x6f72646572}));
  Rng corrupt_rng(derive_seed(cfg.seed, {0x636f7272}));

  checkpoint_metadata["train_config"] = cfg.to_json();
  TrainResult result;
  std::optional<double> best_f1;
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.graphs_per_step);
  std::int64_t step = 0;
  bool capped = false;

  for (int epoch = 1; epoch <= cfg.epochs && !capped; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        capped = true;
        break;
      }
      const auto end = std::min(order.size(), start + batch);
      model.zero_grad();
      double loss_sum = 0.0;
      std::size_t used = 0;
      for (auto k = start; k < end; ++k) {
        const auto& g = graphs[order[k]];
        const auto cg = corrupt(g, cfg.corruption, corrupt_rng);
        std::vector<double> weight(g.size(), 0.0);
        bool any = false;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const bool selected = cfg.loss_target == LossTarget::all_nodes || cg.hidden[i];
          if (selected && g.node(i).label_known) {
            weight[i] = 1.0;
            any = true;
          }
        }
        if (!any) continue;
        Tape tape;
        Var loss = graph_loss(tape, model, model_input(g, cg.features, cg.hidden, cfg.zero_all_labels), g, weight);
        tape.backward(loss);
        loss_sum += loss.value()[0];
        ++used;
      }
      if (used == 0) continue;
      const double loss_value = loss_sum / static_cast<double>(used);
      ++step;
      if (!std::isfinite(loss_value)) {
        fail(ErrorKind::numerical,
             fmt::format("non-finite loss {} at step {} (epoch {}, lr={})", loss_value, step, epoch, cfg.lr));
      }
      const double scale = 1.0 / static_cast<double>(used);
      for (auto& p : model.parameters()) {
        for (auto& v : p.grad.data()) {
          v *= scale;
          if (!std::isfinite(v)) {
            fail(ErrorKind::numerical, fmt::format("non-finite gradient in {} at step {} (epoch {}, lr={})", p.name,
                                                   step, epoch, cfg.lr));
          }
        }
      }
      if (opt) opt->step(model.parameters());
      result.history.step_loss.push_back(loss_value);
      epoch_loss += loss_value;
      ++epoch_steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = step;
    rec.mean_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    if (monitor) {
      rec.monitor = evaluate(model, monitor->graphs, *monitor->masks, monitor->options);
      if (!best_f1 || rec.monitor->macro_f1 > *best_f1) {
        best_f1 = rec.monitor->macro_f1;
        result.best_epoch = epoch;
        auto meta = checkpoint_metadata;
        meta["epoch"] = epoch;
        result.best_checkpoint = Checkpoint::capture(model, cfg.seed, std::move(meta));
      }
    }
    rec.seconds = elapsed();
    result.history.epochs.push_back(std::move(rec));
  }

  const int last_epoch = result.history.epochs.empty() ? 0 : result.history.epochs.back().epoch;
  checkpoint_metadata["epoch"] = last_epoch;
  result.final_checkpoint = Checkpoint::capture(model, cfg.seed, checkpoint_metadata);
  if (!best_f1) {
    result.best_checkpoint = result.final_checkpoint;
    result.best_epoch = last_epoch;
  }
  result.history.seconds = elapsed();
  return result;
}

// ---------------------------------------------------------------------------
// Comparison

const CompareCell& CompareTable::at(ModelKind model, int n, double frac) const {
  for (const auto& c : cells) {
    if (c.model == model && c.nodes == n && c.frac == frac) return c;
  }
  fail(ErrorKind::validation, fmt::format("no cell for {} / {} nodes / {}", to_string(model), n, frac));
}

std::string CompareTable::text() const {
  constexpr int kCol = 16;
  std::string out = fmt::format("{:<11}{:<10}", "activities", "missing");
  for (auto m : models) out += fmt::format("| {:<{}}", display_name(m), kCol);
  out += '\n';
  out += std::string(21 + models.size() * (kCol + 2), '-') + '\n';
  for (int n : nodes) {
    for (double f : fracs) {
      out += fmt::format("{:<11}{:<10}", n, fmt::format("{:.0f}%", 100.0 * f));
      for (auto m : models) out += fmt::format("| {:<{}}", at(m, n, f).mean.cell(), kCol);
      out += '\n';
    }
  }
  out += "cells: F1 / Acc(%) on hidden nodes, mean over repeats\n";
  return out;
}

json CompareTable::to_json() const {
  json doc_cells = json::array();
  for (const auto& c : cells) {
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back({{"f1", r.macro_f1}, {"mean_acc", r.mean_acc}});
    doc_cells.push_back({{"model", to_string(c.model)},
                         {"nodes", c.nodes},
                         {"frac", c.frac},
                         {"mask_hash", hex64(c.mask_hash)},
                         {"f1", c.mean.macro_f1},
                         {"mean_acc", c.mean.mean_acc},
                         {"hidden_node_count", c.mean.hidden_node_count},
                         {"cell", c.mean.cell()},
                         {"runs", runs}});
  }
  std::vector<std::string> names;
  for (auto m : models) names.push_back(to_string(m));
  return {{"models", names}, {"nodes", nodes}, {"fracs", fracs}, {"cells", doc_cells}};
}

CompareTable compare(std::span<const RecordStream> streams, const DatasetSpec& spec, const CompareConfig& cfg) {
  cfg.train.validate();
  if (cfg.models.empty() || cfg.nodes.empty()) fail(ErrorKind::config, "compare needs at least one model and one node count");
  CompareTable table;
  table.models = cfg.models;
  table.nodes = cfg.nodes;
  table.fracs = cfg.train.eval_missing_fracs;

  auto spec_for = [&](ModelKind kind) {
    if (cfg.make_spec) return cfg.make_spec(kind, spec);
    auto s = default_spec(kind, spec.features, spec.classes, spec.multilabel);
    s.adjacency = cfg.adjacency;
    return s;
  };

  std::vector<CompareCell> cells;
  for (int n : cfg.nodes) {
    auto pipeline = cfg.pipeline;
    pipeline.nodes = n;
    const auto data = prepare_dataset(streams, spec, pipeline);
    if (data.train.empty() || data.test.empty()) {
      fail(ErrorKind::validation, fmt::format("{} nodes per graph leaves {} train / {} test graphs", n,
                                              data.train.size(), data.test.size()));
    }
    std::vector<EvalMasks> masks;
    for (double f : table.fracs) masks.push_back(make_eval_masks(data.test, f, cfg.eval_seed));

    for (auto kind : cfg.models) {
      const auto mspec = spec_for(kind);
      std::vector<std::vector<MetricsReport>> runs(masks.size());
      for (int r = 0; r < cfg.train.repeats; ++r) {
        auto tcfg = cfg.train;
        tcfg.seed = derive_seed(cfg.train.seed, {static_cast<std::uint64_t>(r)});
        auto model = Model::create(mspec, tcfg.seed);
        train(model, data.train, tcfg);
        for (std::size_t fi = 0; fi < masks.size(); ++fi) runs[fi].push_back(evaluate(model, data.test, masks[fi], cfg.eval));
      }
      for (std::size_t fi = 0; fi < masks.size(); ++fi) {
        CompareCell cell;
        cell.model = kind;
        cell.nodes = n;
        cell.frac = table.fracs[fi];
        cell.mask_hash = masks[fi].hash();
        cell.mean = mean_report(runs[fi]);
        cell.runs = std::move(runs[fi]);
        cells.push_back(std::move(cell));
      }
    }
  }

  for (auto kind : cfg.models) {
    for (int n : cfg.nodes) {
      for (double f : table.fracs) {
        for (const auto& c : cells) {
          if (c.model == kind && c.nodes == n && c.frac == f) table.cells.push_back(c);
        }
      }
    }
  }
  for (const auto& c : table.cells) {
    const auto& ref = table.at(table.models.front(), c.nodes, c.frac);
    if (c.mask_hash != ref.mask_hash) {
      fail(ErrorKind::state, fmt::format("mask hash differs between {} and {} at {} nodes / {}", to_string(c.model),
                                         to_string(ref.model), c.nodes, c.frac));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

GradCheckReport gradcheck_model(const ModelSpec& spec, std::size_t nodes, std::uint64_t seed, int probes_per_tensor,
                                double h) {
  spec.validate();
  if (nodes < 1) fail(ErrorKind::config, "gradcheck needs at least one node");
  auto model = Model::create(spec, seed);
  Rng rng(derive_seed(seed, {0x67726164}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ActivityNode> list;
  const auto c = static_cast<std::size_t>(spec.classes);
  for (std::size_t i = 0; i < nodes; ++i) {
    ActivityNode node;
    node.timestamp = static_cast<double>(i);
    node.features.resize(static_cast<std::size_t>(spec.features));
    for (auto& v : node.features) v = normal(rng);
    node.labels.assign(c, 0.0);
    if (spec.multilabel) {
      for (auto& l : node.labels) l = uniform01(rng) < 0.3 ? 1.0 : 0.0;
    } else {
      node.labels[std::uniform_int_distribution<std::size_t>(0, c - 1)(rng)] = 1.0;
    }
    list.push_back(std::move(node));
  }
  const auto graph = build_graph(std::move(list));
  Mask hidden(nodes, 0);
  hidden[0] = 1;
  const auto input = model_input(graph, graph.feature_matrix(), hidden);
  const std::vector<double> weight(nodes, 1.0);

  model.zero_grad();
  Tape tape;
  tape.backward(graph_loss(tape, model, input, graph, weight));
  return grad_check([&] { return graph_loss_value(model, input, graph, weight); }, model.parameters(),
                    probes_per_tensor, h, seed);
}

}  // namespace hargcnn
