// hargcnn: synthetic data, training, evaluation, comparison and checks for the
// chronological activity-graph classifier and its baselines.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hargcnn/checkpoint.hpp"
#include "hargcnn/data.hpp"
#include "hargcnn/error.hpp"
#include "hargcnn/hash.hpp"
#include "hargcnn/models.hpp"
#include "hargcnn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hargcnn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitIo = 5;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::numerical: return kExitNumerical;
    case ErrorKind::io: return kExitIo;
    default: return kExitValidation;
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

std::uint64_t file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, fmt::format("cannot open {}", path.string()));
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.digest();
}

fs::path sidecar_path(const fs::path& csv) { return fs::path(csv.string() + ".meta.json"); }

// ---------------------------------------------------------------------------
// Shared option groups

struct OutputOpts {
  std::string dir = "hargcnn_out";
};

void add_output(CLI::App* cmd, OutputOpts& o) {
  cmd->add_option("--out", o.dir, "Output directory")->envname("HARGCNN_OUT_DIR")->capture_default_str();
}

struct ShapeOpts {
  std::string shape;  // extrasensory | pamap
  std::optional<int> features, classes;
  std::optional<bool> multilabel;
};

void add_shape(CLI::App* cmd, ShapeOpts& o) {
  cmd->add_option("--shape", o.shape, "Dataset shape preset")->check(CLI::IsMember({"extrasensory", "pamap"}));
  cmd->add_option("--features", o.features, "Feature count F");
  cmd->add_option("--classes", o.classes, "Label count C");
  cmd->add_option("--multilabel", o.multilabel, "Multi-label (true) or single-label (false)");
}

/// Preset, then sidecar, then explicit flags.
DatasetSpec resolve_shape(const ShapeOpts& o, const std::string& data_path) {
  std::optional<DatasetSpec> spec;
  if (o.shape == "extrasensory") spec = DatasetSpec::extrasensory();
  if (o.shape == "pamap") spec = DatasetSpec::pamap();
  if (!spec && !data_path.empty() && fs::exists(sidecar_path(data_path))) {
    spec = DatasetSpec::from_json(read_json_file(sidecar_path(data_path)).at("dataset"));
  }
  if (!spec && !(o.features && o.classes)) {
    fail(ErrorKind::config, "dataset shape unknown: pass --shape, --features/--classes, or provide a .meta.json sidecar");
  }
  DatasetSpec s = spec.value_or(DatasetSpec{0, 0, true});
  if (o.features) s.features = *o.features;
  if (o.classes) s.classes = *o.classes;
  if (o.multilabel) s.multilabel = *o.multilabel;
  s.validate();
  return s;
}

struct ModelOpts {
  std::string model = "gcnn";
  std::optional<int> hidden, kernel, lstm_hidden;
  std::string adjacency = "as-written";
};

void add_model(CLI::App* cmd, ModelOpts& o, bool with_kind = true) {
  if (with_kind) {
    cmd->add_option("--model", o.model, "Model kind")
        ->check(CLI::IsMember({"gcnn", "cnn", "lstm", "har_gcnn", "cnn_baseline", "lstm_baseline"}))
        ->capture_default_str();
  }
  cmd->add_option("--hidden", o.hidden, "Channel width (default: budget-matched)");
  cmd->add_option("--kernel", o.kernel, "Node-axis conv kernel, odd (default: 1 for gcnn/lstm, 3 for cnn)");
  cmd->add_option("--lstm-hidden", o.lstm_hidden, "LSTM state width (default: budget-matched)");
  cmd->add_option("--adjacency-variant", o.adjacency, "Adjacency normalization")
      ->check(CLI::IsMember({"as-written", "kipf"}))
      ->capture_default_str();
}

ModelSpec resolve_model(const ModelOpts& o, ModelKind kind, const DatasetSpec& ds) {
  auto s = default_spec(kind, ds.features, ds.classes, ds.multilabel);
  if (o.hidden) s.hidden = *o.hidden;
  if (o.kernel) s.kernel = *o.kernel;
  if (o.lstm_hidden) s.lstm_hidden = *o.lstm_hidden;
  s.adjacency = adjacency_from_string(o.adjacency);
  s.validate();
  return s;
}

struct PipelineOpts {
  int nodes = 3;
  int train_stride = 1;
  int test_stride = 0;
};

void add_pipeline(CLI::App* cmd, PipelineOpts& o, bool nodes_flag = true) {
  if (nodes_flag) cmd->add_option("--nodes", o.nodes, "Activities (nodes) per graph")->capture_default_str();
  cmd->add_option("--train-stride", o.train_stride, "Training window stride")->capture_default_str();
  cmd->add_option("--test-stride", o.test_stride, "Evaluation window stride (0 = nodes)")->capture_default_str();
}

struct TrainOpts {
  TrainConfig cfg;
  std::string optimizer = "adam";
  std::string loss_target = "all_nodes";
  std::string corruption_mode = "independent";
};

void add_train(CLI::App* cmd, TrainOpts& o) {
  auto& c = o.cfg;
  cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", c.lr, "Learning rate (0 freezes parameters)")->capture_default_str();
  cmd->add_option("--optimizer", o.optimizer, "Optimizer")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  cmd->add_option("--momentum", c.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--graphs-per-step", c.graphs_per_step, "Graphs per optimizer step")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Training and init seed")->capture_default_str();
  cmd->add_option("--loss-target", o.loss_target, "Nodes entering the loss")
      ->check(CLI::IsMember({"all_nodes", "hidden_only"}))
      ->capture_default_str();
  cmd->add_option("--max-steps", c.max_steps, "Stop after this many steps (0 = no cap)")->capture_default_str();
  cmd->add_option("--hide-prob", c.corruption.hide_prob, "Training label-hiding probability")->capture_default_str();
  cmd->add_option("--noise-prob", c.corruption.noise_prob, "Training feature-noise probability")->capture_default_str();
  cmd->add_option("--noise-std", c.corruption.noise_std, "Training noise std")->capture_default_str();
  cmd->add_option("--max-hidden-frac", c.corruption.max_hidden_frac, "Cap on hidden labels per graph")->capture_default_str();
  cmd->add_option("--corruption-mode", o.corruption_mode, "Hide/noise coupling")
      ->check(CLI::IsMember({"independent", "coupled"}))
      ->capture_default_str();
  cmd->add_flag("--zero-all-labels", c.zero_all_labels, "Ablation: zero every label at input (train and eval)");
}

TrainConfig resolve_train(const TrainOpts& o) {
  TrainConfig c = o.cfg;
  c.optimizer = optimizer_from_string(o.optimizer);
  c.loss_target = loss_target_from_string(o.loss_target);
  c.corruption.mode = corruption_mode_from_string(o.corruption_mode);
  c.corruption.seed = c.seed;
  c.validate();
  return c;
}

struct EvalOpts {
  std::uint64_t eval_seed = 0;
  double threshold = 0.5;
  std::string averaging = "macro";
  int threads = 1;
};

void add_eval(CLI::App* cmd, EvalOpts& o) {
  cmd->add_option("--eval-seed", o.eval_seed, "Seed of the fixed evaluation masks")->capture_default_str();
  cmd->add_option("--threshold", o.threshold, "Multi-label decision threshold")->capture_default_str();
  cmd->add_option("--averaging", o.averaging, "F1 averaging")->check(CLI::IsMember({"macro", "micro"}))->capture_default_str();
  cmd->add_option("--threads", o.threads, "Evaluation threads")->check(CLI::PositiveNumber)->capture_default_str();
}

EvalOptions resolve_eval(const EvalOpts& o, bool zero_all_labels) {
  return {o.threshold, averaging_from_string(o.averaging), zero_all_labels, o.threads};
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::string command;
  json config;
  json seeds = json::object();
  json dataset = json::object();
  std::vector<std::string> outputs;
  fs::path dir;

  fs::path path() const { return dir / "manifest.json"; }
  std::string name() const { return "manifest.json"; }

  void set_dataset(const std::string& data, const DatasetSpec& spec) {
    dataset = {{"path", data}, {"fnv1a64", hex64(file_fingerprint(data))}, {"spec", spec.to_json()}};
  }

  fs::path output(const std::string& file) {
    outputs.push_back(file);
    return dir / file;
  }

  void write() const {
    write_json_file(path(), {{"tool", "hargcnn"},
                             {"version", HARGCNN_VERSION},
                             {"command", command},
                             {"config", config},
                             {"seeds", seeds},
                             {"dataset", dataset},
                             {"outputs", outputs}});
  }
};

Manifest start_manifest(const CLI::App* cmd, const OutputOpts& out) {
  Manifest m;
  m.command = cmd->get_name();
  std::istringstream lines(cmd->config_to_str(true, false));
  std::string toml = fmt::format("[{}]\n", m.command), line;
  while (std::getline(lines, line)) {
    if (line.size() < 3 || line.compare(line.size() - 3, 3, "=\"\"") != 0) toml += line + "\n";
  }
  m.config = {{"toml", toml}};
  m.dir = out.dir;
  std::error_code ec;
  fs::create_directories(m.dir, ec);
  if (ec) fail(ErrorKind::io, fmt::format("cannot create output directory {}: {}", m.dir.string(), ec.message()));
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) fail(ErrorKind::io, fmt::format("write to {} failed", path.string()));
}

std::string frac_tag(double frac) { return fmt::format("{:.0f}", 100.0 * frac); }

// ---------------------------------------------------------------------------
// Subcommands

struct SynthCli {
  SynthOptions opts;
  int subjects = 1;
  std::string name = "synth.csv";
  OutputOpts out;
};

int run_synth(const CLI::App* cmd, const SynthCli& s) {
  auto manifest = start_manifest(cmd, s.out);
  const auto cfg = make_synth_config(s.opts);
  const auto spec = cfg.dataset_spec();
  const auto streams = synth_generate_subjects(cfg, static_cast<std::size_t>(s.subjects));
  const auto csv = manifest.output(s.name);
  write_records(csv, streams, spec);
  manifest.seeds = {{"dataset", s.opts.seed}};
  manifest.set_dataset(csv.string(), spec);
  const auto meta = manifest.output(s.name + ".meta.json");
  write_json_file(meta, {{"dataset", spec.to_json()},
                         {"synth",
                          {{"classes", s.opts.classes},
                           {"features", s.opts.features},
                           {"steps", s.opts.steps},
                           {"self_prob", s.opts.self_prob},
                           {"feature_std", s.opts.feature_std},
                           {"mean_scale", s.opts.mean_scale},
                           {"scripted", s.opts.scripted},
                           {"multilabel", s.opts.multilabel},
                           {"subjects", s.subjects},
                           {"seed", s.opts.seed}}},
                         {"manifest", manifest.name()}});
  manifest.write();
  fmt::print("wrote {} ({} subjects x {} rows, F={} C={} {})\n", csv.string(), s.subjects, s.opts.steps, spec.features,
             spec.classes, spec.multilabel ? "multi-label" : "single-label");
  return 0;
}

struct TrainCli {
  std::string data;
  ShapeOpts shape;
  ModelOpts model;
  PipelineOpts pipeline;
  TrainOpts train;
  EvalOpts eval;
  double missing = 0.33;
  OutputOpts out;
};

int run_train(const CLI::App* cmd, const TrainCli& t) {
  auto manifest = start_manifest(cmd, t.out);
  const auto ds = resolve_shape(t.shape, t.data);
  const auto spec = resolve_model(t.model, model_kind_from_string(t.model.model), ds);
  const auto cfg = resolve_train(t.train);
  const PipelineConfig pipeline{t.pipeline.nodes, t.pipeline.train_stride, t.pipeline.test_stride};
  const auto streams = load_records(t.data, ds);
  const auto data = prepare_dataset(streams, ds, pipeline);
  manifest.set_dataset(t.data, ds);
  manifest.seeds = {{"train", cfg.seed}, {"eval", t.eval.eval_seed}};

  const json metadata = {{"dataset", ds.to_json()},
                         {"pipeline", pipeline.to_json()},
                         {"standardizer", data.stats.to_json()},
                         {"manifest", manifest.name()}};
  auto model = Model::create(spec, cfg.seed);
  std::optional<EvalMasks> masks;
  std::optional<Monitor> monitor;
  if (!data.test.empty()) {
    masks = make_eval_masks(data.test, t.missing, t.eval.eval_seed);
    monitor = Monitor{data.test, &*masks, resolve_eval(t.eval, cfg.zero_all_labels)};
  }
  fmt::print("{}: {} params, {} train / {} test graphs of {} nodes\n", display_name(spec.kind), param_count(spec),
             data.train.size(), data.test.size(), pipeline.nodes);
  const auto result = train(model, data.train, cfg, monitor ? &*monitor : nullptr, metadata);

  result.final_checkpoint.save(manifest.output("checkpoint_final.json"));
  result.best_checkpoint.save(manifest.output("checkpoint_best.json"));
  write_json_file(manifest.output("history.json"), result.history.to_json());
  if (masks) write_json_file(manifest.output(fmt::format("masks_{}.json", frac_tag(t.missing))), masks->to_json());
  manifest.write();

  const auto& h = result.history;
  fmt::print("{} steps, loss {:.4f} -> {:.4f}, {:.1f}s\n", h.step_loss.size(), h.step_loss.empty() ? 0.0 : h.step_loss.front(),
             h.step_loss.empty() ? 0.0 : h.step_loss.back(), h.seconds);
  if (!h.epochs.empty() && h.epochs.back().monitor) {
    fmt::print("final test ({}% missing): {}   best epoch {}\n", frac_tag(t.missing), h.epochs.back().monitor->cell(),
               result.best_epoch);
  }
  fmt::print("checkpoints in {}\n", manifest.dir.string());
  return 0;
}

struct EvalCli {
  std::string checkpoint;
  std::string data;
  std::string masks_file;
  std::optional<int> nodes;
  double missing = 0.33;
  bool zero_all_labels = false;
  ShapeOpts shape;
  EvalOpts eval;
  OutputOpts out;
};

int run_eval(const CLI::App* cmd, const EvalCli& e) {
  auto manifest = start_manifest(cmd, e.out);
  const auto ck = Checkpoint::load(e.checkpoint);
  const auto& meta = ck.metadata;
  DatasetSpec ds;
  if (!e.shape.shape.empty() || e.shape.features || e.shape.classes) {
    ds = resolve_shape(e.shape, e.data);
  } else if (meta.contains("dataset")) {
    ds = DatasetSpec::from_json(meta.at("dataset"));
  } else {
    ds = resolve_shape(e.shape, e.data);
  }
  if (ds.features != ck.spec.features || ds.classes != ck.spec.classes || ds.multilabel != ck.spec.multilabel) {
    fail(ErrorKind::validation, fmt::format("checkpoint is F={} C={} {}, data is F={} C={} {}", ck.spec.features,
                                            ck.spec.classes, ck.spec.multilabel ? "multi" : "single", ds.features,
                                            ds.classes, ds.multilabel ? "multi" : "single"));
  }
  auto pipeline = meta.contains("pipeline") ? PipelineConfig::from_json(meta.at("pipeline")) : PipelineConfig{};
  if (e.nodes) {
    pipeline.nodes = *e.nodes;
    pipeline.test_stride = 0;
  }
  if (!meta.contains("standardizer")) fail(ErrorKind::validation, "checkpoint has no standardization statistics");
  const auto stats = Standardizer::from_json(meta.at("standardizer"));
  const auto streams = load_records(e.data, ds);
  const auto test = prepare_test_only(streams, pipeline, stats);
  if (test.empty()) fail(ErrorKind::validation, "no test graphs in this dataset");
  const auto masks = e.masks_file.empty() ? make_eval_masks(test, e.missing, e.eval.eval_seed)
                                          : EvalMasks::from_json(read_json_file(e.masks_file));
  const bool zero = e.zero_all_labels || (meta.contains("train_config") && meta.at("train_config").value("zero_all_labels", false));
  const auto report = evaluate(ck, test, masks, resolve_eval(e.eval, zero));

  manifest.set_dataset(e.data, ds);
  manifest.seeds = {{"eval", masks.seed}, {"checkpoint", ck.seed}};
  json doc = report.to_json();
  doc["checkpoint"] = e.checkpoint;
  doc["nodes"] = pipeline.nodes;
  doc["missing"] = masks.frac;
  doc["graphs"] = test.size();
  doc["mask_hash"] = hex64(masks.hash());
  doc["manifest"] = manifest.name();
  write_json_file(manifest.output("report.json"), doc);
  write_json_file(manifest.output(fmt::format("masks_{}.json", frac_tag(masks.frac))), masks.to_json());
  manifest.write();

  fmt::print("{} on {} test graphs of {} nodes, {}% missing ({} hidden targets, {:.2f} per graph)\n",
             display_name(ck.spec.kind), test.size(), pipeline.nodes, frac_tag(masks.frac), report.hidden_node_count,
             static_cast<double>(report.hidden_node_count) / static_cast<double>(test.size()));
  fmt::print("{}", report.table());
  return 0;
}

struct CompareCli {
  std::string data;
  ShapeOpts shape;
  ModelOpts model;
  std::vector<std::string> models{"gcnn", "cnn", "lstm"};
  std::vector<int> nodes{3};
  std::vector<double> missing{0.33, 0.66};
  PipelineOpts pipeline;
  TrainOpts train;
  EvalOpts eval;
  OutputOpts out;
};

int run_compare(const CLI::App* cmd, const CompareCli& c) {
  auto manifest = start_manifest(cmd, c.out);
  const auto ds = resolve_shape(c.shape, c.data);
  CompareConfig cfg;
  cfg.models.clear();
  for (const auto& m : c.models) cfg.models.push_back(model_kind_from_string(m));
  cfg.nodes = c.nodes;
  cfg.pipeline = {c.pipeline.nodes, c.pipeline.train_stride, c.pipeline.test_stride};
  cfg.train = resolve_train(c.train);
  cfg.train.eval_missing_fracs = c.missing;
  cfg.train.validate();
  cfg.eval_seed = c.eval.eval_seed;
  cfg.eval = resolve_eval(c.eval, cfg.train.zero_all_labels);
  const auto model_opts = c.model;
  cfg.make_spec = [model_opts](ModelKind kind, const DatasetSpec& spec) {
    auto opts = model_opts;
    // Width and kernel overrides would break the per-model budget match, so
    // only the adjacency variant is shared across kinds.
    opts.hidden.reset();
    opts.kernel.reset();
    opts.lstm_hidden.reset();
    return resolve_model(opts, kind, spec);
  };
  const auto streams = load_records(c.data, ds);
  const auto table = compare(streams, ds, cfg);

  manifest.set_dataset(c.data, ds);
  manifest.seeds = {{"train", cfg.train.seed}, {"eval", cfg.eval_seed}, {"repeats", cfg.train.repeats}};
  auto doc = table.to_json();
  doc["manifest"] = manifest.name();
  write_json_file(manifest.output("compare.json"), doc);
  write_text(manifest.output("compare.txt"), table.text());
  manifest.write();
  fmt::print("{}", table.text());
  return 0;
}

struct GradcheckCli {
  std::vector<std::string> models{"gcnn", "cnn", "lstm"};
  ShapeOpts shape;
  ModelOpts model;
  int nodes = 3;
  std::uint64_t seed = 0;
  int probes = 20;
  double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckCli& g) {
  auto shape = g.shape;
  if (shape.shape.empty() && !shape.features) shape.shape = "extrasensory";
  const auto ds = resolve_shape(shape, "");
  bool ok = true;
  for (const auto& name : g.models) {
    const auto spec = resolve_model(g.model, model_kind_from_string(name), ds);
    const auto r = gradcheck_model(spec, static_cast<std::size_t>(g.nodes), g.seed, g.probes);
    const bool pass = r.max_rel_error < g.tolerance;
    ok = ok && pass;
    fmt::print("{:<9} F={} C={} n={}: max relative error {:.3e} over {} probes (worst {}[{}]) {} vs {:g}\n",
               display_name(spec.kind), ds.features, ds.classes, g.nodes, r.max_rel_error, r.probes, r.worst_param,
               r.worst_index, pass ? "PASS" : "FAIL", g.tolerance);
  }
  if (!ok) {
    std::fprintf(stderr, "error: kind=numerical msg=\"gradient check failed\"\n");
    return kExitNumerical;
  }
  return 0;
}

struct ParamsCli {
  std::vector<std::string> models{"gcnn", "cnn", "lstm"};
  ShapeOpts shape;
  ModelOpts model;
  bool strict = false;
  double tolerance = 0.20;
};

int run_params(const ParamsCli& p) {
  auto shape = p.shape;
  if (shape.shape.empty() && !shape.features) shape.shape = "extrasensory";
  const auto ds = resolve_shape(shape, "");
  const auto budget = param_budget(ds.features, ds.classes);
  bool ok = true;
  for (const auto& name : p.models) {
    const auto spec = resolve_model(p.model, model_kind_from_string(name), ds);
    const auto count = param_count(spec);
    if (budget) {
      const double dev = (static_cast<double>(count) - static_cast<double>(*budget)) / static_cast<double>(*budget);
      const bool within = std::abs(dev) <= p.tolerance;
      ok = ok && within;
      fmt::print("{:<9} F={} C={}: {} parameters, {:+.1f}% vs {}; within {:.0f}% of {}: {}\n", display_name(spec.kind),
                 ds.features, ds.classes, count, 100.0 * dev, *budget, 100.0 * p.tolerance, *budget,
                 within ? "yes" : "no");
    } else {
      fmt::print("{:<9} F={} C={}: {} parameters (no budget for this shape)\n", display_name(spec.kind), ds.features,
                 ds.classes, count);
    }
  }
  if (!ok && p.strict) {
    std::fprintf(stderr, "error: kind=validation msg=\"parameter budget exceeded\"\n");
    return kExitValidation;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chronological activity-graph classifier (HAR-GCNN) with CNN and LSTM baselines"};
  app.set_version_flag("--version", std::string("hargcnn ") + HARGCNN_VERSION);
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);

  SynthCli synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic chronological activity dataset");
  synth_cmd->add_option("--classes", synth.opts.classes, "Activity classes K")->capture_default_str();
  synth_cmd->add_option("--features", synth.opts.features, "Feature count F")->capture_default_str();
  synth_cmd->add_option("--steps", synth.opts.steps, "Rows per subject")->capture_default_str();
  synth_cmd->add_option("--self-prob", synth.opts.self_prob, "Self-transition probability")->capture_default_str();
  synth_cmd->add_option("--feature-std", synth.opts.feature_std, "Feature noise std")->capture_default_str();
  synth_cmd->add_option("--mean-scale", synth.opts.mean_scale, "Std of the class means")->capture_default_str();
  synth_cmd->add_flag("--multilabel", synth.opts.multilabel, "Append parity and upper-half attribute labels");
  synth_cmd->add_flag("--scripted", synth.opts.scripted, "Deterministic cycle through the classes");
  synth_cmd->add_option("--seed", synth.opts.seed, "Dataset seed")->capture_default_str();
  synth_cmd->add_option("--subjects", synth.subjects, "Independent subjects")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--name", synth.name, "CSV file name inside --out")->capture_default_str();
  add_output(synth_cmd, synth.out);

  TrainCli train_cli;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write checkpoints");
  train_cmd->add_option("--data", train_cli.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  add_shape(train_cmd, train_cli.shape);
  add_model(train_cmd, train_cli.model);
  add_pipeline(train_cmd, train_cli.pipeline);
  add_train(train_cmd, train_cli.train);
  add_eval(train_cmd, train_cli.eval);
  train_cmd->add_option("--missing", train_cli.missing, "Missing-label fraction of the monitoring masks")->capture_default_str();
  add_output(train_cmd, train_cli.out);

  EvalCli eval_cli;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on the test split under fixed masks");
  eval_cmd->add_option("--checkpoint", eval_cli.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_cli.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--nodes", eval_cli.nodes, "Activities per graph (default: as trained)");
  eval_cmd->add_option("--missing", eval_cli.missing, "Missing-label fraction")->capture_default_str();
  eval_cmd->add_option("--masks", eval_cli.masks_file, "Reuse a saved mask file")->check(CLI::ExistingFile);
  eval_cmd->add_flag("--zero-all-labels", eval_cli.zero_all_labels, "Zero every input label");
  add_shape(eval_cmd, eval_cli.shape);
  add_eval(eval_cmd, eval_cli.eval);
  add_output(eval_cmd, eval_cli.out);

  CompareCli compare_cli;
  auto* compare_cmd = app.add_subcommand("compare", "Train and score all model kinds on identical data and masks");
  compare_cmd->add_option("--data", compare_cli.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--models", compare_cli.models, "Model kinds")->delimiter(',')->capture_default_str();
  compare_cmd->add_option("--nodes", compare_cli.nodes, "Activities per graph, one grid row group each")
      ->delimiter(',')
      ->capture_default_str();
  compare_cmd->add_option("--missing", compare_cli.missing, "Missing-label fractions")->delimiter(',')->capture_default_str();
  add_shape(compare_cmd, compare_cli.shape);
  compare_cmd->add_option("--adjacency-variant", compare_cli.model.adjacency, "Adjacency normalization")
      ->check(CLI::IsMember({"as-written", "kipf"}))
      ->capture_default_str();
  add_pipeline(compare_cmd, compare_cli.pipeline, false);
  add_train(compare_cmd, compare_cli.train);
  compare_cmd->add_option("--repeats", compare_cli.train.cfg.repeats, "Seeds per cell")->capture_default_str();
  add_eval(compare_cmd, compare_cli.eval);
  add_output(compare_cmd, compare_cli.out);

  GradcheckCli grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  grad_cmd->add_option("--models", grad.models, "Model kinds")->delimiter(',')->capture_default_str();
  add_shape(grad_cmd, grad.shape);
  add_model(grad_cmd, grad.model, false);
  grad_cmd->add_option("--nodes", grad.nodes, "Nodes in the random graph")->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed, "Init and data seed")->capture_default_str();
  grad_cmd->add_option("--probes", grad.probes, "Probed entries per tensor")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "Pass threshold")->capture_default_str();

  ParamsCli params;
  auto* params_cmd = app.add_subcommand("params", "Exact parameter counts against the budget");
  params_cmd->add_option("--models", params.models, "Model kinds")->delimiter(',')->capture_default_str();
  add_shape(params_cmd, params.shape);
  add_model(params_cmd, params.model, false);
  params_cmd->add_flag("--strict", params.strict, "Exit nonzero when a count leaves the budget band");
  params_cmd->add_option("--tolerance", params.tolerance, "Allowed relative deviation")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: kind=usage msg=%s\n", quote(e.what()).c_str());
    return kExitUsage;
  }

  try {
    set_adjacency_warnings(true);
    if (*synth_cmd) return run_synth(synth_cmd, synth);
    if (*train_cmd) return run_train(train_cmd, train_cli);
    if (*eval_cmd) return run_eval(eval_cmd, eval_cli);
    if (*compare_cmd) return run_compare(compare_cmd, compare_cli);
    if (*grad_cmd) return run_gradcheck(grad);
    if (*params_cmd) return run_params(params);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: kind=%s msg=%s\n", std::string(to_string(e.kind())).c_str(), quote(e.what()).c_str());
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: kind=format msg=%s\n", quote(e.what()).c_str());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: kind=internal msg=%s\n", quote(e.what()).c_str());
    return 1;
  }
  return kExitUsage;
}
