#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hargcnn/error.hpp"
#include "hargcnn/trainer.hpp"
#include "support/oracles.hpp"

using namespace hargcnn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median of the last 100 step losses below the median of the first 100.
bool loss_decreased(const RunHistory& h, std::string* note = nullptr) {
  const auto& l = h.step_loss;
  if (l.size() < 200) {
    if (note) *note = fmt::format("only {} steps", l.size());
    return false;
  }
  const double first = median({l.begin(), l.begin() + 100});
  const double last = median({l.end() - 100, l.end()});
  if (note) *note = fmt::format("loss median {:.4f} -> {:.4f}", first, last);
  return last < first;
}

ModelSpec context_spec() {
  auto spec = default_spec(ModelKind::har_gcnn, 52, 12, false);
  spec.kernel = 3;
  spec.hidden = 18;
  return spec;
}

Outcome gradients() {
  double worst = 0.0;
  std::string where;
  for (auto [f, c, ml] : {std::tuple{224, 51, true}, std::tuple{52, 12, false}}) {
    for (auto kind : {ModelKind::har_gcnn, ModelKind::cnn_baseline, ModelKind::lstm_baseline}) {
      const auto r = gradcheck_model(default_spec(kind, f, c, ml), 3, 1);
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        where = fmt::format("{} F={} {}", to_string(kind), f, r.worst_param);
      }
    }
  }
  return {worst < 1e-4, fmt::format("max rel error {:.2e} ({})", worst, where)};
}

Outcome adjacency() {
  double worst = 0.0;
  for (int n : {1, 2, 3, 5, 10, 25}) {
    const auto& a = normalize_adjacency(n, AdjacencyVariant::as_written).matrix;
    const auto& k = normalize_adjacency(n, AdjacencyVariant::kipf).matrix;
    const auto a2 = oracle::matmul(oracle::to_matrix(a), oracle::to_matrix(a));
    for (int i = 0; i < n; ++i) {
      double row = 0.0, krow = 0.0;
      for (int j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(a(i, j) - ((i == j ? 1.0 : 0.0) - 1.0 / n)));
        worst = std::max(worst, std::abs(a2[i][j] - a(i, j)));
        row += a(i, j);
        krow += k(i, j);
      }
      worst = std::max({worst, std::abs(row), std::abs(krow - 1.0)});
    }
  }
  return {worst <= 1e-12, fmt::format("max deviation {:.2e}", worst)};
}

Outcome budgets() {
  bool ok = true;
  std::string detail;
  for (auto [f, c, ml] : {std::tuple{224, 51, true}, std::tuple{52, 12, false}}) {
    const double budget = static_cast<double>(*param_budget(f, c));
    for (auto kind : {ModelKind::har_gcnn, ModelKind::cnn_baseline, ModelKind::lstm_baseline}) {
      const auto n = param_count(default_spec(kind, f, c, ml));
      ok = ok && std::abs(static_cast<double>(n) - budget) <= 0.2 * budget;
      detail += fmt::format("{}{}={}", detail.empty() ? "" : " ", display_name(kind), n);
    }
  }
  return {ok, detail};
}

Outcome capacity() {
  SynthOptions o;
  o.steps = 40;
  o.seed = 4;
  const auto cfg = make_synth_config(o);
  const auto streams = synth_generate_subjects(cfg, 1);
  const auto stats = Standardizer::fit(streams);
  auto graphs = window_graphs(stats.apply(streams[0]), {3, 3});
  graphs.resize(10);
  auto model = Model::create(default_spec(ModelKind::har_gcnn, 52, 12, false), 4);
  TrainConfig tc;
  tc.epochs = 2000;
  tc.lr = 1e-2;
  tc.graphs_per_step = 10;
  tc.corruption = CorruptionConfig::none();
  const auto r = train(model, graphs, tc);
  const auto& l = r.history.step_loss;
  const auto hit = std::find_if(l.begin(), l.end(), [](double v) { return v < 0.01; });
  std::string note;
  const bool dec = loss_decreased(r.history, &note);
  const bool reached = hit != l.end();
  return {reached && dec,
          fmt::format("{} after {} steps, final loss {:.2e}, {}", reached ? "loss < 0.01" : "loss never < 0.01",
                      reached ? hit - l.begin() + 1 : static_cast<long>(l.size()), l.back(), note)};
}

struct SynthRun {
  double feature_std = 0.0;
  double bayes = 0.0;
  PreparedData data;
};

SynthRun synth_dataset(SynthOptions o, double bayes_target) {
  SynthRun out;
  out.feature_std = oracle::feature_std_for_bayes(o, bayes_target, 20000, 5);
  o.feature_std = out.feature_std;
  const auto cfg = make_synth_config(o);
  out.bayes = oracle::bayes_feature_accuracy(cfg, 200000, 9);
  out.data = prepare_dataset(synth_generate_subjects(cfg, 1), cfg.dataset_spec(), PipelineConfig{});
  return out;
}

Outcome scripted() {
  SynthOptions o;
  o.scripted = true;
  o.seed = 11;
  const auto ds = synth_dataset(o, 0.85);
  const auto masks = make_eval_masks(ds.data.test, 0.66, 3);
  double mean = 0.0;
  bool dec = true;
  std::string runs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto model = Model::create(context_spec(), seed);
    TrainConfig tc;
    tc.seed = seed;
    const auto r = train(model, ds.data.train, tc);
    dec = dec && loss_decreased(r.history);
    const double f1 = evaluate(model, ds.data.test, masks).macro_f1;
    mean += f1 / 3.0;
    runs += fmt::format(" {:.3f}", f1);
  }
  const bool ok = mean >= 0.99 && std::abs(ds.bayes - 0.85) < 0.01 && dec;
  return {ok, fmt::format("feature_std {:.4f} bayes {:.4f}; 66% missing F1 mean {:.4f} (runs{}){}", ds.feature_std,
                          ds.bayes, mean, runs, dec ? "" : "; loss did not decrease")};
}

Outcome context() {
  SynthOptions o;
  o.self_prob = 0.8;
  o.seed = 21;
  const auto ds = synth_dataset(o, 0.70);
  const auto masks = make_eval_masks(ds.data.test, 0.33, 3);
  double with = 0.0, without = 0.0;
  bool dec = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (bool zero : {false, true}) {
      auto model = Model::create(context_spec(), seed);
      TrainConfig tc;
      tc.seed = seed;
      tc.zero_all_labels = zero;
      const auto r = train(model, ds.data.train, tc);
      dec = dec && loss_decreased(r.history);
      EvalOptions eo;
      eo.zero_all_labels = zero;
      (zero ? without : with) += evaluate(model, ds.data.test, masks, eo).macro_f1 / 3.0;
    }
  }
  const double gap = 100.0 * (with - without);
  const bool ok = gap >= 5.0 && std::abs(ds.bayes - 0.70) < 0.01 && dec;
  return {ok, fmt::format("feature_std {:.4f} bayes {:.4f}; F1 33% missing {:.4f} vs all zeroed {:.4f}, gap {:.1f} "
                          "points{}",
                          ds.feature_std, ds.bayes, with, without, gap, dec ? "" : "; loss did not decrease")};
}

Outcome protocol() {
  SynthOptions o;
  o.steps = 240;
  o.seed = 6;
  const auto sc = make_synth_config(o);
  CompareConfig cfg;
  cfg.nodes = {3, 5};
  cfg.train.epochs = 1;
  cfg.train.eval_missing_fracs = {0.33, 0.66};
  const auto t = compare(synth_generate_subjects(sc, 2), sc.dataset_spec(), cfg);
  bool ok = t.cells.size() == 3u * 2u * 2u;
  for (int n : cfg.nodes) {
    for (double f : cfg.train.eval_missing_fracs) {
      const auto h = t.at(ModelKind::har_gcnn, n, f).mask_hash;
      for (auto kind : cfg.models) {
        const auto& cell = t.at(kind, n, f);
        ok = ok && cell.mask_hash == h && cell.runs.size() == 3u;
      }
    }
  }
  const std::size_t h33 = eval_hidden_count(3, 0.33), h66 = eval_hidden_count(3, 0.66);
  const auto hidden33 = t.at(ModelKind::har_gcnn, 3, 0.33).runs.at(0).hidden_node_count;
  const auto hidden66 = t.at(ModelKind::har_gcnn, 3, 0.66).runs.at(0).hidden_node_count;
  ok = ok && h33 == 1 && h66 == 2 && hidden33 > 0 && hidden66 == 2 * hidden33;
  return {ok, fmt::format("{} cells, shared mask hashes, n=3 hides {} / {} nodes", t.cells.size(), h33, h66)};
}

Outcome determinism() {
  SynthOptions o;
  o.steps = 1200;
  o.feature_std = 2.0;
  o.seed = 8;
  const auto sc = make_synth_config(o);
  const auto streams = synth_generate_subjects(sc, 2);
  const auto spec = sc.dataset_spec();
  const PipelineConfig pc;
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 5;

  auto run = [&](const PreparedData& data, std::span<const ActivityGraph> test) {
    auto model = Model::create(default_spec(ModelKind::har_gcnn, spec.features, spec.classes, spec.multilabel), 13);
    auto result = train(model, data.train, tc);
    const auto report = evaluate(model, test, make_eval_masks(test, 0.33, 2)).to_json().dump();
    return std::pair{std::move(result), report};
  };
  const auto full = prepare_dataset(streams, spec, pc);
  const auto [a, report_a] = run(full, full.test);
  const auto [b, report_b] = run(full, full.test);

  auto truncated = streams;
  for (std::size_t s = 0; s < truncated.size(); ++s) truncated[s].rows.resize(full.split_rows[s]);
  const auto train_only = prepare_train_only(truncated, spec, pc, full.split_rows);
  const auto [c, report_c] = run(train_only, full.test);

  const bool same = a.final_checkpoint.same_weights(b.final_checkpoint) && report_a == report_b;
  const bool leak_free = a.final_checkpoint.same_weights(c.final_checkpoint) && report_a == report_c;
  std::string note;
  const bool dec = loss_decreased(a.history, &note);
  return {same && leak_free && dec, fmt::format("repeat {}, test rows removed {}, {}", same ? "identical" : "DIFFERS",
                                                leak_free ? "identical" : "DIFFERS", note)};
}

Outcome corruption_stats() {
  CorruptionConfig cfg;
  cfg.noise_prob = 1.0;
  cfg.noise_std = 1.0;
  Rng rng(17);
  const Tensor zeros({2000, 52});
  double sum = 0, sq = 0, count = 0;
  while (count < 1e5) {
    const auto out = add_noise(zeros, cfg, rng);
    for (double v : out.data()) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  const double mean = sum / count, sd = std::sqrt(sq / count - mean * mean);

  std::mt19937_64 grng(3);
  CorruptionConfig hide;
  hide.hide_prob = 0.9;
  std::size_t violations = 0;
  double max_frac = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + i % 25;
    const auto g = oracle::random_graph(n, 2, 2, grng, true);
    std::size_t h = 0;
    for (auto b : hide_labels(g, hide, rng)) h += b;
    const double frac = static_cast<double>(h) / static_cast<double>(n);
    max_frac = std::max(max_frac, frac);
    // "66%" is two thirds: at least ceil(n/3) nodes keep their labels (3 nodes -> 2 hidden)
    if (h > n - (n + 2) / 3 || 3 * h > 2 * n) ++violations;
  }
  const bool ok = std::abs(mean) <= 0.02 && std::abs(sd - 1.0) <= 0.02 && violations == 0;
  return {ok, fmt::format("{:.0f} components mean {:+.4f} std {:.4f}; max hidden fraction {:.3f} over 10000 graphs, {} "
                          "above the cap",
                          count, mean, sd, max_frac, violations)};
}

Outcome metric_fixtures() {
  bool ok = true;
  // tp 3, fp 1, fn 1 on class 0; class 1 never present and never predicted
  const auto pred = Tensor::matrix({{1, 0}, {1, 0}, {1, 0}, {1, 0}, {0, 0}, {0, 0}});
  const auto truth = Tensor::matrix({{1, 0}, {1, 0}, {1, 0}, {0, 0}, {1, 0}, {0, 0}});
  const auto r = compute_report(pred, truth, {}, true);
  ok = ok && r.per_class[0].f1 == 0.75 && r.per_class[1].f1 == 0.0 && r.macro_f1 == 0.375;
  ok = ok && r.per_class[0].acc == 4.0 / 6.0 && r.per_class[1].acc == 1.0 && r.mean_acc == (4.0 / 6.0 + 1.0) / 2.0;
  const auto single = compute_report(Tensor::matrix({{1, 0}, {0, 1}, {1, 0}, {1, 0}}),
                                     Tensor::matrix({{1, 0}, {0, 1}, {0, 1}, {1, 0}}), {}, false);
  // class 0: tp 2 fp 1 fn 0 -> 0.8; class 1: tp 1 fp 0 fn 1 -> 2/3
  ok = ok && single.macro_f1 == (0.8 + 2.0 / 3.0) / 2.0 && single.mean_acc == 0.75;
  // class A perfect, class B tp 1 fp 1 fn 1 -> (1.0 + 0.5) / 2
  const auto two = compute_report(Tensor::matrix({{1, 1}, {0, 1}, {1, 0}}), Tensor::matrix({{1, 1}, {0, 0}, {1, 1}}),
                                  {}, true);
  ok = ok && two.per_class[0].f1 == 1.0 && two.per_class[1].f1 == 0.5 && two.macro_f1 == 0.75;
  const auto perfect = compute_report(truth, truth, {}, true);
  ok = ok && perfect.per_class[0].f1 == 1.0 && perfect.mean_acc == 1.0;
  bool raised = false;
  try {
    const std::vector<std::uint8_t> none(6, 0);
    compute_report(pred, truth, none, true);
  } catch (const Error& e) {
    raised = e.kind() == ErrorKind::no_targets;
  }
  ok = ok && raised;
  return {ok, fmt::format("two-class macro {:.3f}, degenerate-class macro {:.3f}, single-label macro {:.4f} acc {:.2f}",
                          two.macro_f1, r.macro_f1, single.macro_f1, single.mean_acc)};
}

}  // namespace

int main() {
  set_adjacency_warnings(false);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"adjacency algebra", adjacency},
      {"parameter budgets", budgets},
      {"capacity smoke test", capacity},
      {"scripted chronology", scripted},
      {"chronological context benefit", context},
      {"protocol fidelity", protocol},
      {"determinism and leakage", determinism},
      {"corruption statistics", corruption_stats},
      {"metrics fixtures", metric_fixtures},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("criterion {:>2} {} {}: {} [{:.1f}s]\n", i + 1, out.pass ? "PASS" : "FAIL", criteria[i].first,
               out.detail, secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
