#include "hargcnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "hargcnn/error.hpp"
#include "hargcnn/hash.hpp"
#include "hargcnn/random.hpp"

namespace hargcnn {

using nlohmann::json;

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

void DatasetSpec::validate() const {
  if (features <= 0 || classes <= 0) {
    fail(ErrorKind::config, fmt::format("dataset needs F > 0 and C > 0, got F={} C={}", features, classes));
  }
}

std::vector<std::string> DatasetSpec::header() const {
  std::vector<std::string> cols{"subject", "timestamp"};
  for (int f = 0; f < features; ++f) cols.push_back(fmt::format("f{}", f));
  if (multilabel) {
    for (int c = 0; c < classes; ++c) cols.push_back(fmt::format("l{}", c));
  } else {
    cols.emplace_back("label");
  }
  return cols;
}

json DatasetSpec::to_json() const { return {{"features", features}, {"classes", classes}, {"multilabel", multilabel}}; }

DatasetSpec DatasetSpec::from_json(const json& doc) {
  try {
    DatasetSpec s{doc.at("features").get<int>(), doc.at("classes").get<int>(), doc.at("multilabel").get<bool>()};
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed dataset spec: {}", e.what()));
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

std::vector<RecordStream> parse_records(std::istream& in, const DatasetSpec& spec, const std::string& source) {
  spec.validate();
  const auto expected = spec.header();
  std::vector<RecordStream> streams;
  std::map<std::string, std::size_t, std::less<>> index;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  auto where = [&] { return fmt::format("{}:{}", source, line_no); };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (!seen_header) {
      seen_header = true;
      if (cells.size() != expected.size() || !std::equal(cells.begin(), cells.end(), expected.begin())) {
        fail(ErrorKind::format, fmt::format("{}: header has {} columns, expected {} ({},{},f0..,{})", where(),
                                            cells.size(), expected.size(), expected[0], expected[1],
                                            spec.multilabel ? "l0.." : "label"));
      }
      continue;
    }
    if (cells.size() != expected.size()) {
      fail(ErrorKind::format, fmt::format("{}: {} columns, expected {}", where(), cells.size(), expected.size()));
    }
    Record r;
    if (cells[0].empty()) fail(ErrorKind::format, fmt::format("{}: empty subject", where()));
    if (!parse_double(cells[1], r.timestamp) || !std::isfinite(r.timestamp)) {
      fail(ErrorKind::format, fmt::format("{}: bad timestamp '{}'", where(), cells[1]));
    }
    r.features.resize(static_cast<std::size_t>(spec.features));
    for (int f = 0; f < spec.features; ++f) {
      const auto cell = cells[2 + static_cast<std::size_t>(f)];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!cell.empty() && cell != "nan" && cell != "NaN") {
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          fail(ErrorKind::format, fmt::format("{}: bad value '{}' in column f{}", where(), cell, f));
        }
      }
      r.features[static_cast<std::size_t>(f)] = v;
    }
    r.labels.assign(static_cast<std::size_t>(spec.classes), 0.0);
    const std::size_t label_col = 2 + static_cast<std::size_t>(spec.features);
    if (spec.multilabel) {
      for (int c = 0; c < spec.classes; ++c) {
        const auto cell = cells[label_col + static_cast<std::size_t>(c)];
        if (cell == "1") {
          r.labels[static_cast<std::size_t>(c)] = 1.0;
        } else if (cell != "0") {
          fail(ErrorKind::format, fmt::format("{}: label l{} must be 0 or 1, got '{}'", where(), c, cell));
        }
      }
    } else {
      const auto cell = cells[label_col];
      long long id = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        fail(ErrorKind::format, fmt::format("{}: bad class id '{}'", where(), cell));
      }
      if (id < 0 || id >= spec.classes) {
        fail(ErrorKind::range, fmt::format("{}: class id {} outside [0, {})", where(), id, spec.classes));
      }
      r.labels[static_cast<std::size_t>(id)] = 1.0;
    }

    auto it = index.find(cells[0]);
    if (it == index.end()) {
      it = index.emplace(std::string(cells[0]), streams.size()).first;
      streams.push_back({std::string(cells[0]), {}});
    }
    auto& rows = streams[it->second].rows;
    if (!rows.empty() && !(r.timestamp > rows.back().timestamp)) {
      fail(ErrorKind::ordering, fmt::format("{}: timestamp {} of subject '{}' does not follow {}", where(), r.timestamp,
                                            cells[0], rows.back().timestamp));
    }
    rows.push_back(std::move(r));
  }
  return streams;
}

std::vector<RecordStream> load_records(const std::filesystem::path& path, const DatasetSpec& spec) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, fmt::format("cannot open {}", path.string()));
  return parse_records(in, spec, path.string());
}

void write_records(const std::filesystem::path& path, std::span<const RecordStream> streams, const DatasetSpec& spec) {
  spec.validate();
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::io, fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, fmt::format("cannot open {} for writing", path.string()));
  out << fmt::format("{}\n", fmt::join(spec.header(), ","));
  for (const auto& s : streams) {
    for (const auto& r : s.rows) {
      if (r.features.size() != static_cast<std::size_t>(spec.features) ||
          r.labels.size() != static_cast<std::size_t>(spec.classes)) {
        fail(ErrorKind::dimension, fmt::format("record of subject '{}' has {} features / {} labels, spec is {} / {}",
                                               s.subject_id, r.features.size(), r.labels.size(), spec.features,
                                               spec.classes));
      }
      std::string row = fmt::format("{},{}", s.subject_id, r.timestamp);
      for (double v : r.features) {
        row += ',';
        if (!std::isnan(v)) row += fmt::format("{}", v);
      }
      if (spec.multilabel) {
        for (double l : r.labels) row += l >= 0.5 ? ",1" : ",0";
      } else {
        const auto arg = std::max_element(r.labels.begin(), r.labels.end()) - r.labels.begin();
        row += fmt::format(",{}", arg);
      }
      out << row << '\n';
    }
  }
  if (!out) fail(ErrorKind::io, fmt::format("write to {} failed", path.string()));
}

Standardizer Standardizer::fit(std::span<const RecordStream> streams, std::span<const std::size_t> row_limit) {
  if (row_limit.size() != streams.size()) {
    fail(ErrorKind::dimension, fmt::format("{} row limits for {} streams", row_limit.size(), streams.size()));
  }
  std::size_t dim = 0;
  for (const auto& s : streams) {
    if (!s.rows.empty()) {
      dim = s.rows.front().features.size();
      break;
    }
  }
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  std::vector<std::size_t> count(dim, 0);
  for (std::size_t si = 0; si < streams.size(); ++si) {
    const auto end = std::min(row_limit[si], streams[si].rows.size());
    for (std::size_t r = 0; r < end; ++r) {
      const auto& x = streams[si].rows[r].features;
      if (x.size() != dim) fail(ErrorKind::dimension, "records disagree on feature count");
      for (std::size_t f = 0; f < dim; ++f) {
        if (std::isnan(x[f])) continue;
        sum[f] += x[f];
        ++count[f];
      }
    }
  }
  Standardizer st;
  st.mean.assign(dim, 0.0);
  st.stddev.assign(dim, 0.0);
  for (std::size_t f = 0; f < dim; ++f) {
    if (count[f] > 0) st.mean[f] = sum[f] / static_cast<double>(count[f]);
  }
  for (std::size_t si = 0; si < streams.size(); ++si) {
    const auto end = std::min(row_limit[si], streams[si].rows.size());
    for (std::size_t r = 0; r < end; ++r) {
      const auto& x = streams[si].rows[r].features;
      for (std::size_t f = 0; f < dim; ++f) {
        if (!std::isnan(x[f])) sq[f] += (x[f] - st.mean[f]) * (x[f] - st.mean[f]);
      }
    }
  }
  for (std::size_t f = 0; f < dim; ++f) {
    if (count[f] > 0) st.stddev[f] = std::sqrt(sq[f] / static_cast<double>(count[f]));
  }
  return st;
}

Standardizer Standardizer::fit(std::span<const RecordStream> streams) {
  std::vector<std::size_t> all(streams.size(), std::numeric_limits<std::size_t>::max());
  return fit(streams, all);
}

Record Standardizer::apply(const Record& r) const {
  if (r.features.size() != mean.size()) {
    fail(ErrorKind::dimension, fmt::format("standardizer fitted on {} features, record has {}", mean.size(),
                                           r.features.size()));
  }
  Record out = r;
  for (std::size_t f = 0; f < mean.size(); ++f) {
    const double x = r.features[f];
    if (std::isnan(x)) {
      out.features[f] = 0.0;
    } else {
      out.features[f] = stddev[f] < 1e-8 ? x - mean[f] : (x - mean[f]) / stddev[f];
    }
  }
  return out;
}

RecordStream Standardizer::apply(const RecordStream& s) const {
  RecordStream out{s.subject_id, {}};
  out.rows.reserve(s.rows.size());
  for (const auto& r : s.rows) out.rows.push_back(apply(r));
  return out;
}

json Standardizer::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

Standardizer Standardizer::from_json(const json& doc) {
  try {
    Standardizer st{doc.at("mean").get<std::vector<double>>(), doc.at("stddev").get<std::vector<double>>()};
    if (st.mean.size() != st.stddev.size()) fail(ErrorKind::format, "standardizer mean/stddev lengths differ");
    return st;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed standardizer: {}", e.what()));
  }
}

std::vector<RecordStream> standardize(std::span<const RecordStream> streams, const Standardizer& stats) {
  std::vector<RecordStream> out;
  out.reserve(streams.size());
  for (const auto& s : streams) out.push_back(stats.apply(s));
  return out;
}

void WindowConfig::validate() const {
  if (nodes < 1) fail(ErrorKind::config, fmt::format("nodes per graph must be >= 1, got {}", nodes));
  if (stride < 1) fail(ErrorKind::config, fmt::format("window stride must be >= 1, got {}", stride));
}

std::vector<RowRange> window_ranges(std::size_t row_count, const WindowConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(cfg.nodes);
  const auto step = static_cast<std::size_t>(cfg.stride);
  std::vector<RowRange> out;
  for (std::size_t first = 0; first + m <= row_count; first += step) out.push_back({first, first + m - 1});
  return out;
}

std::vector<ActivityGraph> window_graphs(const RecordStream& stream, const WindowConfig& cfg, std::size_t subject_index,
                                         std::size_t row_limit) {
  const auto rows = std::min(row_limit, stream.rows.size());
  std::vector<ActivityGraph> graphs;
  for (const auto& range : window_ranges(rows, cfg)) {
    std::vector<ActivityNode> nodes;
    for (auto r = range.first; r <= range.last; ++r) {
      const auto& rec = stream.rows[r];
      nodes.push_back({rec.features, rec.labels, true, rec.timestamp});
    }
    graphs.push_back(build_graph(std::move(nodes), {subject_index, range.first, range.last}));
  }
  return graphs;
}

namespace {

struct SplitPoint {
  std::size_t train_count = 0;  // leading windows that train, before straddlers are dropped
  std::size_t split_row = 0;
};

template <typename RangeOf>
SplitPoint split_point(std::size_t n, RangeOf&& range_of) {
  SplitPoint sp;
  sp.train_count = (2 * n + 2) / 3;
  if (sp.train_count < n) {
    sp.split_row = range_of(sp.train_count).first;
  } else {
    sp.split_row = n == 0 ? 0 : range_of(n - 1).last + 1;
  }
  return sp;
}

}  // namespace

ChronologicalSplit chronological_split(std::vector<ActivityGraph> graphs) {
  std::vector<std::vector<ActivityGraph>> by_subject;
  for (auto& g : graphs) {
    const auto s = g.source().subject;
    if (s >= by_subject.size()) by_subject.resize(s + 1);
    by_subject[s].push_back(std::move(g));
  }
  ChronologicalSplit out;
  out.split_rows.assign(by_subject.size(), 0);
  for (std::size_t s = 0; s < by_subject.size(); ++s) {
    auto& list = by_subject[s];
    std::stable_sort(list.begin(), list.end(),
                     [](const ActivityGraph& a, const ActivityGraph& b) { return a.source().first_row < b.source().first_row; });
    const auto sp = split_point(list.size(), [&](std::size_t i) {
      return RowRange{list[i].source().first_row, list[i].source().last_row};
    });
    out.split_rows[s] = sp.split_row;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i < sp.train_count) {
        if (list[i].source().last_row < sp.split_row) out.train.push_back(std::move(list[i]));
      } else {
        out.test.push_back(std::move(list[i]));
      }
    }
  }
  return out;
}

json PipelineConfig::to_json() const {
  return {{"nodes", nodes}, {"train_stride", train_stride}, {"test_stride", effective_test_stride()}};
}

PipelineConfig PipelineConfig::from_json(const json& doc) {
  try {
    return {doc.at("nodes").get<int>(), doc.at("train_stride").get<int>(), doc.at("test_stride").get<int>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::format, fmt::format("malformed pipeline config: {}", e.what()));
  }
}

std::vector<std::size_t> plan_split(std::span<const RecordStream> streams, const PipelineConfig& cfg) {
  const WindowConfig test_windows{cfg.nodes, cfg.effective_test_stride()};
  std::vector<std::size_t> rows;
  rows.reserve(streams.size());
  for (const auto& s : streams) {
    const auto ranges = window_ranges(s.rows.size(), test_windows);
    rows.push_back(split_point(ranges.size(), [&](std::size_t i) { return ranges[i]; }).split_row);
  }
  return rows;
}

PreparedData prepare_train_only(std::span<const RecordStream> streams, const DatasetSpec& spec, const PipelineConfig& cfg,
                                std::span<const std::size_t> split_rows) {
  spec.validate();
  if (split_rows.size() != streams.size()) {
    fail(ErrorKind::dimension, fmt::format("{} split rows for {} subjects", split_rows.size(), streams.size()));
  }
  PreparedData out;
  out.spec = spec;
  out.split_rows.assign(split_rows.begin(), split_rows.end());
  out.stats = Standardizer::fit(streams, split_rows);
  const WindowConfig train_windows{cfg.nodes, cfg.train_stride};
  for (std::size_t s = 0; s < streams.size(); ++s) {
    RecordStream head{streams[s].subject_id, {}};
    const auto end = std::min(split_rows[s], streams[s].rows.size());
    head.rows.assign(streams[s].rows.begin(), streams[s].rows.begin() + static_cast<std::ptrdiff_t>(end));
    auto graphs = window_graphs(out.stats.apply(head), train_windows, s);
    std::move(graphs.begin(), graphs.end(), std::back_inserter(out.train));
  }
  return out;
}

std::vector<ActivityGraph> prepare_test_only(std::span<const RecordStream> streams, const PipelineConfig& cfg,
                                             const Standardizer& stats) {
  const auto split_rows = plan_split(streams, cfg);
  const WindowConfig test_windows{cfg.nodes, cfg.effective_test_stride()};
  std::vector<ActivityGraph> test;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    const auto standardized = stats.apply(streams[s]);
    for (auto& g : window_graphs(standardized, test_windows, s)) {
      if (g.source().first_row >= split_rows[s]) test.push_back(std::move(g));
    }
  }
  return test;
}

PreparedData prepare_dataset(std::span<const RecordStream> streams, const DatasetSpec& spec, const PipelineConfig& cfg) {
  const auto split_rows = plan_split(streams, cfg);
  PreparedData out = prepare_train_only(streams, spec, cfg, split_rows);
  out.test = prepare_test_only(streams, cfg, out.stats);
  return out;
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  const auto k = static_cast<std::size_t>(classes);
  if (classes < 2) fail(ErrorKind::config, fmt::format("synthetic data needs K >= 2 classes, got {}", classes));
  if (transition.size() != k || class_means.size() != k) {
    fail(ErrorKind::config, fmt::format("transition and class means need {} rows", k));
  }
  for (const auto& row : transition) {
    if (row.size() != k) fail(ErrorKind::config, "transition matrix must be K x K");
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) fail(ErrorKind::config, "transition probabilities must be non-negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::config, fmt::format("transition row sums to {}", total));
  }
  const auto f = class_means.front().size();
  if (f == 0) fail(ErrorKind::config, "synthetic data needs F >= 1");
  for (const auto& row : class_means) {
    if (row.size() != f) fail(ErrorKind::config, "class means must share one feature count");
  }
  if (!(feature_std >= 0.0) || !std::isfinite(feature_std)) {
    fail(ErrorKind::config, fmt::format("feature_std must be finite and >= 0, got {}", feature_std));
  }
  if (steps < 1) fail(ErrorKind::config, fmt::format("steps must be >= 1, got {}", steps));
  if (!multilabel_attrs.empty()) {
    if (multilabel_attrs.size() != k) fail(ErrorKind::config, "attribute table needs K rows");
    for (const auto& row : multilabel_attrs) {
      if (row.size() != multilabel_attrs.front().size()) fail(ErrorKind::config, "attribute rows differ in length");
    }
  }
}

DatasetSpec SynthConfig::dataset_spec() const {
  const int attrs = multilabel_attrs.empty() ? 0 : static_cast<int>(multilabel_attrs.front().size());
  return {features(), classes + attrs, !multilabel_attrs.empty()};
}

SynthConfig make_synth_config(const SynthOptions& opts) {
  if (opts.classes < 2) fail(ErrorKind::config, fmt::format("synthetic data needs K >= 2 classes, got {}", opts.classes));
  if (opts.features < 1) fail(ErrorKind::config, fmt::format("synthetic data needs F >= 1, got {}", opts.features));
  if (!opts.scripted && !(opts.self_prob >= 0.0 && opts.self_prob <= 1.0)) {
    fail(ErrorKind::config, fmt::format("self_prob must lie in [0, 1], got {}", opts.self_prob));
  }
  const auto k = static_cast<std::size_t>(opts.classes);
  SynthConfig cfg;
  cfg.classes = opts.classes;
  cfg.feature_std = opts.feature_std;
  cfg.steps = opts.steps;
  cfg.seed = opts.seed;
  cfg.transition.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t z = 0; z < k; ++z) {
    const double stay = opts.scripted ? 0.0 : opts.self_prob;
    cfg.transition[z][z] += stay;
    cfg.transition[z][(z + 1) % k] += 1.0 - stay;
  }
  Rng rng(derive_seed(opts.seed, {1}));
  std::normal_distribution<double> normal(0.0, 1.0);
  cfg.class_means.assign(k, std::vector<double>(static_cast<std::size_t>(opts.features)));
  for (auto& row : cfg.class_means) {
    for (auto& v : row) v = opts.mean_scale * normal(rng);
  }
  if (opts.multilabel) {
    for (std::size_t z = 0; z < k; ++z) {
      cfg.multilabel_attrs.push_back({static_cast<double>(z % 2), z >= k / 2 ? 1.0 : 0.0});
    }
  }
  cfg.validate();
  return cfg;
}

RecordStream synth_generate(const SynthConfig& cfg, std::size_t subject) {
  cfg.validate();
  const auto k = static_cast<std::size_t>(cfg.classes);
  const auto spec = cfg.dataset_spec();
  Rng chain(derive_seed(cfg.seed, {2, subject}));
  Rng noise(derive_seed(cfg.seed, {3, subject}));
  std::uniform_int_distribution<std::size_t> start(0, k - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  RecordStream out{fmt::format("s{}", subject), {}};
  out.rows.reserve(static_cast<std::size_t>(cfg.steps));
  std::size_t z = start(chain);
  for (int t = 0; t < cfg.steps; ++t) {
    if (t > 0) {
      const double u = uniform01(chain);
      double acc = 0.0;
      std::size_t next = k - 1;
      for (std::size_t j = 0; j < k; ++j) {
        acc += cfg.transition[z][j];
        if (u < acc) {
          next = j;
          break;
        }
      }
      z = next;
    }
    Record r;
    r.timestamp = static_cast<double>(t);
    r.features = cfg.class_means[z];
    if (cfg.feature_std > 0.0) {
      for (auto& v : r.features) v += cfg.feature_std * normal(noise);
    }
    r.labels.assign(static_cast<std::size_t>(spec.classes), 0.0);
    r.labels[z] = 1.0;
    if (!cfg.multilabel_attrs.empty()) {
      const auto& attrs = cfg.multilabel_attrs[z];
      std::copy(attrs.begin(), attrs.end(), r.labels.begin() + static_cast<std::ptrdiff_t>(k));
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::vector<RecordStream> synth_generate_subjects(const SynthConfig& cfg, std::size_t subjects) {
  std::vector<RecordStream> out;
  out.reserve(subjects);
  for (std::size_t s = 0; s < subjects; ++s) out.push_back(synth_generate(cfg, s));
  return out;
}

}  // namespace hargcnn
