#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hargcnn/graph.hpp"

namespace hargcnn {

/// Column conventions of a dataset CSV.
///
/// Multi-label:  subject,timestamp,f0..f{F-1},l0..l{C-1}   labels in {0,1}
/// Single-label: subject,timestamp,f0..f{F-1},label        label in [0, C)
/// An empty feature cell is a missing value.
struct DatasetSpec {
  int features = 0;
  int classes = 0;
  bool multilabel = true;

  static DatasetSpec extrasensory() { return {224, 51, true}; }
  static DatasetSpec pamap() { return {52, 12, false}; }

  void validate() const;
  std::vector<std::string> header() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& doc);
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Record {
  double timestamp = 0.0;
  std::vector<double> features;  // NaN marks a missing cell
  std::vector<double> labels;    // C entries, multi-hot or one-hot
};

struct RecordStream {
  std::string subject_id;
  std::vector<Record> rows;
};

/// One stream per subject, in order of first appearance. Timestamps must be
/// strictly increasing within a subject.
std::vector<RecordStream> load_records(const std::filesystem::path& path, const DatasetSpec& spec);
std::vector<RecordStream> parse_records(std::istream& in, const DatasetSpec& spec, const std::string& source = "<stream>");
void write_records(const std::filesystem::path& path, std::span<const RecordStream> streams, const DatasetSpec& spec);

/// Per-feature z-scoring with statistics from training rows only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Fit on rows [0, row_limit[s]) of each stream s. Missing cells are skipped.
  static Standardizer fit(std::span<const RecordStream> streams, std::span<const std::size_t> row_limit);
  static Standardizer fit(std::span<const RecordStream> streams);

  /// z = (x - mean) / std; features with std < 1e-8 are only centered; missing -> 0.
  Record apply(const Record& r) const;
  RecordStream apply(const RecordStream& s) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& doc);
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

std::vector<RecordStream> standardize(std::span<const RecordStream> streams, const Standardizer& stats);

struct WindowConfig {
  int nodes = 3;
  int stride = 1;
  void validate() const;
};

struct RowRange {
  std::size_t first = 0;  // inclusive
  std::size_t last = 0;   // inclusive
};

/// Sliding windows of `nodes` consecutive rows over [0, row_count), step
/// `stride`; a shorter tail is dropped.
std::vector<RowRange> window_ranges(std::size_t row_count, const WindowConfig& cfg);

/// Graphs from one standardized stream. Only rows before `row_limit` are used.
std::vector<ActivityGraph> window_graphs(const RecordStream& stream, const WindowConfig& cfg,
                                         std::size_t subject_index = 0,
                                         std::size_t row_limit = static_cast<std::size_t>(-1));

struct ChronologicalSplit {
  std::vector<ActivityGraph> train;
  std::vector<ActivityGraph> test;
  /// Per subject (indexed by GraphSource::subject): first row of the test side.
  std::vector<std::size_t> split_rows;
};

/// Per subject, the first ceil(2n/3) graphs train and the rest test. Training
/// windows reaching past the first test row are dropped, so no source row is
/// shared between the two sides.
ChronologicalSplit chronological_split(std::vector<ActivityGraph> graphs);

struct PipelineConfig {
  int nodes = 3;
  int train_stride = 1;
  int test_stride = 0;  // 0 -> nodes (disjoint evaluation windows)

  int effective_test_stride() const { return test_stride > 0 ? test_stride : nodes; }
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& doc);
};

struct PreparedData {
  DatasetSpec spec;
  Standardizer stats;
  std::vector<std::size_t> split_rows;
  std::vector<ActivityGraph> train;
  std::vector<ActivityGraph> test;
};

/// Split rows per subject, decided on evaluation-stride windows.
std::vector<std::size_t> plan_split(std::span<const RecordStream> streams, const PipelineConfig& cfg);
/// Full pipeline: split, fit statistics on the train side, standardize, window.
PreparedData prepare_dataset(std::span<const RecordStream> streams, const DatasetSpec& spec, const PipelineConfig& cfg);
/// Training artifacts only, from rows before `split_rows`. Streams may already
/// be truncated at the split; the result is identical either way.
PreparedData prepare_train_only(std::span<const RecordStream> streams, const DatasetSpec& spec,
                                const PipelineConfig& cfg, std::span<const std::size_t> split_rows);
/// Test graphs of a dataset, standardized with previously fitted statistics.
std::vector<ActivityGraph> prepare_test_only(std::span<const RecordStream> streams, const PipelineConfig& cfg,
                                             const Standardizer& stats);

// ---------------------------------------------------------------------------
// Synthetic chronological activity data

/// Markov chain over K activity classes emitting Gaussian feature vectors.
struct SynthConfig {
  int classes = 0;
  std::vector<std::vector<double>> transition;   // K x K, rows sum to 1
  std::vector<std::vector<double>> class_means;  // K x F
  double feature_std = 1.0;
  int steps = 0;
  std::uint64_t seed = 0;
  /// K x A binary attribute flags appended to the one-hot class in multi-label
  /// mode. Empty means single-label output.
  std::vector<std::vector<double>> multilabel_attrs;

  void validate() const;
  int features() const { return class_means.empty() ? 0 : static_cast<int>(class_means.front().size()); }
  DatasetSpec dataset_spec() const;
};

struct SynthOptions {
  int classes = 12;
  int features = 52;
  int steps = 3000;
  double self_prob = 0.8;  // ignored when scripted
  double feature_std = 1.0;
  double mean_scale = 1.0;  // class means ~ N(0, mean_scale^2) per component
  bool scripted = false;    // deterministic cycle z -> z+1
  bool multilabel = false;  // one-hot class + parity + upper-half attributes
  std::uint64_t seed = 0;
};

SynthConfig make_synth_config(const SynthOptions& opts);

/// Simulate one subject. Different `subject` indices give independent chains
/// over the same class means.
RecordStream synth_generate(const SynthConfig& cfg, std::size_t subject = 0);
std::vector<RecordStream> synth_generate_subjects(const SynthConfig& cfg, std::size_t subjects);

}  // namespace hargcnn
