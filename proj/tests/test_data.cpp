#include <cmath>
#include <filesystem>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "hargcnn/data.hpp"
#include "hargcnn/error.hpp"

using namespace hargcnn;

namespace {

std::string header_line(const DatasetSpec& spec) { return fmt::format("{}\n", fmt::join(spec.header(), ",")); }

std::vector<RecordStream> parse(const std::string& text, const DatasetSpec& spec) {
  std::istringstream in(text);
  return parse_records(in, spec, "mem.csv");
}

ErrorKind parse_error(const std::string& text, const DatasetSpec& spec, std::string* message = nullptr) {
  try {
    parse(text, spec);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return ErrorKind::state;
}

RecordStream ramp(const std::string& id, std::size_t rows, std::size_t f = 2, std::size_t c = 3) {
  RecordStream s{id, {}};
  for (std::size_t t = 0; t < rows; ++t) {
    Record r;
    r.timestamp = static_cast<double>(t);
    r.features.assign(f, static_cast<double>(t));
    r.labels.assign(c, 0.0);
    r.labels[t % c] = 1.0;
    s.rows.push_back(r);
  }
  return s;
}

}  // namespace

TEST(Csv, ParsesExtraSensoryShapedRow) {
  const auto spec = DatasetSpec::extrasensory();
  std::string row = "u1,100";
  for (int f = 0; f < 224; ++f) row += f == 5 ? "," : fmt::format(",{}", f * 0.5);
  for (int c = 0; c < 51; ++c) row += c % 7 == 0 ? ",1" : ",0";
  const auto streams = parse(header_line(spec) + row + "\n", spec);
  ASSERT_EQ(streams.size(), 1u);
  const auto& r = streams[0].rows.at(0);
  EXPECT_EQ(streams[0].subject_id, "u1");
  EXPECT_EQ(r.timestamp, 100.0);
  ASSERT_EQ(r.features.size(), 224u);
  EXPECT_EQ(r.features[4], 2.0);
  EXPECT_TRUE(std::isnan(r.features[5]));
  ASSERT_EQ(r.labels.size(), 51u);
  EXPECT_EQ(r.labels[7], 1.0);
  EXPECT_EQ(r.labels[8], 0.0);
}

TEST(Csv, EmptyInputGivesNoStreams) {
  EXPECT_TRUE(parse("", DatasetSpec::pamap()).empty());
  EXPECT_TRUE(parse(header_line(DatasetSpec::pamap()), DatasetSpec::pamap()).empty());
}

TEST(Csv, SingleLabelRange) {
  const DatasetSpec spec{2, 12, false};
  const auto ok = parse(header_line(spec) + "a,0,1,2,11\n", spec);
  EXPECT_EQ(ok[0].rows[0].labels[11], 1.0);
  EXPECT_EQ(parse_error(header_line(spec) + "a,0,1,2,12\n", spec), ErrorKind::range);
  EXPECT_EQ(parse_error(header_line(spec) + "a,0,1,2,-1\n", spec), ErrorKind::range);
}

TEST(Csv, FormatErrorsCarryLineNumbers) {
  const DatasetSpec spec{2, 2, true};
  std::string msg;
  EXPECT_EQ(parse_error(header_line(spec) + "a,0,1,2,0,1\na,1,1,x,0,1\n", spec, &msg), ErrorKind::format);
  EXPECT_NE(msg.find("mem.csv:3"), std::string::npos) << msg;
  EXPECT_EQ(parse_error(header_line(spec) + "a,0,1,2,0\n", spec, &msg), ErrorKind::format);
  EXPECT_NE(msg.find("mem.csv:2"), std::string::npos) << msg;
  EXPECT_EQ(parse_error(header_line(spec) + "a,0,1,2,0,2\n", spec), ErrorKind::format);
  EXPECT_EQ(parse_error("subject,time,f0,f1,l0,l1\n", spec), ErrorKind::format);
}

TEST(Csv, MissingCellsAreNaN) {
  const DatasetSpec spec{3, 2, true};
  const auto s = parse(header_line(spec) + "a,0,,nan,NaN,0,1\n", spec);
  for (double v : s[0].rows[0].features) EXPECT_TRUE(std::isnan(v));
}

TEST(Csv, OrderingIsEnforcedPerSubject) {
  const DatasetSpec spec{1, 2, false};
  const auto ok = parse(header_line(spec) + "a,5,1,0\nb,1,1,0\na,6,1,1\n", spec);
  ASSERT_EQ(ok.size(), 2u);
  EXPECT_EQ(ok[0].subject_id, "a");
  EXPECT_EQ(ok[0].rows.size(), 2u);
  EXPECT_EQ(parse_error(header_line(spec) + "a,5,1,0\na,4,1,0\n", spec), ErrorKind::ordering);
  EXPECT_EQ(parse_error(header_line(spec) + "a,5,1,0\na,5,1,0\n", spec), ErrorKind::ordering);
}

TEST(Csv, RoundTrip) {
  const DatasetSpec spec{2, 3, true};
  std::vector<RecordStream> streams{ramp("a", 4), ramp("b", 2)};
  streams[0].rows[1].features[0] = NAN;
  streams[0].rows[2].features[1] = 0.1 + 0.2;
  const auto path = std::filesystem::temp_directory_path() / "hargcnn_roundtrip.csv";
  write_records(path, streams, spec);
  const auto back = load_records(path, spec);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(std::isnan(back[0].rows[1].features[0]));
  EXPECT_EQ(back[0].rows[2].features[1], 0.1 + 0.2);
  EXPECT_EQ(back[1].rows[1].labels, streams[1].rows[1].labels);
  EXPECT_THROW(load_records("/nonexistent/x.csv", spec), Error);
}

TEST(Standardizer, Examples) {
  RecordStream s{"a", {}};
  for (double v : {1.0, 3.0}) s.rows.push_back({0.0, {v, 5.0, NAN}, {1.0}});
  s.rows[1].timestamp = 1.0;
  s.rows[1].features[2] = 4.0;
  const auto st = Standardizer::fit(std::span<const RecordStream>(&s, 1));
  EXPECT_DOUBLE_EQ(st.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(st.stddev[0], 1.0);
  EXPECT_DOUBLE_EQ(st.mean[2], 4.0);
  const auto z = st.apply(Record{0.0, {4.0, 7.0, NAN}, {1.0}});
  EXPECT_DOUBLE_EQ(z.features[0], 2.0);
  EXPECT_DOUBLE_EQ(z.features[1], 2.0);  // constant column: centered only
  EXPECT_EQ(z.features[2], 0.0);         // missing
  EXPECT_EQ(Standardizer::from_json(st.to_json()), st);
}

TEST(Standardizer, RowLimitExcludesLaterRows) {
  const auto s = ramp("a", 10);
  const std::vector<std::size_t> limit{3};
  const auto st = Standardizer::fit(std::span<const RecordStream>(&s, 1), limit);
  EXPECT_DOUBLE_EQ(st.mean[0], 1.0);
}

TEST(Windows, CountsAndStrides) {
  EXPECT_EQ(window_ranges(10, {3, 1}).size(), 8u);
  const auto r = window_ranges(10, {3, 3});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[2].first, 6u);
  EXPECT_EQ(r[2].last, 8u);
  EXPECT_TRUE(window_ranges(2, {3, 1}).empty());
  EXPECT_THROW(window_ranges(5, {0, 1}), Error);
}

TEST(Windows, SubjectsNeverMix) {
  std::vector<RecordStream> streams{ramp("a", 5), ramp("b", 5)};
  streams[1].rows[0].features[0] = 100.0;
  std::vector<ActivityGraph> all;
  for (std::size_t s = 0; s < 2; ++s)
    for (auto& g : window_graphs(streams[s], {3, 1}, s)) all.push_back(g);
  ASSERT_EQ(all.size(), 6u);
  for (const auto& g : all) {
    const auto src = g.source();
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_EQ(g.node(i).timestamp, static_cast<double>(src.first_row + i));
  }
  EXPECT_EQ(all[3].node(0).features[0], 100.0);
}

TEST(Split, TwoThirdsTrainLatestTest) {
  const auto s = ramp("a", 27);
  const auto split = chronological_split(window_graphs(s, {3, 3}));
  ASSERT_EQ(split.train.size(), 6u);
  ASSERT_EQ(split.test.size(), 3u);
  EXPECT_EQ(split.split_rows[0], 18u);
  for (const auto& g : split.train) EXPECT_LT(g.source().last_row, 18u);
  for (const auto& g : split.test) EXPECT_GE(g.source().first_row, 18u);
}

TEST(Split, SingleGraphTrainsOnly) {
  const auto split = chronological_split(window_graphs(ramp("a", 3), {3, 1}));
  EXPECT_EQ(split.train.size(), 1u);
  EXPECT_TRUE(split.test.empty());
}

TEST(Split, OverlappingWindowsNeverShareRows) {
  const auto split = chronological_split(window_graphs(ramp("a", 11), {3, 1}));
  std::size_t max_train = 0, min_test = 1000;
  for (const auto& g : split.train) max_train = std::max(max_train, g.source().last_row);
  for (const auto& g : split.test) min_test = std::min(min_test, g.source().first_row);
  EXPECT_LT(max_train, min_test);
  EXPECT_EQ(split.test.size(), 3u);
}

TEST(Pipeline, TrainSideIgnoresTestRows) {
  const DatasetSpec spec{2, 3, true};
  std::vector<RecordStream> full{ramp("a", 30), ramp("b", 21)};
  const PipelineConfig cfg{3, 1, 0};
  const auto split_rows = plan_split(full, cfg);
  EXPECT_EQ(split_rows, (std::vector<std::size_t>{21, 15}));
  auto truncated = full;
  for (std::size_t s = 0; s < 2; ++s) {
    truncated[s].rows.resize(split_rows[s]);
    // poison everything after the split; the train side must not change
    for (std::size_t r = split_rows[s]; r < full[s].rows.size(); ++r) full[s].rows[r].features[0] = 1e6;
  }
  const auto a = prepare_train_only(full, spec, cfg, split_rows);
  const auto b = prepare_train_only(truncated, spec, cfg, split_rows);
  EXPECT_EQ(a.stats, b.stats);
  EXPECT_EQ(a.train, b.train);
  const auto prepared = prepare_dataset(full, spec, cfg);
  EXPECT_EQ(prepared.train, a.train);
  for (const auto& g : prepared.test) EXPECT_GE(g.source().first_row, split_rows[g.source().subject]);
  EXPECT_EQ(prepared.test.size(), 3u + 2u);
}

TEST(Synth, ZeroNoiseGivesClassMeans) {
  SynthOptions o;
  o.classes = 4;
  o.features = 3;
  o.steps = 50;
  o.feature_std = 0.0;
  o.seed = 3;
  const auto cfg = make_synth_config(o);
  for (const auto& r : synth_generate(cfg).rows) {
    std::size_t z = 0;
    while (r.labels[z] == 0.0) ++z;
    EXPECT_EQ(r.features, cfg.class_means[z]);
  }
}

TEST(Synth, EmpiricalTransitionsMatch) {
  SynthOptions o;
  o.classes = 4;
  o.features = 2;
  o.steps = 100000;
  o.self_prob = 0.8;
  o.seed = 9;
  const auto cfg = make_synth_config(o);
  const auto s = synth_generate(cfg);
  auto cls = [](const Record& r) {
    std::size_t z = 0;
    while (r.labels[z] == 0.0) ++z;
    return z;
  };
  std::vector<std::vector<double>> counts(4, std::vector<double>(4, 0.0));
  for (std::size_t t = 1; t < s.rows.size(); ++t) counts[cls(s.rows[t - 1])][cls(s.rows[t])] += 1;
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0;
    for (double c : counts[i]) total += c;
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(counts[i][j] / total, cfg.transition[i][j], 0.02);
  }
  EXPECT_DOUBLE_EQ(cfg.transition[1][1], 0.8);
  EXPECT_DOUBLE_EQ(cfg.transition[3][0], 0.2);
}

TEST(Synth, ScriptedCycleAndMultilabel) {
  SynthOptions o;
  o.classes = 4;
  o.features = 2;
  o.steps = 20;
  o.scripted = true;
  o.multilabel = true;
  const auto cfg = make_synth_config(o);
  EXPECT_EQ(cfg.dataset_spec(), (DatasetSpec{2, 6, true}));
  const auto s = synth_generate(cfg);
  std::size_t prev = 99;
  for (const auto& r : s.rows) {
    std::size_t z = 0;
    while (r.labels[z] == 0.0) ++z;
    if (prev != 99) EXPECT_EQ(z, (prev + 1) % 4);
    prev = z;
    EXPECT_EQ(r.labels[4], static_cast<double>(z % 2));
    EXPECT_EQ(r.labels[5], z >= 2 ? 1.0 : 0.0);
  }
}

TEST(Synth, ReproducibleAndSubjectsIndependent) {
  SynthOptions o;
  o.steps = 30;
  o.seed = 5;
  const auto cfg = make_synth_config(o);
  const auto a = synth_generate(cfg, 1), b = synth_generate(cfg, 1), c = synth_generate(cfg, 2);
  EXPECT_EQ(a.rows.size(), 30u);
  EXPECT_EQ(a.subject_id, "s1");
  for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(a.rows[t].features, b.rows[t].features);
  EXPECT_NE(a.rows[0].features, c.rows[0].features);
  auto bad = cfg;
  bad.transition[0][0] += 0.1;
  EXPECT_THROW(bad.validate(), Error);
}
