#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "smartwsn/window_store.hpp"

using namespace smartwsn;

namespace {

WindowConfig scaled() { return {.tick_ms = 1000, .short_len = 60, .avg_group = 5, .long_len = 24}; }

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::filesystem::path& p) {
  const auto text = read_all(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

void expect_close(const EngineeringInstance& a, const EngineeringInstance& b, double tol) {
  EXPECT_EQ(a.node_id, b.node_id);
  EXPECT_EQ(a.timestamp_ms, b.timestamp_ms);
  for (std::size_t s = 0; s < kSensorCount; ++s) EXPECT_NEAR(a.values[s], b.values[s], tol);
}

}  // namespace

TEST(WindowConfig, RejectsZeroDimensions) {
  for (int field = 0; field < 4; ++field) {
    WindowConfig cfg;
    if (field == 1) cfg.short_len = 0;
    if (field == 2) cfg.avg_group = 0;
    if (field == 3) cfg.long_len = 0;
    if (field == 0) cfg.tick_ms = 0;
    EXPECT_THROW(cfg.validate(), Error) << field;
  }
  EXPECT_NO_THROW(WindowConfig{}.validate());
}

TEST(Append, SixtiethAppendAddsOneLongEntry) {
  NodeStore store(1, WindowConfig{});
  for (std::uint64_t i = 1; i <= 59; ++i) {
    EXPECT_FALSE(store.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5)).long_entry_added) << i;
  }
  const auto out = store.append(fixture::instance(60'000, 1, 2, 3, 4, 5));
  EXPECT_TRUE(out.long_entry_added);
  EXPECT_EQ(store.long_buffer().size(), 1u);
  EXPECT_TRUE(store.pending_group().empty());
}

TEST(Append, ShortCycleCompletesOnFifthAppend) {
  WindowConfig cfg{.tick_ms = 1000, .short_len = 5, .avg_group = 2, .long_len = 10};
  NodeStore store(1, cfg);
  for (std::uint64_t i = 1; i <= 4; ++i) EXPECT_FALSE(store.append(fixture::instance(i, 1, 1, 1, 1, 1)).short_cycle_complete);
  EXPECT_TRUE(store.append(fixture::instance(5, 1, 1, 1, 1, 1)).short_cycle_complete);
}

TEST(Append, LongCycleCompletesWhenLongBufferFills) {
  WindowConfig cfg{.tick_ms = 1000, .short_len = 100, .avg_group = 2, .long_len = 3};
  NodeStore store(1, cfg);
  std::size_t completions = 0;
  for (std::uint64_t i = 1; i <= 6; ++i) {
    const auto out = store.append(fixture::instance(i, 1, 1, 1, 1, 1));
    completions += out.long_cycle_complete;
    if (i < 6) EXPECT_FALSE(out.long_cycle_complete);
  }
  EXPECT_EQ(completions, 1u);
}

TEST(Append, EqualOrEarlierTimestampRejected) {
  NodeStore store(1, scaled());
  store.append(fixture::instance(100, 1, 1, 1, 1, 1));
  try {
    store.append(fixture::instance(100, 1, 1, 1, 1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicTimestamp);
  }
  EXPECT_THROW(store.append(fixture::instance(99, 1, 1, 1, 1, 1)), Error);
  EXPECT_EQ(store.short_buffer().size(), 1u);
}

TEST(Append, StampsNodeId) {
  NodeStore store(7, scaled());
  store.append(fixture::instance(1, 1, 1, 1, 1, 1, 3));
  EXPECT_EQ(store.short_buffer().front().node_id, 7u);
}

TEST(Append, ConservationProperty) {
  for (const auto& cfg : {scaled(), WindowConfig{.tick_ms = 1, .short_len = 37, .avg_group = 4, .long_len = 100},
                          WindowConfig{.tick_ms = 1, .short_len = 13, .avg_group = 1, .long_len = 13}}) {
    NodeStore store(1, cfg);
    std::mt19937_64 rng(11);
    for (std::size_t k = 1; k <= cfg.short_len; ++k) {
      store.append(fixture::random_instance(rng, k * 1000));
      ASSERT_EQ(store.short_buffer().size(), std::min(k, cfg.short_len));
      ASSERT_EQ(store.long_buffer().size(), std::min(k / cfg.avg_group, cfg.long_len));
      ASSERT_EQ(store.pending_group().size(), k % cfg.avg_group);
    }
  }
}

TEST(Append, BuffersNeverExceedLengthsAndStayOrdered) {
  WindowConfig cfg{.tick_ms = 1, .short_len = 10, .avg_group = 3, .long_len = 4};
  NodeStore store(1, cfg);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> gap(1, 50);
  std::uint64_t ts = 0;
  for (int i = 0; i < 500; ++i) {
    ts += gap(rng);
    store.append(fixture::random_instance(rng, ts));
    ASSERT_LE(store.short_buffer().size(), cfg.short_len);
    ASSERT_LE(store.long_buffer().size(), cfg.long_len);
    ASSERT_LT(store.pending_group().size(), cfg.avg_group);
    for (const auto* buf : {&store.short_buffer(), &store.long_buffer()}) {
      for (std::size_t j = 1; j < buf->size(); ++j) ASSERT_LT((*buf)[j - 1].timestamp_ms, (*buf)[j].timestamp_ms);
    }
  }
}

TEST(Append, ScaledDimensionsAfterSixtyAppends) {
  NodeStore store(1, scaled());
  for (std::uint64_t i = 1; i <= 60; ++i) store.append(fixture::instance(i * 1000, 1, 1, 1, 1, 1));
  EXPECT_EQ(store.short_buffer().size(), 60u);
  EXPECT_EQ(store.long_buffer().size(), 12u);
}

TEST(MinuteAverage, OneToSixty) {
  std::vector<EngineeringInstance> group;
  for (int i = 1; i <= 60; ++i) group.push_back(fixture::instance(static_cast<std::uint64_t>(i), 7, i, 0.5, 0.25, 3));
  const auto avg = minute_average(group);
  EXPECT_EQ(avg[Sensor::Temperature], 30.5);
  EXPECT_EQ(avg[Sensor::Light], 7.0);
  EXPECT_EQ(avg[Sensor::AccelX], 0.5);
  EXPECT_EQ(avg.timestamp_ms, 60u);
}

TEST(MinuteAverage, IdenticalInstancesAreExact) {
  const auto v = fixture::instance(0, 12.345678, -3.3, 0.1, 0.7, 3.14159, 4);
  std::vector<EngineeringInstance> group;
  for (std::uint64_t i = 0; i < 60; ++i) {
    auto c = v;
    c.timestamp_ms = 1000 + i;
    group.push_back(c);
  }
  const auto avg = minute_average(group);
  EXPECT_EQ(avg.values, v.values);
  EXPECT_EQ(avg.timestamp_ms, 1059u);
  EXPECT_EQ(avg.node_id, 4u);
}

TEST(MinuteAverage, SingleInstanceIsItself) {
  const auto v = fixture::instance(42, 1.5, 2.5, 3.5, 4.5, 5.5, 9);
  const std::vector<EngineeringInstance> group{v};
  EXPECT_EQ(minute_average(group), v);
}

TEST(MinuteAverage, EmptyGroupRejected) {
  try {
    minute_average({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGroup);
  }
}

TEST(MinuteAverage, LinearUnderPerAttributeScaling) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> alpha(-4.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EngineeringInstance> group;
    const std::size_t n = 1 + trial % 60;
    for (std::size_t i = 0; i < n; ++i) group.push_back(fixture::random_instance(rng, i));
    SensorValues a;
    for (auto& x : a) x = alpha(rng);
    auto scaled_group = group;
    for (auto& inst : scaled_group) {
      for (std::size_t s = 0; s < kSensorCount; ++s) inst.values[s] *= a[s];
    }
    const auto base = minute_average(group);
    const auto sc = minute_average(scaled_group);
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      EXPECT_NEAR(sc.values[s], a[s] * base.values[s], 1e-12 * std::max(1.0, std::abs(a[s] * base.values[s])));
    }
  }
}

TEST(TrainingSet, FullShortWindowShape) {
  NodeStore store(1, WindowConfig{});
  std::mt19937_64 rng(1);
  for (std::uint64_t i = 1; i <= 3600; ++i) store.append(fixture::random_instance(rng, i * 1000));
  const auto d = store.training_set(WindowKind::Short, Sensor::Temperature);
  ASSERT_EQ(d.size(), 3600u);
  ASSERT_EQ(d.arity(), 5u);
  const auto snap = store.snapshot(WindowKind::Short);
  for (std::size_t r = 0; r < d.size(); ++r) {
    ASSERT_EQ(d.target(r), snap[r][Sensor::Temperature]);
    ASSERT_EQ(d.feature(r, 0), seconds_since_midnight(snap[r].timestamp_ms));
    ASSERT_EQ(d.feature(r, 1), snap[r][Sensor::Light]);
    ASSERT_EQ(d.feature(r, 2), snap[r][Sensor::AccelX]);
    ASSERT_EQ(d.feature(r, 3), snap[r][Sensor::AccelY]);
    ASSERT_EQ(d.feature(r, 4), snap[r][Sensor::Voltage]);
  }
}

TEST(TrainingSet, TargetNeverAmongFeatures) {
  auto inst = fixture::instance(5000, 1, 2, 3, 4, 5);
  for (Sensor target : kAllSensors) {
    const auto x = features_for(inst, target);
    EXPECT_EQ(std::count(x.begin() + 1, x.end(), inst[target]), 0) << sensor_name(target);
    const auto names = feature_names_for(target);
    EXPECT_EQ(std::count(names.begin(), names.end(), std::string(sensor_name(target))), 0);
  }
}

TEST(TrainingSet, IncompleteBufferRejected) {
  NodeStore store(1, WindowConfig{});
  for (std::uint64_t i = 1; i <= 3599; ++i) store.append(fixture::instance(i * 1000, 1, 1, 1, 1, 1));
  try {
    store.training_set(WindowKind::Short, Sensor::Temperature);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteWindow);
  }
}

TEST(TrainingSet, TimeOfDayWrapsAtMidnight) {
  EXPECT_EQ(seconds_since_midnight(0), 0.0);
  EXPECT_EQ(seconds_since_midnight(kMsPerDay - 500), 86399.5);
  EXPECT_EQ(seconds_since_midnight(3 * kMsPerDay + 61'000), 61.0);
}

TEST(Persistence, RoundTripWithinPrecision) {
  fixture::TempDir dir("ws_roundtrip");
  const auto cfg = scaled();
  NodeStore store(3, cfg);
  std::mt19937_64 rng(8);
  for (std::uint64_t i = 1; i <= 143; ++i) store.append(fixture::random_instance(rng, i * 1000 + 17));
  store.persist(dir.path());
  const auto back = NodeStore::load(dir.path(), 3, cfg);
  ASSERT_EQ(back.short_buffer().size(), store.short_buffer().size());
  ASSERT_EQ(back.long_buffer().size(), store.long_buffer().size());
  ASSERT_EQ(back.pending_group().size(), store.pending_group().size());
  for (std::size_t i = 0; i < store.short_buffer().size(); ++i) expect_close(back.short_buffer()[i], store.short_buffer()[i], 5e-7);
  for (std::size_t i = 0; i < store.long_buffer().size(); ++i) expect_close(back.long_buffer()[i], store.long_buffer()[i], 5e-7);
  for (std::size_t i = 0; i < store.pending_group().size(); ++i) expect_close(back.pending_group()[i], store.pending_group()[i], 5e-7);
  EXPECT_EQ(back.last_timestamp(), store.last_timestamp());
}

TEST(Persistence, ReloadedStoreContinuesLikeOriginal) {
  fixture::TempDir dir("ws_continue");
  const auto cfg = scaled();
  NodeStore a(1, cfg);
  for (std::uint64_t i = 1; i <= 33; ++i) a.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
  a.persist(dir.path());
  auto b = NodeStore::load(dir.path(), 1, cfg);
  EXPECT_THROW(b.append(fixture::instance(33'000, 1, 2, 3, 4, 5)), Error);
  for (std::uint64_t i = 34; i <= 40; ++i) {
    const auto oa = a.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
    const auto ob = b.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
    EXPECT_EQ(oa.long_entry_added, ob.long_entry_added);
  }
  EXPECT_EQ(a.long_buffer().size(), b.long_buffer().size());
}

TEST(Persistence, MissingFilesLoadEmpty) {
  fixture::TempDir dir("ws_missing");
  const auto store = NodeStore::load(dir.path(), 9, scaled());
  EXPECT_TRUE(store.short_buffer().empty());
  EXPECT_FALSE(store.last_timestamp().has_value());
  EXPECT_FALSE(NodeStore::has_files(dir.path(), 9));
}

TEST(Persistence, TruncatedRowNamesLine) {
  fixture::TempDir dir("ws_truncated");
  NodeStore store(2, scaled());
  for (std::uint64_t i = 1; i <= 4; ++i) store.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
  store.persist(dir.path());
  const auto path = window_file(dir.path(), 2, "short");
  auto text = read_all(path);
  text = text.substr(0, text.rfind(',', text.size() - 2)) + "\n";
  std::ofstream(path, std::ios::trunc) << text;
  try {
    NodeStore::load(dir.path(), 2, scaled());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(Persistence, NonNumericFieldRejected) {
  fixture::TempDir dir("ws_garbage");
  const auto path = window_file(dir.path(), 1, "short");
  std::ofstream(path) << kWindowCsvHeader << "\n1000,1,2,abc,4,5\n";
  EXPECT_THROW(read_window_csv(path, 1), Error);
}

TEST(Persistence, SecondPersistOverwrites) {
  fixture::TempDir dir("ws_overwrite");
  const auto cfg = scaled();
  NodeStore store(1, cfg);
  for (std::uint64_t i = 1; i <= 60; ++i) store.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
  store.persist(dir.path());
  EXPECT_EQ(line_count(window_file(dir.path(), 1, "short")), 61u);
  store.rollover(WindowKind::Short);
  for (std::uint64_t i = 61; i <= 70; ++i) store.append(fixture::instance(i * 1000, 1, 2, 3, 4, 5));
  store.persist(dir.path());
  EXPECT_EQ(line_count(window_file(dir.path(), 1, "short")), 11u);
  const auto rows = read_window_csv(window_file(dir.path(), 1, "short"), 1);
  EXPECT_EQ(rows.front().timestamp_ms, 61'000u);
}

TEST(Rollover, ShortLeavesLongUntouched) {
  NodeStore store(1, scaled());
  for (std::uint64_t i = 1; i <= 60; ++i) store.append(fixture::instance(i, 1, 1, 1, 1, 1));
  const auto long_before = store.snapshot(WindowKind::Long);
  store.rollover(WindowKind::Short);
  EXPECT_TRUE(store.short_buffer().empty());
  EXPECT_EQ(store.snapshot(WindowKind::Long), long_before);
}

TEST(Rollover, LongLeavesShortUntouched) {
  WindowConfig cfg{.tick_ms = 1, .short_len = 1000, .avg_group = 2, .long_len = 3};
  NodeStore store(1, cfg);
  for (std::uint64_t i = 1; i <= 6; ++i) store.append(fixture::instance(i, 1, 1, 1, 1, 1));
  store.rollover(WindowKind::Long);
  EXPECT_TRUE(store.long_buffer().empty());
  EXPECT_EQ(store.short_buffer().size(), 6u);
}

TEST(Rollover, PartialBufferRejected) {
  NodeStore store(1, scaled());
  store.append(fixture::instance(1, 1, 1, 1, 1, 1));
  for (auto w : {WindowKind::Short, WindowKind::Long}) {
    try {
      store.rollover(w);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IncompleteWindow);
    }
  }
}
