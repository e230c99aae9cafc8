#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "evattn/event_io.hpp"
#include "evattn/rng.hpp"

using namespace evattn;

namespace {

std::vector<Event> decode(std::vector<std::uint8_t> bytes, StreamHeader h = {34, 34}) {
  return read_aer_bin(bytes, h);
}

}  // namespace

TEST(AerDecode, PositivePolarityRecord) {
  const auto ev = decode({0x0A, 0x14, 0x80, 0x00, 0x64});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0], (Event{10, 20, 100, 1}));
}

TEST(AerDecode, AllZeroRecord) {
  const auto ev = decode({0, 0, 0, 0, 0});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0], (Event{0, 0, 0, -1}));
}

TEST(AerDecode, HighTimestampBits) {
  const auto ev = decode({1, 2, 0x7F, 0xFF, 0xFF, 3, 4, 0x81, 0x02, 0x03});
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].ts, kAerMaxTimestamp);
  EXPECT_EQ(ev[0].polarity, -1);
  EXPECT_EQ(ev[1].ts, 0x010203);
  EXPECT_EQ(ev[1].polarity, 1);
}

TEST(AerDecode, TruncatedRecordReportsOffset) {
  try {
    decode({1, 2, 3, 4, 5, 6, 7});
    FAIL() << "expected a decode error";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.position(), 5u);
  }
}

TEST(AerDecode, OutOfBoundsCoordinate) {
  EXPECT_THROW(decode({34, 0, 0, 0, 0}), ValidationError);
  EXPECT_THROW(decode({0, 40, 0, 0, 0}), ValidationError);
}

TEST(AerDecode, EmptyInput) { EXPECT_TRUE(decode({}).empty()); }

TEST(AerDecode, RoundTripIsByteIdentical) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> bytes;
    const auto n = rng.below(200);
    for (std::uint64_t i = 0; i < n; ++i) {
      bytes.push_back(static_cast<std::uint8_t>(rng.below(128)));
      bytes.push_back(static_cast<std::uint8_t>(rng.below(128)));
      for (int k = 0; k < 3; ++k) bytes.push_back(static_cast<std::uint8_t>(rng.below(256)));
    }
    const auto events = decode(bytes, {128, 128});
    EXPECT_EQ(write_aer_bin(events), bytes);
  }
}

TEST(AerEncode, RejectsUnencodableEvents) {
  const std::vector<Event> big_ts{{0, 0, kAerMaxTimestamp + 1, 1}};
  EXPECT_THROW(write_aer_bin(big_ts), ValidationError);
  const std::vector<Event> big_x{{256, 0, 0, 1}};
  EXPECT_THROW(write_aer_bin(big_x), ValidationError);
}

TEST(Csv, ParsesPositiveEvent) {
  const auto s = read_csv("3,4,250,1\n", {34, 34});
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0], (Event{3, 4, 250, 1}));
}

TEST(Csv, ParsesNegativePolarity) {
  const auto s = read_csv("3,4,250,-1", {34, 34});
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0].polarity, -1);
}

TEST(Csv, WrongArityReportsLine) {
  try {
    read_csv("3,4\n", {34, 34});
    FAIL() << "expected a decode error";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
}

TEST(Csv, ErrorLineCountsCommentsAndBlanks) {
  try {
    read_csv("# x,y,ts_us,polarity\n1,1,1,1\n\n1,1,x,1\n", {34, 34});
    FAIL() << "expected a decode error";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.position(), 4u);
  }
}

TEST(Csv, RejectsBadPolarityAndBounds) {
  EXPECT_THROW(read_csv("1,1,1,0\n", {34, 34}), DecodeError);
  EXPECT_THROW(read_csv("34,1,1,1\n", {34, 34}), ValidationError);
}

TEST(Csv, RegressionIsFlaggedAndOrderKept) {
  const auto s = read_csv("1,1,100,1\r\n2,2,50,1\r\n3,3,120,-1\r\n", {34, 34});
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_TRUE(s.non_monotone);
  EXPECT_EQ(s.events[1].ts, 50);
  EXPECT_EQ(s.events[2].x, 3);
  EXPECT_FALSE(read_csv("1,1,1,1\n1,1,1,1\n", {34, 34}).non_monotone);
}

TEST(Csv, WriteThenReadRoundTrips) {
  const std::vector<Event> ev{{0, 0, 0, -1}, {33, 12, 999999, 1}, {5, 7, 1000000, 1}};
  EXPECT_EQ(read_csv(write_csv(ev), {34, 34}).events, ev);
}

TEST(ShiftEmbed, Translates) {
  const std::vector<Event> ev{{5, 7, 10, 1}};
  const auto out = shift_embed(ev, {34, 34}, {68, 68}, {10, 20});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (Event{15, 27, 10, 1}));
}

TEST(ShiftEmbed, ZeroOffsetIsIdentity) {
  const std::vector<Event> ev{{5, 7, 10, 1}, {33, 33, 11, -1}};
  EXPECT_EQ(shift_embed(ev, {34, 34}, {68, 68}, {0, 0}), ev);
}

TEST(ShiftEmbed, OffsetOutOfBounds) {
  const std::vector<Event> ev{{30, 0, 0, 1}};
  EXPECT_THROW(shift_embed(ev, {34, 34}, {68, 68}, {40, 0}), ValidationError);
  EXPECT_NO_THROW(shift_embed(ev, {34, 34}, {68, 68}, {34, 34}));
  EXPECT_THROW(shift_embed(ev, {34, 34}, {68, 68}, {-1, 0}), ValidationError);
}

TEST(ShiftEmbed, PreservesCountOrderTimesPolarities) {
  const auto ev = synth_saccade(SaccadeSpec{});
  const Offset off = random_offset({34, 34}, {100, 100}, 5);
  const auto out = shift_embed(ev, {34, 34}, {100, 100}, off);
  ASSERT_EQ(out.size(), ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_EQ(out[i].ts, ev[i].ts);
    EXPECT_EQ(out[i].polarity, ev[i].polarity);
    EXPECT_EQ(out[i].x, ev[i].x + off.dx);
    EXPECT_EQ(out[i].y, ev[i].y + off.dy);
  }
}

TEST(RandomOffset, CoversEveryLegalOffset) {
  // 3 x 2 legal offsets for a 34x34 field inside 36x35.
  std::vector<int> seen(6, 0);
  for (std::uint64_t seed = 0; seed < 600; ++seed) {
    const Offset o = random_offset({34, 34}, {36, 35}, seed);
    ASSERT_GE(o.dx, 0);
    ASSERT_LE(o.dx, 2);
    ASSERT_GE(o.dy, 0);
    ASSERT_LE(o.dy, 1);
    ++seen[static_cast<std::size_t>(o.dy * 3 + o.dx)];
  }
  for (int c : seen) EXPECT_GT(c, 60);
  EXPECT_EQ(random_offset({34, 34}, {100, 100}, 42), random_offset({34, 34}, {100, 100}, 42));
}

TEST(Synth, DeterministicForFixedSeed) {
  SaccadeSpec s;
  s.seed = 1234;
  const auto a = synth_saccade(s);
  const auto b = synth_saccade(s);
  EXPECT_EQ(write_aer_bin(a), write_aer_bin(b));
  s.seed = 1235;
  EXPECT_NE(synth_saccade(s), a);
}

TEST(Synth, DurationBound) {
  SaccadeSpec s;
  s.n_saccades = 3;
  s.saccade_ms = 100;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    s.seed = seed;
    const auto ev = synth_saccade(s);
    ASSERT_FALSE(ev.empty());
    EXPECT_LT(ev.back().ts, 300000);
    EXPECT_GE(ev.back().ts, 200000);
  }
}

TEST(Synth, EventCountAtTenPerMillisecond) {
  // The count is Poisson with mean 3000 (sd ~55), so the band is ~11 sd wide.
  SaccadeSpec s;
  s.rate = 10;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    s.seed = seed;
    const auto n = synth_saccade(s).size();
    EXPECT_GE(n, 2400u) << "seed " << seed;
    EXPECT_LE(n, 3600u) << "seed " << seed;
  }
}

TEST(Synth, EventsSatisfyStreamInvariants) {
  SaccadeSpec s;
  s.geometry = {50, 40};
  s.blob_radius = 6;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    s.seed = seed;
    const auto ev = synth_saccade(s);
    for (std::size_t i = 0; i < ev.size(); ++i) {
      ASSERT_TRUE(s.geometry.contains(ev[i].x, ev[i].y));
      ASSERT_TRUE(ev[i].polarity == 1 || ev[i].polarity == -1);
      if (i) {
        ASSERT_GE(ev[i].ts, ev[i - 1].ts);
      }
    }
  }
}

TEST(Synth, EventsStayNearBlob) {
  SaccadeSpec s;
  s.seed = 3;
  const auto pts = saccade_waypoints(s);
  for (const Event& e : synth_saccade(s, pts)) {
    const Point2 c = blob_center_at(pts, s.saccade_ms, static_cast<double>(e.ts));
    ASSERT_LE(std::hypot(e.x - c.x, e.y - c.y), s.blob_radius + 1.0);
  }
}

TEST(Synth, GeometryTooSmallForBlob) {
  SaccadeSpec s;
  s.geometry = {10, 10};
  s.blob_radius = 5;
  EXPECT_THROW(synth_saccade(s), ValidationError);
}

TEST(Synth, StationaryWaypointsAllEqual) {
  SaccadeSpec s;
  const auto pts = stationary_waypoints(s, Point2{12, 20});
  ASSERT_EQ(pts.size(), static_cast<std::size_t>(s.n_saccades + 1));
  for (const Point2& p : pts) {
    EXPECT_EQ(p.x, 12);
    EXPECT_EQ(p.y, 20);
  }
  EXPECT_THROW(stationary_waypoints(s, Point2{2, 20}), ValidationError);
}
