#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/toy_data.hpp"
#include "udase/segmenter.hpp"

using namespace udase;
using namespace udase::testsupport;

namespace {

Transcript hand_transcript() {
  // A:[0,5], B:[4,9], duration 10 s.
  Transcript t;
  t.session_id = "S01";
  t.duration_ms = 10000;
  t.utterances = {{"A", 0, 5000}, {"B", 4000, 9000}};
  return t;
}

}  // namespace

TEST_CASE("transcript json parsing") {
  auto t = parse_transcript_json(R"({
    "session_id": "S02", "duration_s": 12.5,
    "excluded_speaker": "P1",
    "utterances": [
      {"speaker": "P1", "start_s": 0.25, "end_s": 1.0},
      {"speaker": "P2", "start_s": 0.5, "end_s": 2.0}
    ]})");
  CHECK(t.session_id == "S02");
  CHECK(t.duration_ms == 12500);
  REQUIRE(t.excluded_speaker.has_value());
  CHECK(*t.excluded_speaker == "P1");
  REQUIRE(t.utterances.size() == 2);
  CHECK(t.utterances[0].start_ms == 250);

  CHECK_THROWS_AS(parse_transcript_json("{not json"), TranscriptError);
  CHECK_THROWS_AS(parse_transcript_json(R"({"session_id":"x"})"),
                  TranscriptError);
  CHECK_THROWS_AS(parse_transcript_json(
                      R"({"session_id":"x","duration_s":1,
                      "utterances":[{"speaker":"a","start_s":2,"end_s":1}]})"),
                  TranscriptError);
}

TEST_CASE("build_timeline on empty transcript") {
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 5000;
  auto tl = build_timeline(t);
  REQUIRE(tl.counts.size() == 1);
  CHECK(tl.counts[0] == 0);
  CHECK(timeline_stats(tl).count_fraction.at(0) == doctest::Approx(1.0));
}

TEST_CASE("build_timeline hand example") {
  auto tl = build_timeline(hand_transcript());
  // Intervals [0,4),[4,5),[5,9),[9,10) with counts 1,2,1,0.
  REQUIRE(tl.edges.size() == 5);
  CHECK(tl.counts == std::vector<int>{1, 2, 1, 0});
  CHECK(tl.count_at(4500) == 2);
  CHECK(tl.count_at(9500) == 0);

  auto st = timeline_stats(tl);
  CHECK(st.count_fraction.at(0) == doctest::Approx(0.1));
  CHECK(st.count_fraction.at(1) == doctest::Approx(0.8));
  CHECK(st.count_fraction.at(2) == doctest::Approx(0.1));
  double total = st.excluded_fraction;
  for (auto& [c, f] : st.count_fraction) total += f;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_timeline rejects overlong utterance") {
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 1000;
  t.utterances = {{"A", 0, 2000}};
  CHECK_THROWS_AS(build_timeline(t), TranscriptError);
}

TEST_CASE("wearer exclusion splits timeline") {
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 10000;
  t.excluded_speaker = "W";
  t.utterances = {{"W", 2000, 4000}, {"A", 3000, 6000}};
  auto tl = build_timeline(t);
  CHECK(tl.excluded_at(2500));
  CHECK(tl.excluded_at(3500));
  CHECK(!tl.excluded_at(4500));
  CHECK(tl.count_at(3500) == 1);  // A still counted where W also talks
  auto segs = extract_segments(tl, 1.0);
  for (const auto& s : segs)
    for (int64_t ms = s.start_ms; ms < s.end_ms; ++ms)
      CHECK(!tl.excluded_at(ms));
}

TEST_CASE("timeline counts match dense brute-force scan") {
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    auto t = random_transcript(rng, 4, 20000, true);
    auto tl = build_timeline(t);
    auto d = densify(t);
    for (int64_t ms = 0; ms < t.duration_ms; ++ms) {
      REQUIRE(tl.count_at(ms) == d.count[static_cast<std::size_t>(ms)]);
      REQUIRE(tl.excluded_at(ms) ==
              (d.excluded[static_cast<std::size_t>(ms)] != 0));
    }
  }
}

TEST_CASE("timeline_stats recovers generator fractions") {
  // Deterministic alternation: 600 ms speech / 400 ms silence.
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 100000;
  for (int64_t s = 0; s < 100000; s += 1000)
    t.utterances.push_back({"A", s, s + 600});
  auto st = timeline_stats(build_timeline(t));
  CHECK(st.count_fraction.at(1) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(st.count_fraction.at(0) == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("extract_segments trivial cases") {
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 10000;
  auto segs = extract_segments(build_timeline(t));
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_ms == 0);
  CHECK(segs[0].end_ms == 10000);
  CHECK(segs[0].max_speakers == 0);
}

TEST_CASE("extract_segments short-silence merge example") {
  // count 0 on [0,4), 1 on [4,9), 0 on [9,10)
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 10000;
  t.utterances = {{"A", 4000, 9000}};
  auto segs = extract_segments(build_timeline(t), 3.0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].start_ms == 0);
  CHECK(segs[0].end_ms == 4000);
  CHECK(segs[0].max_speakers == 0);
  CHECK(segs[1].start_ms == 4000);
  CHECK(segs[1].end_ms == 10000);
  CHECK(segs[1].max_speakers == 1);
}

TEST_CASE("extract_segments matches naive four-pass oracle") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    auto t = random_transcript(rng, 4, 30000, true);
    auto tl = build_timeline(t);
    auto segs = extract_segments(tl, 3.0);
    auto oracle = oracle_extract_segments(densify(t), 3000);
    REQUIRE(segs.size() == oracle.size());
    for (std::size_t k = 0; k < segs.size(); ++k) {
      REQUIRE(segs[k].start_ms == oracle[k].start_ms);
      REQUIRE(segs[k].end_ms == oracle[k].end_ms);
      REQUIRE(segs[k].max_speakers == oracle[k].max_speakers);
    }
  }
}

TEST_CASE("extract_segments determinism") {
  Rng rng(5);
  auto t = random_transcript(rng, 4, 30000, true);
  auto a = extract_segments(build_timeline(t));
  auto b = extract_segments(build_timeline(t));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start_ms == b[i].start_ms);
    CHECK(a[i].end_ms == b[i].end_ms);
  }
}

TEST_CASE("listening subset trivial cases") {
  Transcript silent;
  silent.session_id = "S";
  silent.duration_ms = 20000;
  CHECK(extract_listening_subset(build_timeline(silent)).empty());

  // Speech on [0.25, 4.25] inside a 4.5 s silent-bordered window.
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 4500;
  t.utterances = {{"A", 250, 4250}};
  auto segs = extract_listening_subset(build_timeline(t));
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_ms == 0);
  CHECK(segs[0].end_ms == 4500);
}

TEST_CASE("listening subset constraints re-measured") {
  Rng rng(13);
  int emitted = 0;
  for (int i = 0; i < 60; ++i) {
    auto t = random_transcript(rng, 3, 40000, true);
    auto tl = build_timeline(t);
    auto d = densify(t);
    auto segs = extract_listening_subset(tl);
    int64_t prev_end = -1;
    for (const auto& s : segs) {
      ++emitted;
      const int64_t len = s.end_ms - s.start_ms;
      CHECK(len >= 4000);
      CHECK(len <= 5000);
      CHECK(s.start_ms >= prev_end);
      prev_end = s.end_ms;
      int64_t speech = 0;
      for (int64_t ms = s.start_ms; ms < s.end_ms; ++ms) {
        const auto k = static_cast<std::size_t>(ms);
        CHECK(d.excluded[k] == 0);
        if (d.count[k] >= 1) ++speech;
        if (ms < s.start_ms + 250 || ms >= s.end_ms - 250)
          CHECK(d.count[k] == 0);
      }
      CHECK(speech >= 3000);
    }
  }
  CHECK(emitted > 0);  // the generator must actually exercise the extractor
}

TEST_CASE("activity_pattern hand example") {
  auto tl = build_timeline(hand_transcript());
  LabeledSegment seg{3000, 8000, 2, "S01"};
  auto act = activity_pattern(tl, seg);
  REQUIRE(act.size() == 2);
  // A: [0,2] s, B: [1,5] s relative to segment start.
  REQUIRE(act[0].size() == 1);
  CHECK(act[0][0] == IntervalMs{0, 2000});
  REQUIRE(act[1].size() == 1);
  CHECK(act[1][0] == IntervalMs{1000, 5000});
}

TEST_CASE("activity_pattern single utterance covering segment") {
  Transcript t;
  t.session_id = "S";
  t.duration_ms = 10000;
  t.utterances = {{"A", 0, 10000}};
  auto tl = build_timeline(t);
  auto act = activity_pattern(tl, {2000, 6000, 1, "S"});
  REQUIRE(act.size() == 1);
  CHECK(act[0][0] == IntervalMs{0, 4000});
}

TEST_CASE("activity_pattern matches brute-force intersection") {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    auto t = random_transcript(rng, 4, 20000, false);
    auto tl = build_timeline(t);
    LabeledSegment seg;
    seg.start_ms = static_cast<int64_t>(rng.uniform_index(15000));
    seg.end_ms = seg.start_ms + 2000 +
                 static_cast<int64_t>(rng.uniform_index(3000));
    auto act = activity_pattern(tl, seg);
    auto d = densify(t);
    // Union of returned intervals must reproduce count>=1 activity.
    std::vector<int> covered(static_cast<std::size_t>(seg.end_ms -
                                                      seg.start_ms),
                             0);
    for (const auto& ivs : act)
      for (const auto& [a, b] : ivs)
        for (int64_t ms = a; ms < b; ++ms)
          ++covered[static_cast<std::size_t>(ms)];
    for (int64_t ms = seg.start_ms; ms < seg.end_ms; ++ms) {
      REQUIRE(covered[static_cast<std::size_t>(ms - seg.start_ms)] ==
              d.count[static_cast<std::size_t>(ms)]);
    }
  }
}
