// Speaker-count segmentation of conversational transcripts.
//
// A transcript is turned into a timeline of simultaneously-active speaker
// counts, from which labeled segments are extracted with a four-pass cascade
// (count 0 first, then <=1, <=2, <=3). Time is kept in integer milliseconds
// so boundary arithmetic is exact.

#ifndef UDASE_SEGMENTER_HPP
#define UDASE_SEGMENTER_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace udase {

struct Utterance {
  std::string speaker;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
};

struct Transcript {
  std::string session_id;
  int64_t duration_ms = 0;
  std::optional<std::string> excluded_speaker;
  std::vector<Utterance> utterances;
};

// Interval in milliseconds, half-open [start, end).
using IntervalMs = std::pair<int64_t, int64_t>;

struct SpeakerActivity {
  std::string speaker;
  std::vector<IntervalMs> intervals;  // merged, sorted
};

struct CountTimeline {
  std::string session_id;
  int64_t duration_ms = 0;
  // edges has size k+1 and tiles [0, duration]; interval i is
  // [edges[i], edges[i+1]) with counts[i] active non-excluded speakers.
  std::vector<int64_t> edges;
  std::vector<int> counts;
  std::vector<bool> excluded;  // wearer speaking
  std::vector<SpeakerActivity> speakers;  // non-excluded, for activity_pattern

  int count_at(int64_t t_ms) const;
  bool excluded_at(int64_t t_ms) const;
};

struct LabeledSegment {
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  int max_speakers = 0;
  std::string session_id;
};

class TranscriptError : public std::runtime_error {
 public:
  explicit TranscriptError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// JSON schema: {session_id, duration_s, excluded_speaker?, utterances:
// [{speaker, start_s, end_s}]}; times are quantized to milliseconds.
Transcript parse_transcript_json(const std::string& text);
Transcript load_transcript(const std::string& path);

CountTimeline build_timeline(const Transcript& t);

struct TimelineStats {
  std::map<int, double> count_fraction;  // over non-excluded time
  double excluded_fraction = 0.0;
};
TimelineStats timeline_stats(const CountTimeline& tl);

// Four greedy passes: maximal available runs with count 0, then <=1, <=2,
// <=3. A run is emitted when its length reaches min_duration; shorter runs
// stay available for the next pass. Excluded time is never claimable.
std::vector<LabeledSegment> extract_segments(const CountTimeline& tl,
                                             double min_duration_s = 3.0);

// Listening-test subset: non-overlapping segments of 4-5 s with >= 3 s of
// speech and the first and last 0.25 s silent, chosen greedily left to
// right (shortest valid length at the earliest valid start).
std::vector<LabeledSegment> extract_listening_subset(const CountTimeline& tl);

// Per-speaker activity inside a segment, relative to segment start,
// speakers ordered by first onset. Speakers inactive in the segment are
// omitted.
std::vector<std::vector<IntervalMs>> activity_pattern(
    const CountTimeline& tl, const LabeledSegment& seg);

}  // namespace udase

#endif  // UDASE_SEGMENTER_HPP
