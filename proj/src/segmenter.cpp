#include "udase/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace udase {

namespace {

int64_t to_ms(double seconds) {
  return static_cast<int64_t>(std::llround(seconds * 1000.0));
}

std::size_t interval_index(const std::vector<int64_t>& edges, int64_t t_ms) {
  // Index of the interval containing t; t == duration maps to the last one.
  auto it = std::upper_bound(edges.begin(), edges.end(), t_ms);
  std::size_t i = static_cast<std::size_t>(it - edges.begin());
  if (i == 0) return 0;
  if (i >= edges.size()) return edges.size() - 2;
  return i - 1;
}

std::vector<IntervalMs> merge_intervals(std::vector<IntervalMs> v) {
  std::sort(v.begin(), v.end());
  std::vector<IntervalMs> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second)
      out.back().second = std::max(out.back().second, iv.second);
    else
      out.push_back(iv);
  }
  return out;
}

}  // namespace

int CountTimeline::count_at(int64_t t_ms) const {
  return counts[interval_index(edges, t_ms)];
}

bool CountTimeline::excluded_at(int64_t t_ms) const {
  return excluded[interval_index(edges, t_ms)];
}

Transcript parse_transcript_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TranscriptError(std::string("transcript JSON parse error: ") +
                          e.what());
  }
  Transcript t;
  try {
    t.session_id = j.at("session_id").get<std::string>();
    t.duration_ms = to_ms(j.at("duration_s").get<double>());
    if (j.contains("excluded_speaker") && !j["excluded_speaker"].is_null())
      t.excluded_speaker = j["excluded_speaker"].get<std::string>();
    for (const auto& u : j.at("utterances")) {
      Utterance ut;
      ut.speaker = u.at("speaker").get<std::string>();
      ut.start_ms = to_ms(u.at("start_s").get<double>());
      ut.end_ms = to_ms(u.at("end_s").get<double>());
      t.utterances.push_back(std::move(ut));
    }
  } catch (const nlohmann::json::exception& e) {
    throw TranscriptError(std::string("transcript schema error: ") + e.what());
  }
  for (const auto& u : t.utterances) {
    if (u.speaker.empty()) throw TranscriptError("empty speaker id");
    if (u.start_ms < 0 || u.start_ms >= u.end_ms)
      throw TranscriptError("utterance with start >= end in session " +
                            t.session_id);
  }
  std::sort(t.utterances.begin(), t.utterances.end(),
            [](const Utterance& a, const Utterance& b) {
              return std::tie(a.start_ms, a.end_ms, a.speaker) <
                     std::tie(b.start_ms, b.end_ms, b.speaker);
            });
  return t;
}

Transcript load_transcript(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw TranscriptError(path + ": cannot open");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_transcript_json(ss.str());
  } catch (const TranscriptError& e) {
    throw TranscriptError(path + ": " + e.what());
  }
}

CountTimeline build_timeline(const Transcript& t) {
  CountTimeline tl;
  tl.session_id = t.session_id;
  tl.duration_ms = t.duration_ms;

  std::set<int64_t> edge_set{0, t.duration_ms};
  for (const auto& u : t.utterances) {
    if (u.end_ms > t.duration_ms)
      throw TranscriptError("utterance [" + std::to_string(u.start_ms) + "," +
                            std::to_string(u.end_ms) +
                            "] ms exceeds duration of session " + t.session_id);
    edge_set.insert(u.start_ms);
    edge_set.insert(u.end_ms);
  }
  tl.edges.assign(edge_set.begin(), edge_set.end());
  const std::size_t k = tl.edges.size() - 1;
  tl.counts.assign(k, 0);
  tl.excluded.assign(k, false);

  // Per-speaker merged activity (excluded speaker kept separate).
  std::map<std::string, std::vector<IntervalMs>> per_speaker;
  for (const auto& u : t.utterances)
    per_speaker[u.speaker].push_back({u.start_ms, u.end_ms});

  for (auto& [speaker, ivs] : per_speaker) {
    auto merged = merge_intervals(std::move(ivs));
    const bool is_excluded =
        t.excluded_speaker && speaker == *t.excluded_speaker;
    for (const auto& iv : merged) {
      std::size_t a = interval_index(tl.edges, iv.first);
      for (std::size_t i = a; i < k && tl.edges[i] < iv.second; ++i) {
        if (is_excluded)
          tl.excluded[i] = true;
        else
          ++tl.counts[i];
      }
    }
    if (!is_excluded) tl.speakers.push_back({speaker, std::move(merged)});
  }
  return tl;
}

TimelineStats timeline_stats(const CountTimeline& tl) {
  TimelineStats st;
  if (tl.duration_ms == 0) return st;
  int64_t excluded_ms = 0;
  std::map<int, int64_t> per_count;
  for (std::size_t i = 0; i + 1 < tl.edges.size(); ++i) {
    int64_t len = tl.edges[i + 1] - tl.edges[i];
    if (tl.excluded[i])
      excluded_ms += len;
    else
      per_count[tl.counts[i]] += len;
  }
  const double total = static_cast<double>(tl.duration_ms);
  for (const auto& [c, ms] : per_count)
    st.count_fraction[c] = static_cast<double>(ms) / total;
  st.excluded_fraction = static_cast<double>(excluded_ms) / total;
  return st;
}

std::vector<LabeledSegment> extract_segments(const CountTimeline& tl,
                                             double min_duration_s) {
  const int64_t min_ms = to_ms(min_duration_s);
  const std::size_t k = tl.counts.size();
  std::vector<bool> claimed(k, false);
  std::vector<LabeledSegment> out;

  for (int bound = 0; bound <= 3; ++bound) {
    std::size_t i = 0;
    while (i < k) {
      if (claimed[i] || tl.excluded[i] || tl.counts[i] > bound) {
        ++i;
        continue;
      }
      std::size_t j = i;
      int max_count = 0;
      while (j < k && !claimed[j] && !tl.excluded[j] &&
             tl.counts[j] <= bound) {
        max_count = std::max(max_count, tl.counts[j]);
        ++j;
      }
      if (tl.edges[j] - tl.edges[i] >= min_ms) {
        out.push_back(
            {tl.edges[i], tl.edges[j], max_count, tl.session_id});
        for (std::size_t m = i; m < j; ++m) claimed[m] = true;
      }
      i = j;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const LabeledSegment& a, const LabeledSegment& b) {
              return a.start_ms < b.start_ms;
            });
  return out;
}

std::vector<LabeledSegment> extract_listening_subset(const CountTimeline& tl) {
  constexpr int64_t kMinLen = 4000, kMaxLen = 5000;
  constexpr int64_t kBorder = 250, kMinSpeech = 3000;

  const int64_t dur = tl.duration_ms;
  std::vector<LabeledSegment> out;
  if (dur < kMinLen) return out;

  // Millisecond prefix sums of speech time, silence-run and exclusion-run
  // lengths; dense arrays keep the constraint checks O(1) per candidate.
  std::vector<int64_t> speech_prefix(dur + 1, 0);
  std::vector<uint8_t> silent(dur, 0), ok(dur, 0);
  {
    std::size_t idx = 0;
    for (int64_t t = 0; t < dur; ++t) {
      while (tl.edges[idx + 1] <= t) ++idx;
      const bool exc = tl.excluded[idx];
      const int c = tl.counts[idx];
      speech_prefix[t + 1] = speech_prefix[t] + ((!exc && c >= 1) ? 1 : 0);
      silent[t] = (!exc && c == 0) ? 1 : 0;
      ok[t] = exc ? 0 : 1;
    }
  }
  std::vector<int64_t> silent_prefix(dur + 1, 0), ok_prefix(dur + 1, 0);
  for (int64_t t = 0; t < dur; ++t) {
    silent_prefix[t + 1] = silent_prefix[t] + silent[t];
    ok_prefix[t + 1] = ok_prefix[t] + ok[t];
  }
  auto all_silent = [&](int64_t a, int64_t b) {
    return silent_prefix[b] - silent_prefix[a] == b - a;
  };
  auto none_excluded = [&](int64_t a, int64_t b) {
    return ok_prefix[b] - ok_prefix[a] == b - a;
  };

  int64_t t = 0;
  while (t + kMinLen <= dur) {
    if (!all_silent(t, t + kBorder)) {
      ++t;
      continue;
    }
    bool found = false;
    for (int64_t len = kMinLen; len <= kMaxLen && t + len <= dur; ++len) {
      const int64_t end = t + len;
      if (!none_excluded(t, end)) break;
      if (!all_silent(end - kBorder, end)) continue;
      if (speech_prefix[end] - speech_prefix[t] < kMinSpeech) continue;
      int max_count = 0;
      std::size_t a = interval_index(tl.edges, t);
      for (std::size_t i = a; i + 1 < tl.edges.size() && tl.edges[i] < end;
           ++i)
        max_count = std::max(max_count, tl.counts[i]);
      out.push_back({t, end, max_count, tl.session_id});
      t = end;
      found = true;
      break;
    }
    if (!found) ++t;
  }
  return out;
}

std::vector<std::vector<IntervalMs>> activity_pattern(
    const CountTimeline& tl, const LabeledSegment& seg) {
  if (seg.start_ms < 0 || seg.end_ms > tl.duration_ms ||
      seg.start_ms >= seg.end_ms)
    throw TranscriptError("segment outside timeline span");

  struct Entry {
    int64_t first_onset;
    std::vector<IntervalMs> ivs;
  };
  std::vector<Entry> entries;
  for (const auto& spk : tl.speakers) {
    std::vector<IntervalMs> ivs;
    for (const auto& [a, b] : spk.intervals) {
      int64_t lo = std::max(a, seg.start_ms);
      int64_t hi = std::min(b, seg.end_ms);
      if (lo < hi) ivs.push_back({lo - seg.start_ms, hi - seg.start_ms});
    }
    if (!ivs.empty()) entries.push_back({ivs.front().first, std::move(ivs)});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.first_onset < b.first_onset;
                   });
  std::vector<std::vector<IntervalMs>> out;
  for (auto& e : entries) out.push_back(std::move(e.ivs));
  return out;
}

}  // namespace udase
