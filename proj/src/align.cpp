#include "atrain/align.hpp"

#include <algorithm>
#include <map>

namespace atrain::align {
namespace {

// Strict "a beats b" for equally good candidates.
bool wins_tie(const engines::SpeakerTurn& a, const engines::SpeakerTurn& b) {
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  return a.speaker < b.speaker;
}

double boundary_gap(Interval word, const engines::SpeakerTurn& turn) {
  return std::max({0.0, turn.start_s - word.end_s, word.start_s - turn.end_s});
}

std::string pick_speaker(Interval word, std::span<const engines::SpeakerTurn> turns, double gap_tolerance_s) {
  const engines::SpeakerTurn* best = nullptr;
  double best_overlap = 0.0;
  for (const auto& turn : turns) {
    const double ov = interval_overlap(word, {turn.start_s, turn.end_s});
    if (ov <= 0.0) continue;
    if (best == nullptr || ov > best_overlap || (ov == best_overlap && wins_tie(turn, *best))) {
      best = &turn;
      best_overlap = ov;
    }
  }
  if (best != nullptr) return best->speaker;

  const engines::SpeakerTurn* nearest = nullptr;
  double nearest_gap = 0.0;
  for (const auto& turn : turns) {
    const double gap = boundary_gap(word, turn);
    if (nearest == nullptr || gap < nearest_gap || (gap == nearest_gap && wins_tie(turn, *nearest))) {
      nearest = &turn;
      nearest_gap = gap;
    }
  }
  if (nearest != nullptr && nearest_gap <= gap_tolerance_s) return nearest->speaker;
  return std::string(kUnknownSpeaker);
}

}  // namespace

double interval_overlap(Interval a, Interval b) noexcept {
  return std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
}

std::vector<AlignedWord> assign_word_speakers(std::span<const engines::WordToken> words,
                                              std::span<const engines::SpeakerTurn> turns,
                                              double gap_tolerance_s) {
  std::vector<AlignedWord> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    out.push_back({w.start_s, w.end_s, w.text, w.confidence,
                   pick_speaker({w.start_s, w.end_s}, turns, gap_tolerance_s)});
  }
  return out;
}

AlignedTranscript assign_segment_speakers(std::vector<AlignedSegment> segments,
                                          std::span<const engines::SpeakerTurn> turns,
                                          double gap_tolerance_s) {
  for (auto& seg : segments) {
    std::map<std::string, double> weight;
    for (const auto& w : seg.words) {
      if (!w.speaker || *w.speaker == kUnknownSpeaker) continue;
      weight[*w.speaker] += w.end_s - w.start_s;
    }
    if (weight.empty()) {
      seg.speaker = pick_speaker({seg.start_s, seg.end_s}, turns, gap_tolerance_s);
      continue;
    }

    double top = 0.0;
    for (const auto& [label, total] : weight) top = std::max(top, total);
    const AlignedWord* earliest = nullptr;
    for (const auto& w : seg.words) {
      if (!w.speaker) continue;
      auto it = weight.find(*w.speaker);
      if (it == weight.end() || it->second != top) continue;
      if (earliest == nullptr || w.start_s < earliest->start_s) earliest = &w;
    }
    seg.speaker = *earliest->speaker;
  }

  AlignedTranscript out;
  out.segments = std::move(segments);
  out.diarization_enabled = true;
  return out;
}

AlignedTranscript align_transcript(const std::vector<engines::TranscriptSegment>& segments,
                                   std::span<const engines::SpeakerTurn> turns,
                                   std::optional<int> speaker_count, double gap_tolerance_s) {
  std::vector<AlignedSegment> staged;
  staged.reserve(segments.size());
  for (const auto& seg : segments) {
    staged.push_back({seg.id, seg.start_s, seg.end_s, seg.text, std::nullopt,
                      assign_word_speakers(seg.words, turns, gap_tolerance_s)});
  }
  auto out = assign_segment_speakers(std::move(staged), turns, gap_tolerance_s);
  out.speaker_count_used = speaker_count;
  return out;
}

AlignedTranscript without_speakers(const std::vector<engines::TranscriptSegment>& segments) {
  AlignedTranscript out;
  out.diarization_enabled = false;
  for (const auto& seg : segments) {
    AlignedSegment aligned{seg.id, seg.start_s, seg.end_s, seg.text, std::nullopt, {}};
    for (const auto& w : seg.words) aligned.words.push_back({w.start_s, w.end_s, w.text, w.confidence, std::nullopt});
    out.segments.push_back(std::move(aligned));
  }
  return out;
}

}  // namespace atrain::align
