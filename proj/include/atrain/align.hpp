#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atrain/engines.hpp"

namespace atrain::align {

inline constexpr std::string_view kUnknownSpeaker = "UNKNOWN";
inline constexpr double kDefaultGapTolerance = 2.0;

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
};

// max(0, min(a.end, b.end) - max(a.start, b.start))
double interval_overlap(Interval a, Interval b) noexcept;

struct AlignedWord {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  double confidence = 0.0;
  // nullopt only when diarization is disabled; otherwise a turn label or
  // kUnknownSpeaker.
  std::optional<std::string> speaker;

  bool operator==(const AlignedWord&) const = default;
};

struct AlignedSegment {
  int id = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  std::optional<std::string> speaker;
  std::vector<AlignedWord> words;

  bool operator==(const AlignedSegment&) const = default;
};

struct AlignedTranscript {
  std::vector<AlignedSegment> segments;
  // nullopt = speaker count estimated by the diarizer.
  std::optional<int> speaker_count_used;
  bool diarization_enabled = false;

  bool operator==(const AlignedTranscript&) const = default;
};

// Each word takes the label of the turn it overlaps most. Ties go to the
// earliest-starting turn, then the smallest label. A word overlapping no
// turn takes the nearest turn (same tie rule) when the boundary gap is at
// most gap_tolerance_s, else kUnknownSpeaker.
std::vector<AlignedWord> assign_word_speakers(std::span<const engines::WordToken> words,
                                              std::span<const engines::SpeakerTurn> turns,
                                              double gap_tolerance_s = kDefaultGapTolerance);

// Votes one speaker per segment by summed word duration over labelled words;
// ties go to the label of the earliest tied word. Segments with no labelled
// words are re-assigned as one pseudo-word spanning the segment. Segment
// order is preserved and segments are never split.
AlignedTranscript assign_segment_speakers(std::vector<AlignedSegment> segments,
                                          std::span<const engines::SpeakerTurn> turns,
                                          double gap_tolerance_s = kDefaultGapTolerance);

// Word then segment assignment for a whole transcript.
AlignedTranscript align_transcript(const std::vector<engines::TranscriptSegment>& segments,
                                   std::span<const engines::SpeakerTurn> turns,
                                   std::optional<int> speaker_count,
                                   double gap_tolerance_s = kDefaultGapTolerance);

// Transcript for a run with diarization disabled: no speaker fields at all.
AlignedTranscript without_speakers(const std::vector<engines::TranscriptSegment>& segments);

}  // namespace atrain::align
