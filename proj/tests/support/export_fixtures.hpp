#pragma once

// Transcripts whose exports are pinned by the hand-written files in
// tests/golden/<name>.<export file>.

#include <string>
#include <vector>

#include "atrain/export.hpp"

namespace fixtures {

struct ExportCase {
  std::string name;
  atrain::align::AlignedTranscript transcript;
  atrain::exporters::JobMetadata metadata;
};

inline atrain::align::AlignedWord word(double s, double e, std::string text, double conf, const char* spk) {
  atrain::align::AlignedWord w{s, e, std::move(text), conf, std::nullopt};
  if (spk) w.speaker = spk;
  return w;
}

inline ExportCase diarized_case() {
  ExportCase c;
  c.name = "diarized";
  auto& t = c.transcript;
  t.diarization_enabled = true;
  t.speaker_count_used = 2;
  t.segments.push_back({0, 0.0, 3.2, "Hello, and welcome.", "SPEAKER_00",
                        {word(0.0, 0.6, "Hello,", 0.912, "SPEAKER_00"), word(0.7, 0.9, "and", 0.85, "SPEAKER_00"),
                         word(1.0, 3.2, "welcome.", 0.7, "SPEAKER_00")}});
  t.segments.push_back({1, 3.45, 59.99, "Thank you. \xC3\x9C" "ber alles.", "SPEAKER_01",
                        {word(3.45, 3.9, "Thank", 1.0, "SPEAKER_01"), word(3.9, 4.2, "you.", 0.999, "SPEAKER_01"),
                         word(50.0, 55.5, "\xC3\x9C" "ber", 0.5, "UNKNOWN"),
                         word(55.5, 59.99, "alles.", 0.25, "SPEAKER_01")}});
  t.segments.push_back({2, 3661.05, 4418.0, "Goodbye.", "SPEAKER_00",
                        {word(3661.05, 4418.0, "Goodbye.", 0.6, "SPEAKER_00")}});
  auto& m = c.metadata;
  m.source_file = "interview.mp3";
  m.duration_s = 4418.0;
  m.model = "medium";
  m.language = "de";
  m.num_speakers = "2";
  m.diarization_enabled = true;
  m.translate = false;
  m.started_at = "2026-01-02T03:04:05.678Z";
  m.finished_at = "2026-01-02T04:17:43.678Z";
  m.processing_time_s = 4418.0;
  m.rpt = 1.0;
  m.tool_version = "0.4.0";
  return c;
}

inline ExportCase plain_case() {
  ExportCase c;
  c.name = "plain";
  auto& t = c.transcript;
  t.diarization_enabled = false;
  t.segments.push_back({0, 0.5, 2.25, "Good morning.", std::nullopt,
                        {word(0.5, 1.0, "Good", 0.8, nullptr), word(1.0, 2.25, "morning.", 0.75, nullptr)}});
  t.segments.push_back({1, 2.5, 4.125, "How are you?", std::nullopt,
                        {word(2.5, 2.9, "How", 0.9, nullptr), word(2.9, 3.2, "are", 0.95, nullptr),
                         word(3.2, 4.125, "you?", 0.9, nullptr)}});
  auto& m = c.metadata;
  m.source_file = "notes.wav";
  m.duration_s = 5.0;
  m.model = "tiny";
  m.language = "en";
  m.num_speakers = "off";
  m.diarization_enabled = false;
  m.translate = true;
  m.tool_version = "0.4.0";
  return c;
}

inline ExportCase empty_case() {
  ExportCase c;
  c.name = "empty";
  c.transcript.diarization_enabled = true;
  auto& m = c.metadata;
  m.source_file = "empty.wav";
  m.duration_s = 10.0;
  m.model = "small";
  m.language = "auto";
  m.num_speakers = "auto";
  m.diarization_enabled = true;
  m.started_at = "2026-03-04T05:06:07.000Z";
  m.finished_at = "2026-03-04T05:06:07.500Z";
  m.processing_time_s = 0.5;
  m.rpt = 0.05;
  m.tool_version = "0.4.0";
  return c;
}

inline std::vector<ExportCase> all_cases() { return {diarized_case(), plain_case(), empty_case()}; }

}  // namespace fixtures
