#include "atrain/export.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "atrain/error.hpp"
#include "atrain/fsutil.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace atrain::exporters {
namespace {

double round3(double v) {
  const double r = std::round(v * 1000.0) / 1000.0;
  return r == 0.0 ? 0.0 : r;  // no "-0.0"
}

std::string speaker_prefix(const align::AlignedTranscript& t, const align::AlignedSegment& seg) {
  if (!t.diarization_enabled || !seg.speaker) return {};
  return *seg.speaker + ": ";
}

bool is_count(std::string_view s) {
  return !s.empty() && s.size() < 10 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

ojson optional_string(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }
ojson optional_number(const std::optional<double>& v) { return v ? ojson(round3(*v)) : ojson(nullptr); }

std::optional<std::string> read_optional_string(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

std::optional<double> read_optional_number(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::optional<std::string> read_speaker(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

}  // namespace

std::string format_timestamp(double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "negative or undefined time: " + std::to_string(t));
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "time is not finite");
  // The epsilon absorbs binary representation error (8.2 * 10 == 81.999...).
  const auto tenths = static_cast<long long>(std::floor(t * 10.0 + 1e-6));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%lld", tenths / 36000, (tenths / 600) % 60,
                (tenths / 10) % 60, tenths % 10);
  return buf;
}

std::optional<double> parse_timestamp(std::string_view text) {
  unsigned long long h = 0, m = 0, s = 0, d = 0;
  int consumed = 0;
  const std::string copy(text);
  if (std::sscanf(copy.c_str(), "%llu:%2llu:%2llu.%1llu%n", &h, &m, &s, &d, &consumed) != 4) return std::nullopt;
  if (static_cast<std::size_t>(consumed) != copy.size() || m > 59 || s > 59) return std::nullopt;
  return static_cast<double>(h) * 3600.0 + static_cast<double>(m) * 60.0 + static_cast<double>(s) +
         static_cast<double>(d) / 10.0;
}

std::string export_timestamped_txt(const align::AlignedTranscript& t) {
  std::string out;
  for (const auto& seg : t.segments) {
    out += "[" + format_timestamp(seg.start_s) + "] " + speaker_prefix(t, seg) + seg.text + "\n";
  }
  return out;
}

std::string export_plain_txt(const align::AlignedTranscript& t) {
  std::string out;
  for (const auto& seg : t.segments) out += speaker_prefix(t, seg) + seg.text + "\n";
  return out;
}

std::string export_qda_txt(const align::AlignedTranscript& t) {
  std::string out = "#" + format_timestamp(0.0) + "#\n";
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& seg = t.segments[i];
    if (i > 0) out += "\n";
    out += speaker_prefix(t, seg) + seg.text + " #" + format_timestamp(seg.end_s) + "#\n";
  }
  return out;
}

std::string export_raw_json(const align::AlignedTranscript& t, const JobMetadata& meta) {
  ojson doc = ojson::object();
  ojson m = ojson::object();
  m["source_file"] = meta.source_file;
  m["duration_s"] = round3(meta.duration_s);
  m["model"] = meta.model;
  m["language"] = meta.language;
  m["num_speakers"] = is_count(meta.num_speakers) ? ojson(std::stoi(meta.num_speakers)) : ojson(meta.num_speakers);
  m["diarization_enabled"] = t.diarization_enabled;
  m["translate"] = meta.translate;
  m["started_at"] = optional_string(meta.started_at);
  m["finished_at"] = optional_string(meta.finished_at);
  m["processing_time_s"] = optional_number(meta.processing_time_s);
  m["rpt"] = optional_number(meta.rpt);
  m["tool_version"] = meta.tool_version;
  doc["metadata"] = std::move(m);

  ojson segments = ojson::array();
  for (const auto& seg : t.segments) {
    ojson s = ojson::object();
    s["id"] = seg.id;
    s["start"] = round3(seg.start_s);
    s["end"] = round3(seg.end_s);
    s["text"] = seg.text;
    s["speaker"] = optional_string(seg.speaker);
    ojson words = ojson::array();
    for (const auto& w : seg.words) {
      ojson jw = ojson::object();
      jw["start"] = round3(w.start_s);
      jw["end"] = round3(w.end_s);
      jw["text"] = w.text;
      jw["confidence"] = round3(w.confidence);
      jw["speaker"] = optional_string(w.speaker);
      words.push_back(std::move(jw));
    }
    s["words"] = std::move(words);
    segments.push_back(std::move(s));
  }
  doc["segments"] = std::move(segments);
  return doc.dump(2, ' ', false, ojson::error_handler_t::replace) + "\n";
}

RawTranscript parse_raw_json(std::string_view text) {
  RawTranscript raw;
  try {
    const ojson doc = ojson::parse(text);
    const auto& m = doc.at("metadata");
    auto& meta = raw.metadata;
    meta.source_file = m.at("source_file").get<std::string>();
    meta.duration_s = m.at("duration_s").get<double>();
    meta.model = m.at("model").get<std::string>();
    meta.language = m.at("language").get<std::string>();
    const auto& ns = m.at("num_speakers");
    meta.num_speakers = ns.is_number_integer() ? std::to_string(ns.get<int>()) : ns.get<std::string>();
    meta.diarization_enabled = m.at("diarization_enabled").get<bool>();
    meta.translate = m.at("translate").get<bool>();
    meta.started_at = read_optional_string(m.at("started_at"));
    meta.finished_at = read_optional_string(m.at("finished_at"));
    meta.processing_time_s = read_optional_number(m.at("processing_time_s"));
    meta.rpt = read_optional_number(m.at("rpt"));
    meta.tool_version = m.at("tool_version").get<std::string>();

    auto& t = raw.transcript;
    t.diarization_enabled = meta.diarization_enabled;
    if (ns.is_number_integer()) t.speaker_count_used = ns.get<int>();
    for (const auto& s : doc.at("segments")) {
      align::AlignedSegment seg;
      seg.id = s.at("id").get<int>();
      seg.start_s = s.at("start").get<double>();
      seg.end_s = s.at("end").get<double>();
      seg.text = s.at("text").get<std::string>();
      seg.speaker = read_speaker(s.at("speaker"));
      for (const auto& w : s.at("words")) {
        seg.words.push_back({w.at("start").get<double>(), w.at("end").get<double>(), w.at("text").get<std::string>(),
                             w.at("confidence").get<double>(), read_speaker(w.value("speaker", ojson(nullptr)))});
      }
      t.segments.push_back(std::move(seg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("not a raw transcript document: ") + e.what());
  }
  return raw;
}

ExportBundle write_exports(const align::AlignedTranscript& t, const JobMetadata& meta, const fs::path& dir) {
  ExportBundle bundle;
  bundle.timestamped_txt = dir / kTimestampedTxt;
  bundle.plain_txt = dir / kPlainTxt;
  bundle.qda_txt = dir / kQdaTxt;
  bundle.raw_json = dir / kRawJson;
  bundle.metadata = meta;
  fsutil::write_file_atomic(bundle.timestamped_txt, export_timestamped_txt(t));
  fsutil::write_file_atomic(bundle.plain_txt, export_plain_txt(t));
  fsutil::write_file_atomic(bundle.qda_txt, export_qda_txt(t));
  fsutil::write_file_atomic(bundle.raw_json, export_raw_json(t, meta));
  return bundle;
}

}  // namespace atrain::exporters
