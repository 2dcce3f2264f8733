#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <regex>
#include <sstream>

#include "atrain/error.hpp"
#include "atrain/export.hpp"
#include "export_fixtures.hpp"
#include "support.hpp"

using namespace atrain;
using exporters::format_timestamp;
using exporters::parse_timestamp;
namespace ts = testsupport;

namespace {

std::string golden(const std::string& case_name, std::string_view file) {
  return ts::read_text(ts::source_dir() / "golden" / (case_name + "." + std::string(file)));
}

// Random transcript whose numbers already sit on the millisecond grid so the
// three-decimal serialization loses nothing.
fixtures::ExportCase random_case(std::mt19937& rng) {
  std::uniform_int_distribution<int> ms(0, 400000);
  std::uniform_int_distribution<int> count(0, 6);
  std::uniform_int_distribution<int> conf(0, 1000);
  std::bernoulli_distribution coin;
  fixtures::ExportCase c;
  c.name = "random";
  const bool diar = coin(rng);
  c.transcript.diarization_enabled = diar;
  const int nseg = count(rng);
  int cursor = 0;
  for (int i = 0; i < nseg; ++i) {
    align::AlignedSegment seg;
    seg.id = i;
    seg.start_s = (cursor += ms(rng) / 10) / 1000.0;
    const int nwords = count(rng);
    for (int w = 0; w < nwords; ++w) {
      const int a = cursor += ms(rng) / 100;
      const int b = cursor += ms(rng) / 100;
      align::AlignedWord word{a / 1000.0, b / 1000.0, "w" + std::to_string(w), conf(rng) / 1000.0, std::nullopt};
      if (diar) word.speaker = coin(rng) ? "SPEAKER_00" : "UNKNOWN";
      seg.words.push_back(word);
      seg.text += (w ? " " : "") + word.text;
    }
    seg.end_s = (cursor += ms(rng) / 10) / 1000.0;
    if (diar && coin(rng)) seg.speaker = "SPEAKER_0" + std::to_string(i % 3);
    c.transcript.segments.push_back(seg);
  }
  c.metadata.source_file = "r.wav";
  c.metadata.duration_s = cursor / 1000.0;
  c.metadata.model = "base";
  c.metadata.diarization_enabled = diar;
  c.metadata.num_speakers = diar ? "auto" : "off";
  c.metadata.tool_version = "x";
  if (coin(rng)) c.metadata.rpt = conf(rng) / 1000.0;
  return c;
}

}  // namespace

TEST(Timestamp, DocumentedExamples) {
  EXPECT_EQ(format_timestamp(0.0), "00:00:00.0");
  EXPECT_EQ(format_timestamp(4418.0), "01:13:38.0");
  EXPECT_EQ(format_timestamp(59.99), "00:00:59.9");
  EXPECT_EQ(format_timestamp(3.2), "00:00:03.2");
  EXPECT_EQ(format_timestamp(8.2), "00:00:08.2");
  EXPECT_EQ(format_timestamp(360000.0), "100:00:00.0");
}

TEST(Timestamp, NegativeAndNanRejected) {
  for (double bad : {-0.001, -1.0, std::nan("")}) {
    try {
      format_timestamp(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NegativeTime);
    }
  }
}

TEST(Timestamp, TruncatesToTenthsOnMillisecondGrid) {
  // Oracle in integer arithmetic: ms / 100 tenths, split by hand.
  for (long long ms = 0; ms < 4000000; ms += 997) {
    const long long tenths = ms / 100;
    char want[40];
    std::snprintf(want, sizeof want, "%02lld:%02lld:%02lld.%lld", tenths / 36000, tenths / 600 % 60,
                  tenths / 10 % 60, tenths % 10);
    ASSERT_EQ(format_timestamp(ms / 1000.0), want) << ms;
  }
}

TEST(Timestamp, ParseInvertsFormat) {
  EXPECT_EQ(parse_timestamp("01:13:38.0"), 4418.0);
  EXPECT_EQ(parse_timestamp("00:00:59.9"), 59.9);
  EXPECT_FALSE(parse_timestamp("00:61:00.0"));
  EXPECT_FALSE(parse_timestamp("00:00:00"));
  EXPECT_FALSE(parse_timestamp("00:00:00.0x"));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> t(0.0, 20000.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = t(rng);
    auto back = parse_timestamp(format_timestamp(v));
    ASSERT_TRUE(back);
    EXPECT_LE(*back, v + 1e-6);
    EXPECT_GT(*back, v - 0.1 - 1e-6);
  }
}

TEST(Exporters, SingleSegmentExamples) {
  align::AlignedTranscript t;
  t.diarization_enabled = true;
  t.segments.push_back({0, 0.0, 3.2, "Hi there.", "SPEAKER_00", {}});
  EXPECT_EQ(exporters::export_qda_txt(t), "#00:00:00.0#\nSPEAKER_00: Hi there. #00:00:03.2#\n");
  EXPECT_EQ(exporters::export_timestamped_txt(t), "[00:00:00.0] SPEAKER_00: Hi there.\n");
  EXPECT_EQ(exporters::export_plain_txt(t), "SPEAKER_00: Hi there.\n");
  t.diarization_enabled = false;
  EXPECT_EQ(exporters::export_timestamped_txt(t), "[00:00:00.0] Hi there.\n");
  EXPECT_EQ(exporters::export_qda_txt(t), "#00:00:00.0#\nHi there. #00:00:03.2#\n");
}

class Golden : public ::testing::TestWithParam<int> {};

TEST_P(Golden, AllFourFormatsMatch) {
  const auto c = fixtures::all_cases()[GetParam()];
  EXPECT_EQ(exporters::export_timestamped_txt(c.transcript), golden(c.name, exporters::kTimestampedTxt));
  EXPECT_EQ(exporters::export_plain_txt(c.transcript), golden(c.name, exporters::kPlainTxt));
  EXPECT_EQ(exporters::export_qda_txt(c.transcript), golden(c.name, exporters::kQdaTxt));
  EXPECT_EQ(exporters::export_raw_json(c.transcript, c.metadata), golden(c.name, exporters::kRawJson));
}

TEST_P(Golden, WriteExportsProducesGoldenFiles) {
  const auto c = fixtures::all_cases()[GetParam()];
  ts::TempDir dir;
  auto bundle = exporters::write_exports(c.transcript, c.metadata, dir.path());
  EXPECT_EQ(bundle.timestamped_txt.filename(), exporters::kTimestampedTxt);
  EXPECT_EQ(ts::read_text(bundle.timestamped_txt), golden(c.name, exporters::kTimestampedTxt));
  EXPECT_EQ(ts::read_text(bundle.plain_txt), golden(c.name, exporters::kPlainTxt));
  EXPECT_EQ(ts::read_text(bundle.qda_txt), golden(c.name, exporters::kQdaTxt));
  EXPECT_EQ(ts::read_text(bundle.raw_json), golden(c.name, exporters::kRawJson));
}

TEST_P(Golden, RawJsonRoundTripAndReexportClosure) {
  const auto c = fixtures::all_cases()[GetParam()];
  const auto raw = exporters::export_raw_json(c.transcript, c.metadata);
  const auto parsed = exporters::parse_raw_json(raw);
  EXPECT_EQ(parsed.transcript, c.transcript);
  EXPECT_EQ(parsed.metadata, c.metadata);
  EXPECT_EQ(exporters::export_raw_json(parsed.transcript, parsed.metadata), raw);
  EXPECT_EQ(exporters::export_timestamped_txt(parsed.transcript), exporters::export_timestamped_txt(c.transcript));
  EXPECT_EQ(exporters::export_plain_txt(parsed.transcript), exporters::export_plain_txt(c.transcript));
  EXPECT_EQ(exporters::export_qda_txt(parsed.transcript), exporters::export_qda_txt(c.transcript));
}

INSTANTIATE_TEST_SUITE_P(Fixtures, Golden, ::testing::Values(0, 1, 2),
                         [](const auto& info) { return fixtures::all_cases()[info.param].name; });

TEST(ExportProperties, RandomRoundTripClosureAndQdaTokens) {
  std::mt19937 rng(2024);
  const std::regex token(R"(#(\d+:\d\d:\d\d\.\d)#)");
  for (int i = 0; i < 300; ++i) {
    const auto c = random_case(rng);
    const auto raw = exporters::export_raw_json(c.transcript, c.metadata);
    const auto parsed = exporters::parse_raw_json(raw);
    ASSERT_EQ(parsed.transcript.segments, c.transcript.segments) << i;
    ASSERT_EQ(exporters::export_raw_json(parsed.transcript, parsed.metadata), raw);
    ASSERT_EQ(exporters::export_qda_txt(parsed.transcript), exporters::export_qda_txt(c.transcript));

    const auto qda = exporters::export_qda_txt(c.transcript);
    std::size_t tokens = 0;
    for (std::sregex_iterator it(qda.begin(), qda.end(), token), end; it != end; ++it, ++tokens) {
      auto v = parse_timestamp((*it)[1].str());
      ASSERT_TRUE(v);
      EXPECT_GE(*v, 0.0);
      EXPECT_LE(*v, c.metadata.duration_s + 0.5);
    }
    EXPECT_EQ(tokens, c.transcript.segments.size() + 1);
  }
}

TEST(ExportProperties, PlainTextStripsBackToSegmentTexts) {
  std::mt19937 rng(99);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(rng);
    const auto plain = exporters::export_plain_txt(c.transcript);
    std::istringstream in(plain);
    std::string line;
    std::size_t k = 0;
    while (std::getline(in, line)) {
      ASSERT_LT(k, c.transcript.segments.size());
      const auto& seg = c.transcript.segments[k++];
      const std::string prefix = c.transcript.diarization_enabled && seg.speaker ? *seg.speaker + ": " : "";
      ASSERT_EQ(line.substr(0, prefix.size()), prefix);
      EXPECT_EQ(line.substr(prefix.size()), seg.text);
    }
    EXPECT_EQ(k, c.transcript.segments.size());
  }
}

TEST(ExportProperties, ConfidencesKeptToThreeDecimals) {
  align::AlignedTranscript t;
  t.segments.push_back({0, 0.0, 1.0, "x", std::nullopt, {{0.0, 1.0, "x", 0.123456, std::nullopt}}});
  exporters::JobMetadata m;
  m.tool_version = "x";
  const auto parsed = exporters::parse_raw_json(exporters::export_raw_json(t, m));
  EXPECT_EQ(parsed.transcript.segments[0].words[0].confidence, 0.123);
}

TEST(ExportProperties, MalformedRawDocumentRejected) {
  for (const char* bad : {"", "{}", R"({"metadata":{}, "segments":[]})", "[1,2]"}) {
    try {
      exporters::parse_raw_json(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
  }
}
