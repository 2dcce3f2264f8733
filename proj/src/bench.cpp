#include "atrain/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

#include "json.hpp"

#include "atrain/error.hpp"
#include "atrain/fsutil.hpp"

namespace fs = std::filesystem;

namespace atrain::bench {
namespace {

constexpr std::array<std::string_view, 6> kFixedColumns = {"machine_label", "device",  "model_id",
                                                           "file",          "duration_s", "total_s"};

std::string number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error(ErrorCode::Internal, "number formatting failed");
  return std::string(buf.data(), end);
}

double parse_number(std::string_view s, std::string_view column) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad number '" + std::string(s) + "' in column " + std::string(column));
  }
  return v;
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidArgument, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> columns() {
  std::vector<std::string> cols(kFixedColumns.begin(), kFixedColumns.end());
  cols.emplace_back("rpt");
  for (auto s : kStages) cols.push_back(std::string(s) + "_s");
  cols.emplace_back("error");
  return cols;
}

bool is_media_candidate(const fs::path& p) {
  const auto name = p.filename().string();
  if (name.empty() || name.front() == '.') return false;
  if (p.extension() == ".json" || p.extension() == ".csv" || p.extension() == ".md") return false;
  return true;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<fs::path> collect_corpus(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::FileNotFound, "corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_media_candidate(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string default_machine_label() {
  char host[256] = {};
  if (::gethostname(host, sizeof host - 1) != 0 || host[0] == '\0') return "local";
  return host;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : columns()) out += (out.empty() ? "" : ",") + c;
  return out + "\n";
}

std::string csv_row(const BenchResult& r) {
  std::vector<std::string> f = {quote(r.machine_label), quote(r.device),    quote(r.model_id),
                                quote(r.file),          number(r.duration_s), number(r.total_s),
                                r.rpt ? number(*r.rpt) : std::string()};
  for (auto s : kStages) {
    auto it = r.stage_times_s.find(std::string(s));
    f.push_back(it == r.stage_times_s.end() ? std::string() : number(it->second));
  }
  f.push_back(quote(r.error));
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
  return out + "\n";
}

std::vector<BenchResult> parse_csv(std::string_view text) {
  auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "empty CSV");
  const auto expected = columns();
  if (rows.front() != expected) throw Error(ErrorCode::InvalidArgument, "unexpected CSV header");
  std::vector<BenchResult> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != expected.size()) {
      throw Error(ErrorCode::InvalidArgument, "CSV row " + std::to_string(i + 1) + " has " +
                                                  std::to_string(f.size()) + " fields, expected " +
                                                  std::to_string(expected.size()));
    }
    BenchResult r;
    r.machine_label = f[0];
    r.device = f[1];
    r.model_id = f[2];
    r.file = f[3];
    r.duration_s = parse_number(f[4], "duration_s");
    r.total_s = parse_number(f[5], "total_s");
    if (!f[6].empty()) r.rpt = parse_number(f[6], "rpt");
    for (std::size_t s = 0; s < std::size(kStages); ++s) {
      if (!f[7 + s].empty()) r.stage_times_s[std::string(kStages[s])] = parse_number(f[7 + s], expected[7 + s]);
    }
    r.error = f.back();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<BenchResult> run_benchmark(const BenchOptions& options, jobs::ManagerOptions manager_options,
                                       const BenchProgress& progress) {
  if (options.corpus.empty()) throw Error(ErrorCode::InvalidArgument, "benchmark corpus is empty");
  if (options.models.empty()) throw Error(ErrorCode::InvalidArgument, "no models given");
  if (options.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  for (const auto& m : options.models) manager_options.registry->spec(m);

  const std::string label = options.machine_label.empty() ? default_machine_label() : options.machine_label;
  if (!options.csv_out.empty()) {
    std::error_code ec;
    if (!fs::exists(options.csv_out, ec) || fs::file_size(options.csv_out, ec) == 0) {
      fsutil::write_file_atomic(options.csv_out, csv_header());
    }
  }

  jobs::JobManager manager(std::move(manager_options));
  const std::size_t total = static_cast<std::size_t>(options.repetitions) * options.corpus.size() * options.models.size();
  std::vector<BenchResult> results;
  for (int rep = 0; rep < options.repetitions; ++rep) {
    for (const auto& file : options.corpus) {
      for (const auto& model : options.models) {
        BenchResult row;
        row.machine_label = label;
        row.model_id = model;
        row.file = file.filename().string();
        row.device = std::string(engines::to_string(options.device));
        try {
          jobs::JobConfig config;
          config.input_path = file;
          config.model_id = model;
          config.speakers = jobs::SpeakerSetting::automatic();
          config.device = options.device;
          const auto created = manager.create_job(config, {.move_input = false, .enqueue = false});
          row.device = created.device;
          const auto done = manager.run_pipeline(created.job_id);
          row.device = done.device;
          row.duration_s = done.duration_s.value_or(0.0);
          row.total_s = done.processing_time_s.value_or(0.0);
          row.stage_times_s = done.stage_times_s;
          if (done.state == jobs::JobState::Completed) {
            row.rpt = jobs::compute_rpt(row.total_s, row.duration_s);
          } else if (done.error) {
            row.error = done.error->code + " during " + done.error->stage + ": " + done.error->message;
          }
        } catch (const std::exception& e) {
          const auto* err = dynamic_cast<const Error*>(&e);
          row.error = std::string(err ? to_string(err->code()) : "Internal") + ": " + e.what();
        }
        if (!options.csv_out.empty()) {
          auto line = csv_row(row);
          line.pop_back();
          fsutil::append_line(options.csv_out, line);
        }
        results.push_back(row);
        if (progress) progress(results.back(), results.size(), total);
      }
    }
  }
  return results;
}

Report emit_report(const std::vector<BenchResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "no benchmark results to report");
  Report report;
  report.csv = csv_header();
  for (const auto& r : results) report.csv += csv_row(r);

  struct Group {
    int runs = 0;
    int failed = 0;
    double duration = 0.0;
    double total = 0.0;
    double rpt = 0.0;
  };
  // machine, device, tier ordinal, model id
  using Key = std::tuple<std::string, std::string, int, std::string>;
  std::map<Key, Group> groups;
  for (const auto& r : results) {
    const auto tier = engines::parse_model_tier(r.model_id);
    Key key{r.machine_label, r.device, tier ? engines::tier_ordinal(*tier) : 99, r.model_id};
    auto& g = groups[key];
    if (!r.rpt) {
      ++g.failed;
      continue;
    }
    ++g.runs;
    g.duration += r.duration_s;
    g.total += r.total_s;
    g.rpt += *r.rpt;

    if (tier == engines::ModelTier::Large) {
      if (r.device == "cpu" && (*r.rpt < 1.0 || *r.rpt > 3.5)) {
        report.flags.push_back("advisory: " + r.machine_label + " cpu large " + r.file + " rpt " + fixed(*r.rpt, 3) +
                               " outside the expected CPU range [1, 3.5]");
      } else if (r.device == "gpu" && *r.rpt > 0.5) {
        report.flags.push_back("advisory: " + r.machine_label + " gpu large " + r.file + " rpt " + fixed(*r.rpt, 3) +
                               " above the expected GPU ceiling 0.5");
      }
    }
  }

  std::string md = "| machine | device | model | runs | failed | mean duration (s) | mean total (s) | mean rpt |\n";
  md += "|---|---|---|---:|---:|---:|---:|---:|\n";
  nlohmann::ordered_json series = nlohmann::ordered_json::array();
  std::map<std::pair<std::string, std::string>, std::size_t> series_index;
  for (const auto& [key, g] : groups) {
    const auto& [machine, device, ordinal, model] = key;
    md += "| " + machine + " | " + device + " | " + model + " | " + std::to_string(g.runs) + " | " +
          std::to_string(g.failed) + " | ";
    if (g.runs > 0) {
      md += fixed(g.duration / g.runs, 1) + " | " + fixed(g.total / g.runs, 2) + " | " + fixed(g.rpt / g.runs, 3) +
            " |\n";
    } else {
      md += "- | - | - |\n";
    }
    if (g.runs == 0 || ordinal == 99) continue;
    auto [it, inserted] = series_index.try_emplace({machine, device}, series.size());
    if (inserted) {
      series.push_back({{"machine_label", machine}, {"device", device}, {"points", nlohmann::ordered_json::array()}});
    }
    series[it->second]["points"].push_back({ordinal, g.rpt / g.runs});
  }
  if (!report.flags.empty()) {
    md += "\n";
    for (const auto& f : report.flags) md += "- " + f + "\n";
  }
  report.markdown = std::move(md);
  report.plot_json = nlohmann::ordered_json{{"x", "model tier ordinal (tiny=0 .. large=4)"}, {"y", "rpt"},
                                            {"series", series}}
                         .dump(2) +
                     "\n";
  return report;
}

}  // namespace atrain::bench
