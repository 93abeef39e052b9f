#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppgsqa/data_io.hpp"
#include "ppgsqa/errors.hpp"

namespace ppgsqa {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& what) {
  fail(ErrorKind::MalformedFile, path.string() + ":" + std::to_string(line) + ": " + what);
}

template <typename N>
bool parse_number(std::string_view s, N& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::IoFailure, "short write to " + path.string());
}

std::vector<double> load_samples(const fs::path& record_path) {
  std::vector<double> samples;
  const auto lines = read_lines(record_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto text = trim(lines[i]);
    if (text.empty()) continue;
    double v = 0.0;
    if (!parse_number(text, v) || !std::isfinite(v)) malformed(record_path, i + 1, "expected a finite decimal sample");
    samples.push_back(v);
  }
  return samples;
}

SignalRecord load_record(const fs::path& record_path, const fs::path& label_path, double fs,
                         const std::string& subject_id) {
  SignalRecord rec;
  rec.subject_id = subject_id.empty() ? record_path.stem().string() : subject_id;
  rec.fs = fs;
  rec.samples = load_samples(record_path);

  std::vector<LabelRun> runs;
  const auto label_lines = read_lines(label_path);
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    const auto text = trim(label_lines[i]);
    if (text.empty()) continue;
    const auto c1 = text.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
    if (c2 == std::string_view::npos) malformed(label_path, i + 1, "expected start,end,quality");
    LabelRun run;
    if (!parse_number(text.substr(0, c1), run.start) || !parse_number(text.substr(c1 + 1, c2 - c1 - 1), run.end)) {
      malformed(label_path, i + 1, "run bounds must be non-negative integers");
    }
    const auto quality = trim(text.substr(c2 + 1));
    if (quality == "good") run.good = true;
    else if (quality == "bad") run.good = false;
    else malformed(label_path, i + 1, "quality must be 'good' or 'bad'");
    if (run.end <= run.start) malformed(label_path, i + 1, "empty or reversed run");
    runs.push_back(run);
  }

  std::sort(runs.begin(), runs.end(), [](const LabelRun& a, const LabelRun& b) { return a.start < b.start; });
  rec.quality_mask.assign(rec.samples.size(), false);
  std::size_t covered = 0;
  for (const auto& run : runs) {
    if (run.start < covered) {
      fail(ErrorKind::CoverageGap, label_path.string() + ": run starting at " + std::to_string(run.start) + " overlaps");
    }
    if (run.start > covered) {
      fail(ErrorKind::CoverageGap, label_path.string() + ": samples " + std::to_string(covered) + ".." +
                                       std::to_string(run.start) + " are unlabelled");
    }
    if (run.end > rec.samples.size()) {
      fail(ErrorKind::CoverageGap, label_path.string() + ": run ends past the record (" +
                                       std::to_string(rec.samples.size()) + " samples)");
    }
    for (std::size_t i = run.start; i < run.end; ++i) rec.quality_mask[i] = run.good;
    covered = run.end;
  }
  if (covered != rec.samples.size()) {
    fail(ErrorKind::CoverageGap, label_path.string() + ": samples from " + std::to_string(covered) + " are unlabelled");
  }
  return rec;
}

std::vector<LabelRun> mask_to_runs(const std::vector<bool>& mask) {
  std::vector<LabelRun> runs;
  for (std::size_t i = 0; i < mask.size();) {
    std::size_t j = i;
    while (j < mask.size() && mask[j] == mask[i]) ++j;
    runs.push_back({i, j, mask[i]});
    i = j;
  }
  return runs;
}

void write_record(const SignalRecord& rec, const fs::path& record_path, const fs::path& label_path) {
  rec.validate();
  std::string body;
  body.reserve(rec.samples.size() * 12);
  char buf[64];
  for (double v : rec.samples) {
    std::snprintf(buf, sizeof buf, "%.6f\n", v);
    body += buf;
  }
  write_file(record_path, body);

  std::string labels;
  for (const auto& run : mask_to_runs(rec.quality_mask)) {
    labels += std::to_string(run.start) + "," + std::to_string(run.end) + (run.good ? ",good\n" : ",bad\n");
  }
  write_file(label_path, labels);
}

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> DatasetManifest::with_split(Split split) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [split](const ManifestEntry& e) { return e.split == split; });
  return out;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "ppgsqa-manifest";
  j["version"] = 1;
  auto subjects = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    subjects.push_back({{"subject_id", e.subject_id},
                        {"record", e.record_path},
                        {"labels", e.label_path},
                        {"fs", e.fs},
                        {"split", e.split == Split::Train ? "train" : "test"}});
  }
  j["subjects"] = std::move(subjects);
  write_file(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& path, bool check_files) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedFile, path.string() + ": " + e.what());
  }
  DatasetManifest m;
  std::set<std::string> ids;
  try {
    if (j.at("version").get<int>() != 1) fail(ErrorKind::VersionMismatch, "unsupported manifest version");
    for (const auto& s : j.at("subjects")) {
      ManifestEntry e;
      e.subject_id = s.at("subject_id").get<std::string>();
      e.record_path = s.at("record").get<std::string>();
      e.label_path = s.at("labels").get<std::string>();
      e.fs = s.at("fs").get<double>();
      const auto split = s.at("split").get<std::string>();
      if (split != "train" && split != "test") fail(ErrorKind::MalformedFile, "split must be train or test");
      e.split = split == "train" ? Split::Train : Split::Test;
      if (!ids.insert(e.subject_id).second) fail(ErrorKind::MalformedFile, "duplicate subject id '" + e.subject_id + "'");
      if (!(e.fs > 0.0)) fail(ErrorKind::MalformedFile, "fs must be positive for '" + e.subject_id + "'");
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedFile, path.string() + ": " + e.what());
  }
  if (check_files) {
    const auto base = path.parent_path();
    for (const auto& e : m.entries) {
      for (const auto& p : {e.record_path, e.label_path}) {
        if (!fs::exists(base / p)) fail(ErrorKind::IoFailure, "manifest references missing file " + (base / p).string());
      }
    }
  }
  return m;
}

std::vector<SignalRecord> load_records(std::span<const ManifestEntry> entries, const fs::path& base_dir) {
  std::vector<SignalRecord> out;
  for (const auto& e : entries) {
    out.push_back(load_record(base_dir / e.record_path, base_dir / e.label_path, e.fs, e.subject_id));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_predictions(std::vector<Prediction> rows, double threshold) {
  for (const auto& r : rows) {
    if (!(r.score >= 0.0 && r.score <= 1.0)) fail(ErrorKind::RangeError, "prediction score outside [0, 1]");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Prediction& a, const Prediction& b) { return a.source < b.source; });
  std::string out = "subject_id,start_sample,score,predicted_label,true_label\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.score);
    out += r.source.subject_id + "," + std::to_string(r.source.start) + "," + buf + "," +
           (r.score >= threshold ? "good" : "bad") + "," +
           (r.truth ? (*r.truth == Quality::Good ? "good" : "bad") : "") + "\n";
  }
  return out;
}

void write_predictions(std::vector<Prediction> rows, const fs::path& path, double threshold) {
  write_file(path, format_predictions(std::move(rows), threshold));
}

}  // namespace ppgsqa
