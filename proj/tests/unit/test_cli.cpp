#include <unistd.h>

#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ppgsqa/cli.hpp"
#include "ppgsqa/data_io.hpp"

using namespace ppgsqa;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("ppgsqa_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

TEST_CASE("count reports the published totals") {
  const auto dir = scratch("count");
  auto r = run({"count", "--channels", "ppg,fdp,sdp", "--se", "on", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("input PPG+FDP+SDP, se on") != std::string::npos);
  CHECK(read_json(dir / "count.json").dump().find("61666") != std::string::npos);

  r = run({"count", "--channels", "ppg", "--se", "off", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(read_json(dir / "count.json").dump().find("58658") != std::string::npos);

  const auto echo = read_json(dir / "count.config.json");
  CHECK(echo["channels"] == "ppg");
  CHECK(echo["seed"] == 42);
  fs::remove_all(dir);
}

TEST_CASE("count --all tabulates 22 configurations") {
  const auto dir = scratch("count_all");
  const auto r = run({"count", "--all", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  const auto rows = read_json(dir / "count_table.json");
  CHECK(rows.size() == 22);
  const auto csv = read_file(dir / "count_table.csv");
  CHECK(csv.find("PPG+FDP+SDP,on,61666,61.67,8911960,8.91") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit 2") {
  const auto dir = scratch("usage");
  CHECK(run({"count", "--channels", "ppg,ppg", "--out-dir", dir.string()}).code == 2);
  CHECK(run({"count", "--channels", "ecg", "--out-dir", dir.string()}).code == 2);
  CHECK(run({"count", "--se", "maybe"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"count", "--convention", "flops", "--out-dir", dir.string()}).code == 2);
  const auto dup = run({"count", "--channels", "ppg,ppg", "--out-dir", dir.string()});
  CHECK(dup.err.find("error:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("help exits 0 for every subcommand") {
  CHECK(run({"--help"}).code == 0);
  for (const std::string cmd : {"synth", "preprocess", "train", "cv", "eval", "predict", "count"}) {
    INFO(cmd);
    const auto r = run({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--out-dir") != std::string::npos);
  }
}

TEST_CASE("data errors exit 3") {
  const auto dir = scratch("data");
  CHECK(run({"synth", "--subjects", "3", "--minutes", "2", "--out-dir", (dir / "c").string()}).code == 0);
  const auto manifest = (dir / "c" / "manifest.json").string();
  // Three subjects cannot fill five folds.
  CHECK(run({"cv", "--manifest", manifest, "--epochs", "1", "--out-dir", dir.string()}).code == 3);
  CHECK(run({"train", "--manifest", (dir / "nope.json").string(), "--out-dir", dir.string()}).code == 3);
  CHECK(run({"train", "--out-dir", dir.string()}).code != 0);
  fs::remove_all(dir);
}

TEST_CASE("synth, preprocess, train, eval and predict") {
  const auto dir = scratch("pipeline");
  const auto corpus = dir / "corpus";
  REQUIRE(run({"synth", "--subjects", "3", "--test-subjects", "1", "--minutes", "3", "--seed", "5", "--out-dir",
               corpus.string()})
              .code == 0);
  const auto manifest = (corpus / "manifest.json").string();

  auto r = run({"preprocess", "--manifest", manifest, "--channels", "ppg,sdp", "--out-dir", (dir / "pre").string()});
  CHECK(r.code == 0);
  const auto summary = read_json(dir / "pre" / "preprocess_summary.json");
  CHECK(summary.dump().find("ppg,sdp") != std::string::npos);
  CHECK(read_file(dir / "pre" / "segments.csv").find('\n') != std::string::npos);

  r = run({"train", "--manifest", manifest, "--channels", "ppg,fdp", "--epochs", "1", "--out-dir", (dir / "t").string()});
  REQUIRE(r.code == 0);
  const auto weights = (dir / "t" / "model.weights").string();
  CHECK(fs::exists(weights));
  CHECK(read_file(dir / "t" / "train_metrics.jsonl").find("\"epoch\":0") != std::string::npos);

  r = run({"eval", "--manifest", manifest, "--weights", weights, "--out-dir", (dir / "e").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("channels ppg,fdp\n", 0) == 0);
  const auto ev = read_json(dir / "e" / "eval.json");
  CHECK(ev["segments"] == 6);
  CHECK(fs::exists(dir / "e" / "predictions.csv"));

  const auto entry = read_manifest(manifest).with_split(Split::Test).front();
  r = run({"predict", "--weights", weights, "--record", (corpus / entry.record_path).string(), "--labels",
           (corpus / entry.label_path).string(), "--out-dir", (dir / "p").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("channels ppg,fdp\n", 0) == 0);
  CHECK(r.out.find("good ") != std::string::npos);
  const auto preds = read_file(dir / "p" / "predictions.csv");
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 7);

  // A record shorter than one segment cannot be scored by the model.
  std::string short_rec;
  for (int i = 0; i < 100; ++i) short_rec += "0.5\n";
  write_file(dir / "short.txt", short_rec);
  r = run({"predict", "--weights", weights, "--record", (dir / "short.txt").string(), "--out-dir", (dir / "p").string()});
  CHECK(r.code == 4);

  // A truncated weight file is a mismatch.
  auto bytes = read_file(weights);
  write_file(dir / "cut.weights", bytes.substr(0, bytes.size() - 8));
  r = run({"eval", "--manifest", manifest, "--weights", (dir / "cut.weights").string(), "--out-dir", (dir / "e").string()});
  CHECK(r.code == 4);
  fs::remove_all(dir);
}

TEST_CASE("deterministic reruns write identical artifacts") {
  const auto dir = scratch("determinism");
  REQUIRE(run({"synth", "--subjects", "5", "--minutes", "2", "--out-dir", (dir / "c").string()}).code == 0);
  const auto manifest = (dir / "c" / "manifest.json").string();
  for (const std::string sub : {"a", "b"}) {
    REQUIRE(run({"cv", "--manifest", manifest, "--epochs", "1", "--deterministic", "--out-dir", (dir / sub).string()})
                .code == 0);
    REQUIRE(run({"train", "--manifest", manifest, "--epochs", "1", "--deterministic", "--out-dir", (dir / sub).string()})
                .code == 0);
  }
  for (const std::string f : {"model.weights", "train_metrics.jsonl", "cv_summary.json", "fold_0_metrics.jsonl",
                              "fold_4_metrics.jsonl"}) {
    INFO(f);
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  const auto cv = read_json(dir / "a" / "cv_summary.json");
  CHECK(cv["folds"].size() == 5);
  fs::remove_all(dir);
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ErrorKind::InvalidConfig, false) == 2);
  CHECK(cli::exit_code_for(ErrorKind::InvalidBand, false) == 2);
  CHECK(cli::exit_code_for(ErrorKind::RecordTooShort, true) == 4);
  CHECK(cli::exit_code_for(ErrorKind::RecordTooShort, false) == 3);
  CHECK(cli::exit_code_for(ErrorKind::ShapeMismatch, false) == 4);
  CHECK(cli::exit_code_for(ErrorKind::TooFewSubjects, false) == 3);
  CHECK(cli::exit_code_for(ErrorKind::MalformedFile, true) == 3);
}
