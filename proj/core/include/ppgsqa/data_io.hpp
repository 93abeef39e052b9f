#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppgsqa/dsp.hpp"
#include "ppgsqa/model.hpp"

namespace ppgsqa {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Records and labels
//
// Record file: one decimal sample per line.
// Label file:  one run per line, "start,end,quality" with end exclusive and
//              quality in {good, bad}; runs must tile [0, len) exactly.

std::vector<double> load_samples(const fs::path& record_path);

SignalRecord load_record(const fs::path& record_path, const fs::path& label_path, double fs,
                         const std::string& subject_id = {});

void write_record(const SignalRecord& rec, const fs::path& record_path, const fs::path& label_path);

struct LabelRun {
  std::size_t start = 0;
  std::size_t end = 0;
  bool good = true;
};

/// Run-length encoding of a quality mask (maximal runs).
std::vector<LabelRun> mask_to_runs(const std::vector<bool>& mask);

// ---------------------------------------------------------------------------
// Manifest (JSON)

enum class Split { Train, Test };

struct ManifestEntry {
  std::string subject_id;
  std::string record_path;  // relative paths resolve against the manifest directory
  std::string label_path;
  double fs = kDefaultFs;
  Split split = Split::Train;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
  std::vector<ManifestEntry> with_split(Split split) const;
};

void write_manifest(const DatasetManifest& manifest, const fs::path& path);
/// Validates unique subject ids and, when check_files is set, that every
/// referenced file exists.
DatasetManifest read_manifest(const fs::path& path, bool check_files = true);

/// Loads the entries' records, resolving relative paths against base_dir.
std::vector<SignalRecord> load_records(std::span<const ManifestEntry> entries, const fs::path& base_dir);

// ---------------------------------------------------------------------------
// Weight files
//
//   line 1   "PPGSQA-WEIGHTS"
//   line 2   decimal byte length N of the header
//   N bytes  JSON header: format_version, model_config, channels, seed,
//            byte_order ("little"), scalar_width (32), parameters and
//            buffers as [{name, shape}] in store order
//   body     float32 little-endian: parameters in header order, then buffers

inline constexpr int kWeightFormatVersion = 1;

struct WeightFile {
  ModelConfig config;
  ChannelSet channels;
  std::uint64_t seed = 0;
};

void save_weights(const Model<float>& model, const ChannelSet& channels, std::uint64_t seed, const fs::path& path);
std::string serialize_weights(const Model<float>& model, const ChannelSet& channels, std::uint64_t seed);

struct LoadedWeights {
  Model<float> model;
  WeightFile meta;
};

LoadedWeights load_weights(const fs::path& path);
LoadedWeights parse_weights(const std::string& bytes);

// ---------------------------------------------------------------------------
// Predictions

struct Prediction {
  SegmentSource source;
  double score = 0.0;
  std::optional<Quality> truth;
};

/// CSV with header subject_id,start_sample,score,predicted_label,true_label,
/// sorted by (subject_id, start_sample). Scores outside [0, 1] raise RangeError.
std::string format_predictions(std::vector<Prediction> rows, double threshold = 0.5);
void write_predictions(std::vector<Prediction> rows, const fs::path& path, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class Corruption { GaussianBurst, BaselineWander, Flatline, MotionSpikes };

struct SynthesisConfig {
  std::size_t n_subjects = 12;
  std::size_t n_test_subjects = 0;  // extra subjects tagged Split::Test
  double minutes_per_subject = 30.0;
  double fs = kDefaultFs;
  double hr_min_bpm = 55.0;
  double hr_max_bpm = 100.0;
  // Probability that a 30 s window receives a corrupted span.
  double corruption_probability = 0.4;
  // Corrupted span length as a fraction of the window.
  double span_min_fraction = 0.5;
  double span_max_fraction = 1.0;
  std::vector<Corruption> kinds{Corruption::GaussianBurst, Corruption::BaselineWander, Corruption::Flatline,
                                Corruption::MotionSpikes};
  std::uint64_t seed = 7;

  void validate() const;
};

/// Deterministic PPG-like records: two Gaussian pulses per beat, drifting
/// heart rate, respiratory modulation and sensor noise, with corrupted spans
/// marked bad in the quality mask.
std::vector<SignalRecord> synthesize_records(const SynthesisConfig& cfg);

/// Writes records, labels and manifest.json under out_dir; returns the manifest.
DatasetManifest synthesize_corpus(const SynthesisConfig& cfg, const fs::path& out_dir);

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

}  // namespace ppgsqa
