#include <cmath>
#include <cstdio>
#include <numbers>

#include "ppgsqa/data_io.hpp"
#include "ppgsqa/errors.hpp"
#include "ppgsqa/rng.hpp"

namespace ppgsqa {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void add_gaussian(std::vector<double>& x, double fs, double center_s, double sigma_s, double amplitude) {
  const auto lo = static_cast<std::ptrdiff_t>(std::floor((center_s - 4.0 * sigma_s) * fs));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil((center_s + 4.0 * sigma_s) * fs));
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(x.size()); ++i) {
    const double d = (static_cast<double>(i) / fs - center_s) / sigma_s;
    x[static_cast<std::size_t>(i)] += amplitude * std::exp(-0.5 * d * d);
  }
}

std::vector<double> clean_ppg(std::size_t n, double fs, double hr_lo, double hr_hi, Rng& rng) {
  std::vector<double> x(n, 0.0);
  const double duration = static_cast<double>(n) / fs;
  const double hr_center = rng.uniform(hr_lo + 0.2 * (hr_hi - hr_lo), hr_hi - 0.2 * (hr_hi - hr_lo));
  const double dicrotic = rng.uniform(0.3, 0.6);
  const double resp_rate = rng.uniform(0.18, 0.35);
  const double resp_depth = rng.uniform(0.05, 0.15);

  double hr = hr_center;
  double t = rng.uniform(0.0, 0.5);
  while (t < duration + 1.0) {
    // Mean-reverting drift, clamped to the configured range.
    hr += 0.05 * (hr_center - hr) + rng.normal() * 1.0;
    hr = std::clamp(hr, hr_lo, hr_hi);
    const double period = 60.0 / hr;
    const double amp = 1.0 + resp_depth * std::sin(kTwoPi * resp_rate * t) + 0.03 * rng.normal();
    add_gaussian(x, fs, t + 0.18 * period, 0.09 * period + 0.02, amp);
    add_gaussian(x, fs, t + 0.45 * period, 0.12 * period + 0.02, amp * dicrotic);
    t += period;
  }
  const double wander_f = rng.uniform(0.03, 0.1);
  const double wander_phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i) / fs;
    x[i] += 0.2 * std::sin(kTwoPi * wander_f * ti + wander_phase) + 0.02 * rng.normal();
  }
  return x;
}

void corrupt(std::vector<double>& x, std::size_t begin, std::size_t end, double fs, Corruption kind, Rng& rng) {
  switch (kind) {
    case Corruption::GaussianBurst: {
      const double sigma = rng.uniform(0.5, 1.5);
      for (std::size_t i = begin; i < end; ++i) x[i] += sigma * rng.normal();
      break;
    }
    case Corruption::BaselineWander: {
      const double f1 = rng.uniform(0.15, 0.5), f2 = rng.uniform(0.6, 1.5);
      const double a1 = rng.uniform(4.0, 8.0), a2 = rng.uniform(1.0, 2.5);
      const double p1 = rng.uniform(0.0, kTwoPi), p2 = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = begin; i < end; ++i) {
        const double t = static_cast<double>(i) / fs;
        x[i] += a1 * std::sin(kTwoPi * f1 * t + p1) + a2 * std::sin(kTwoPi * f2 * t + p2);
      }
      break;
    }
    case Corruption::Flatline: {
      const double level = rng.uniform(-1.0, 2.0);
      for (std::size_t i = begin; i < end; ++i) x[i] = level + 0.01 * rng.normal();
      break;
    }
    case Corruption::MotionSpikes: {
      const double rate = rng.uniform(0.5, 2.0);
      const double t0 = static_cast<double>(begin) / fs;
      const double t1 = static_cast<double>(end) / fs;
      std::vector<double> spikes(x.size(), 0.0);
      for (double t = t0 + rng.uniform(0.0, 1.0 / rate); t < t1; t += rng.uniform(0.3, 1.7) / rate) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        add_gaussian(spikes, fs, t, rng.uniform(0.05, 0.15), sign * rng.uniform(3.0, 6.0));
      }
      for (std::size_t i = begin; i < end; ++i) x[i] += spikes[i] + 0.3 * rng.normal();
      break;
    }
  }
}

std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subj%03zu", i + 1);
  return buf;
}

}  // namespace

void SynthesisConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
  if (n_subjects == 0) bad("need at least one subject");
  if (!(minutes_per_subject > 0.0)) bad("minutes per subject must be positive");
  if (!(fs > 0.0)) bad("fs must be positive");
  if (!(hr_min_bpm > 30.0 && hr_max_bpm < 220.0 && hr_min_bpm < hr_max_bpm)) {
    bad("heart rate range must lie within (30, 220) bpm");
  }
  if (!(corruption_probability >= 0.0 && corruption_probability <= 1.0)) bad("corruption probability must lie in [0, 1]");
  if (!(span_min_fraction > 0.0 && span_min_fraction <= span_max_fraction && span_max_fraction <= 1.0)) {
    bad("span fractions must satisfy 0 < min <= max <= 1");
  }
  if (kinds.empty() && corruption_probability > 0.0) bad("no corruption kinds enabled");
}

std::vector<SignalRecord> synthesize_records(const SynthesisConfig& cfg) {
  cfg.validate();
  Rng master = seeded_rng(cfg.seed);
  const auto n = static_cast<std::size_t>(std::lround(cfg.minutes_per_subject * 60.0 * cfg.fs));
  const auto window = static_cast<std::size_t>(std::lround(kDefaultSegmentSeconds * cfg.fs));

  std::vector<SignalRecord> records;
  for (std::size_t s = 0; s < cfg.n_subjects + cfg.n_test_subjects; ++s) {
    Rng rng = seeded_rng(master.next_u64());
    SignalRecord rec;
    rec.subject_id = subject_name(s);
    rec.fs = cfg.fs;
    rec.samples = clean_ppg(n, cfg.fs, cfg.hr_min_bpm, cfg.hr_max_bpm, rng);
    rec.quality_mask.assign(n, true);

    for (std::size_t w = 0; w < n; w += window) {
      const std::size_t wlen = std::min(window, n - w);
      if (!(rng.uniform() < cfg.corruption_probability)) continue;
      const double frac = rng.uniform(cfg.span_min_fraction, cfg.span_max_fraction);
      const auto len = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(frac * static_cast<double>(wlen))), 1, wlen);
      const std::size_t begin = w + static_cast<std::size_t>(rng.below(wlen - len + 1));
      const Corruption kind = cfg.kinds[static_cast<std::size_t>(rng.below(cfg.kinds.size()))];
      corrupt(rec.samples, begin, begin + len, cfg.fs, kind, rng);
      for (std::size_t i = begin; i < begin + len; ++i) rec.quality_mask[i] = false;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetManifest synthesize_corpus(const SynthesisConfig& cfg, const fs::path& out_dir) {
  const auto records = synthesize_records(cfg);
  DatasetManifest manifest;
  for (std::size_t s = 0; s < records.size(); ++s) {
    const auto& rec = records[s];
    ManifestEntry e;
    e.subject_id = rec.subject_id;
    e.record_path = "records/" + rec.subject_id + ".txt";
    e.label_path = "labels/" + rec.subject_id + ".labels";
    e.fs = rec.fs;
    e.split = s < cfg.n_subjects ? Split::Train : Split::Test;
    write_record(rec, out_dir / e.record_path, out_dir / e.label_path);
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace ppgsqa
