#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ppgsqa/dsp.hpp"

namespace ppgsqa {

struct ScoredSample {
  double score = 0.0;  // probability of Good
  Quality label = Quality::Bad;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;  // thresholds[i] produced points[i + 1]
  double auc = 0.0;

  double trapezoid() const;
  std::string to_csv() const;
};

// Mann-Whitney form: P(score_good > score_bad) + 0.5 * P(tie). Uses midranks.
double auc(std::span<const ScoredSample> samples);

double accuracy(std::span<const ScoredSample> samples, double threshold = 0.5);

RocCurve roc_curve(std::span<const ScoredSample> samples);

struct ConfusionMatrix {
  std::size_t true_good = 0, false_good = 0, true_bad = 0, false_bad = 0;
};

ConfusionMatrix confusion(std::span<const ScoredSample> samples, double threshold = 0.5);

}  // namespace ppgsqa
