#include "ppgsqa/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

namespace {

void require_both_classes(std::span<const ScoredSample> samples, std::size_t& n_good, std::size_t& n_bad) {
  n_good = 0;
  n_bad = 0;
  for (const auto& s : samples) {
    if (!(s.score >= 0.0 && s.score <= 1.0)) fail(ErrorKind::RangeError, "score outside [0, 1]");
    (s.label == Quality::Good ? n_good : n_bad) += 1;
  }
  if (n_good == 0 || n_bad == 0) fail(ErrorKind::SingleClass, "AUC needs both Good and Bad samples");
}

std::vector<std::size_t> order_by_score(std::span<const ScoredSample> samples, bool descending) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? samples[a].score > samples[b].score : samples[a].score < samples[b].score;
  });
  return order;
}

}  // namespace

double auc(std::span<const ScoredSample> samples) {
  std::size_t n_good = 0, n_bad = 0;
  require_both_classes(samples, n_good, n_bad);

  // Sum of midranks (1-based, doubled to stay integral) of the Good samples.
  const auto order = order_by_score(samples, false);
  double rank_sum_x2 = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && samples[order[j]].score == samples[order[i]].score) ++j;
    const double midrank_x2 = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j) / 2
    for (std::size_t k = i; k < j; ++k) {
      if (samples[order[k]].label == Quality::Good) rank_sum_x2 += midrank_x2;
    }
    i = j;
  }
  const double g = static_cast<double>(n_good);
  const double u = rank_sum_x2 / 2.0 - g * (g + 1.0) / 2.0;
  return u / (g * static_cast<double>(n_bad));
}

double accuracy(std::span<const ScoredSample> samples, double threshold) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "accuracy of an empty sample set");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail(ErrorKind::RangeError, "threshold outside [0, 1]");
  std::size_t correct = 0;
  for (const auto& s : samples) {
    correct += ((s.score >= threshold) == (s.label == Quality::Good)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

ConfusionMatrix confusion(std::span<const ScoredSample> samples, double threshold) {
  ConfusionMatrix m;
  for (const auto& s : samples) {
    const bool predicted_good = s.score >= threshold;
    const bool good = s.label == Quality::Good;
    if (predicted_good && good) ++m.true_good;
    else if (predicted_good) ++m.false_good;
    else if (good) ++m.false_bad;
    else ++m.true_bad;
  }
  return m;
}

RocCurve roc_curve(std::span<const ScoredSample> samples) {
  std::size_t n_good = 0, n_bad = 0;
  require_both_classes(samples, n_good, n_bad);

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  const auto order = order_by_score(samples, true);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = samples[order[i]].score;
    while (i < order.size() && samples[order[i]].score == threshold) {
      (samples[order[i]].label == Quality::Good ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_bad),
                            static_cast<double>(tp) / static_cast<double>(n_good)});
    curve.thresholds.push_back(threshold);
  }
  curve.auc = curve.trapezoid();
  return curve;
}

double RocCurve::trapezoid() const {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

std::string RocCurve::to_csv() const {
  std::string out = "threshold,fpr,tpr\n";
  char line[96];
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == 0) {
      std::snprintf(line, sizeof line, "inf,%.17g,%.17g\n", points[i].fpr, points[i].tpr);
    } else {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", thresholds[i - 1], points[i].fpr, points[i].tpr);
    }
    out += line;
  }
  return out;
}

}  // namespace ppgsqa
