#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ppgsqa {

inline constexpr double kDefaultFs = 32.0;
inline constexpr double kDefaultSegmentSeconds = 30.0;
inline constexpr double kDefaultGoodThreshold = 0.8;
inline constexpr double kDefaultBandLow = 0.5;
inline constexpr double kDefaultBandHigh = 8.0;
inline constexpr int kDefaultFilterOrder = 3;

enum class Quality { Bad = 0, Good = 1 };

struct SignalRecord {
  std::string subject_id;
  std::vector<double> samples;
  double fs = kDefaultFs;
  std::vector<bool> quality_mask;  // true = labelled good

  void validate() const;
};

struct SegmentSource {
  std::string subject_id;
  std::size_t start = 0;

  auto operator<=>(const SegmentSource&) const = default;
};

struct Segment {
  std::vector<double> values;
  Quality label = Quality::Bad;
  SegmentSource source;
};

// Digital IIR filter in transfer-function form, a[0] == 1.
struct FilterCoefficients {
  std::vector<double> b;
  std::vector<double> a;
  std::vector<std::complex<double>> poles;

  std::size_t order() const { return a.empty() ? 0 : a.size() - 1; }
  bool is_stable() const;
  // H(e^{jw}) evaluated directly from the polynomial coefficients.
  std::complex<double> response(double omega) const;
};

/// Butterworth bandpass via the analog lowpass prototype, lowpass-to-bandpass
/// transform and bilinear transform with both band edges prewarped. A
/// prototype of order n yields a digital filter of order 2n.
FilterCoefficients design_bandpass(double fs, double low, double high, int order);

/// Causal direct form II transposed filtering with zero initial state.
std::vector<double> filter_signal(const FilterCoefficients& coeffs, std::span<const double> x);

/// Population z-score. Throws DegenerateSignal when std < 1e-8.
std::vector<double> zscore(std::span<const double> x);

std::vector<Segment> segment_record(const SignalRecord& rec,
                                    double seconds = kDefaultSegmentSeconds,
                                    double good_threshold = kDefaultGoodThreshold);

// Central differences scaled by fs with one-sided differences at both ends.
std::vector<double> first_derivative(std::span<const double> x, double fs);
std::vector<double> second_derivative(std::span<const double> x, double fs);

/// Biased autocorrelation normalized by the zero-lag energy, all N lags.
/// Computed through a zero-padded FFT.
std::vector<double> autocorrelation(std::span<const double> x);


// ---------------------------------------------------------------------------
// Channel stacks

enum class ChannelKind { Clean = 0, Fdp = 1, Sdp = 2, Atc = 3 };

std::string_view channel_name(ChannelKind kind);  // "ppg", "fdp", "sdp", "atc"
ChannelKind parse_channel(std::string_view name);

/// Canonically ordered, duplicate-free set of channel kinds.
class ChannelSet {
 public:
  ChannelSet() = default;
  /// Throws InvalidConfig on duplicates or an empty list.
  explicit ChannelSet(std::span<const ChannelKind> kinds);
  static ChannelSet parse(std::string_view comma_list);
  static std::vector<ChannelSet> all_nonempty();
  /// The eleven ablation inputs: each single channel, then PPG combined
  /// with derived channels.
  static std::vector<ChannelSet> ablation_sets();

  const std::vector<ChannelKind>& kinds() const { return kinds_; }
  std::size_t size() const { return kinds_.size(); }
  bool contains(ChannelKind kind) const;
  std::string to_string() const;  // e.g. "ppg,fdp,sdp"
  std::string label() const;      // e.g. "PPG+FDP+SDP"

  bool operator==(const ChannelSet&) const = default;

 private:
  std::vector<ChannelKind> kinds_;
};

struct ChannelStack {
  std::vector<ChannelKind> channels;
  std::size_t length = 0;
  std::vector<double> data;  // row-major [channels.size() x length]
  Quality label = Quality::Bad;

  std::span<const double> row(std::size_t c) const {
    return std::span<const double>(data).subspan(c * length, length);
  }
};

ChannelStack build_channel_stack(const Segment& segment, const ChannelSet& kinds, double fs);

struct PreprocessConfig {
  double band_low = kDefaultBandLow;
  double band_high = kDefaultBandHigh;
  int filter_order = kDefaultFilterOrder;
  double segment_seconds = kDefaultSegmentSeconds;
  double good_threshold = kDefaultGoodThreshold;
};

struct PreparedSegment {
  SegmentSource source;
  Quality label = Quality::Bad;
  // Empty when the segment is degenerate (constant); such segments are Bad
  // and excluded from training.
  std::optional<ChannelStack> stack;
};

/// filter -> segment -> per-segment channel synthesis for one record.
std::vector<PreparedSegment> preprocess_record(const SignalRecord& rec, const ChannelSet& kinds,
                                               const PreprocessConfig& cfg = {});

}  // namespace ppgsqa
