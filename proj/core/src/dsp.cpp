#include "ppgsqa/dsp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

namespace {

using cplx = std::complex<double>;

// Coefficients of prod(z - r_i), highest power first.
std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> c{cplx(1.0, 0.0)};
  for (const cplx& r : roots) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  return c;
}

}  // namespace

void SignalRecord::validate() const {
  if (!(fs > 0.0)) fail(ErrorKind::InvalidConfig, "sampling rate must be positive");
  if (quality_mask.size() != samples.size()) {
    fail(ErrorKind::ShapeMismatch, "quality mask length " + std::to_string(quality_mask.size()) +
                                       " != sample count " + std::to_string(samples.size()));
  }
}

bool FilterCoefficients::is_stable() const {
  return std::all_of(poles.begin(), poles.end(), [](const cplx& p) { return std::abs(p) < 1.0; });
}

cplx FilterCoefficients::response(double omega) const {
  const cplx step = std::polar(1.0, -omega);
  cplx num(0.0, 0.0), den(0.0, 0.0), zk(1.0, 0.0);
  for (std::size_t k = 0; k < std::max(b.size(), a.size()); ++k) {
    if (k < b.size()) num += b[k] * zk;
    if (k < a.size()) den += a[k] * zk;
    zk *= step;
  }
  return num / den;
}

FilterCoefficients design_bandpass(double fs, double low, double high, int order) {
  if (!(fs > 0.0) || !(low > 0.0) || !(low < high) || !(high < fs / 2.0)) {
    fail(ErrorKind::InvalidBand, "band must satisfy 0 < low < high < fs/2");
  }
  if (order < 1 || order > 12) fail(ErrorKind::InvalidBand, "unsupported prototype order");

  const double fs2 = 2.0 * fs;
  const double w_low = fs2 * std::tan(std::numbers::pi * low / fs);
  const double w_high = fs2 * std::tan(std::numbers::pi * high / fs);
  const double bw = w_high - w_low;
  const double w0 = std::sqrt(w_low * w_high);

  // Analog lowpass prototype, unit cutoff.
  std::vector<cplx> proto;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    proto.push_back(std::polar(1.0, theta));
  }

  // Lowpass -> bandpass: each pole splits into a pair, n zeros land at s = 0.
  std::vector<cplx> analog_poles;
  for (const cplx& p : proto) {
    const cplx half = p * bw / 2.0;
    const cplx disc = std::sqrt(half * half - w0 * w0);
    analog_poles.push_back(half + disc);
    analog_poles.push_back(half - disc);
  }
  const double analog_gain = std::pow(bw, order);

  // Bilinear transform. Zeros at s = 0 map to z = 1; the n zeros at infinity
  // map to z = -1.
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  cplx den_factor(1.0, 0.0);
  for (const cplx& p : analog_poles) {
    poles.push_back((fs2 + p) / (fs2 - p));
    den_factor *= (fs2 - p);
  }
  for (int k = 0; k < order; ++k) zeros.emplace_back(1.0, 0.0);
  for (int k = 0; k < order; ++k) zeros.emplace_back(-1.0, 0.0);
  const double gain = analog_gain * (std::pow(fs2, order) / den_factor).real();

  FilterCoefficients out;
  const auto num = poly_from_roots(zeros);
  const auto den = poly_from_roots(poles);
  for (const cplx& c : num) out.b.push_back(gain * c.real());
  for (const cplx& c : den) out.a.push_back(c.real());
  out.poles = std::move(poles);

  if (!out.is_stable()) fail(ErrorKind::InvalidBand, "design produced an unstable filter");
  for (double v : out.b) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidBand, "non-finite coefficient");
  }
  return out;
}

std::vector<double> filter_signal(const FilterCoefficients& coeffs, std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::EmptyInput, "filter_signal on empty input");
  const std::size_t n = std::max(coeffs.a.size(), coeffs.b.size());
  std::vector<double> b(coeffs.b), a(coeffs.a);
  b.resize(n, 0.0);
  a.resize(n, 0.0);
  const double a0 = a[0];
  for (auto& v : b) v /= a0;
  for (auto& v : a) v /= a0;

  std::vector<double> state(n, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double yi = b[0] * x[i] + state[0];
    for (std::size_t k = 1; k < n; ++k) {
      state[k - 1] = b[k] * x[i] - a[k] * yi + (k < n - 1 ? state[k] : 0.0);
    }
    if (!std::isfinite(yi)) fail(ErrorKind::NonFinite, "filter output at sample " + std::to_string(i));
    y[i] = yi;
  }
  return y;
}

std::vector<double> zscore(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorKind::EmptyInput, "zscore needs at least two samples");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd >= 1e-8)) fail(ErrorKind::DegenerateSignal, "standard deviation below 1e-8");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

std::vector<Segment> segment_record(const SignalRecord& rec, double seconds, double good_threshold) {
  rec.validate();
  if (!(seconds > 0.0)) fail(ErrorKind::InvalidConfig, "segment length must be positive");
  if (!(good_threshold >= 0.0 && good_threshold < 1.0)) {
    fail(ErrorKind::InvalidConfig, "good threshold must lie in [0, 1)");
  }
  const auto window = static_cast<std::size_t>(std::lround(seconds * rec.fs));
  if (window == 0 || rec.samples.size() < window) {
    fail(ErrorKind::RecordTooShort, "record '" + rec.subject_id + "' has " +
                                        std::to_string(rec.samples.size()) + " samples, need " +
                                        std::to_string(window));
  }

  std::vector<Segment> segments;
  for (std::size_t start = 0; start + window <= rec.samples.size(); start += window) {
    Segment seg;
    seg.values.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(start),
                      rec.samples.begin() + static_cast<std::ptrdiff_t>(start + window));
    std::size_t good = 0;
    for (std::size_t i = start; i < start + window; ++i) good += rec.quality_mask[i] ? 1 : 0;
    const double fraction = static_cast<double>(good) / static_cast<double>(window);
    seg.label = fraction > good_threshold ? Quality::Good : Quality::Bad;
    seg.source = {rec.subject_id, start};
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<double> first_derivative(std::span<const double> x, double fs) {
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorKind::EmptyInput, "derivative needs at least three samples");
  std::vector<double> y(n);
  y[0] = (x[1] - x[0]) * fs;
  for (std::size_t i = 1; i + 1 < n; ++i) y[i] = (x[i + 1] - x[i - 1]) * fs / 2.0;
  y[n - 1] = (x[n - 1] - x[n - 2]) * fs;
  return y;
}

std::vector<double> second_derivative(std::span<const double> x, double fs) {
  const auto d1 = first_derivative(x, fs);
  return first_derivative(d1, fs);
}

std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorKind::EmptyInput, "autocorrelation needs at least two samples");
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (!(energy >= 1e-12)) fail(ErrorKind::DegenerateSignal, "zero-energy segment");

  // Zero-padding to >= 2n makes the circular correlation linear.
  const std::size_t m = std::bit_ceil(2 * n);
  const int mi = static_cast<int>(m);
  std::vector<double> real(m, 0.0);
  std::vector<fftw_complex> spec(m / 2 + 1);
  std::copy(x.begin(), x.end(), real.begin());
  fftw_plan fwd = fftw_plan_dft_r2c_1d(mi, real.data(), spec.data(), FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_1d(mi, spec.data(), real.data(), FFTW_ESTIMATE);
  fftw_execute(fwd);
  for (auto& c : spec) {
    c[0] = c[0] * c[0] + c[1] * c[1];
    c[1] = 0.0;
  }
  fftw_execute(inv);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);

  const double zero_lag = real[0];
  std::vector<double> r(n);
  r[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) r[k] = std::clamp(real[k] / zero_lag, -1.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------

std::string_view channel_name(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Clean: return "ppg";
    case ChannelKind::Fdp: return "fdp";
    case ChannelKind::Sdp: return "sdp";
    case ChannelKind::Atc: return "atc";
  }
  return "?";
}

ChannelKind parse_channel(std::string_view name) {
  if (name == "ppg" || name == "clean") return ChannelKind::Clean;
  if (name == "fdp") return ChannelKind::Fdp;
  if (name == "sdp") return ChannelKind::Sdp;
  if (name == "atc") return ChannelKind::Atc;
  fail(ErrorKind::InvalidConfig, "unknown channel '" + std::string(name) + "'");
}

ChannelSet::ChannelSet(std::span<const ChannelKind> kinds) {
  if (kinds.empty()) fail(ErrorKind::InvalidConfig, "channel set is empty");
  std::array<bool, 4> seen{};
  for (ChannelKind k : kinds) {
    auto& flag = seen[static_cast<std::size_t>(k)];
    if (flag) fail(ErrorKind::InvalidConfig, "duplicate channel '" + std::string(channel_name(k)) + "'");
    flag = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) kinds_.push_back(static_cast<ChannelKind>(i));
  }
}

ChannelSet ChannelSet::parse(std::string_view comma_list) {
  std::vector<ChannelKind> kinds;
  std::size_t pos = 0;
  while (pos <= comma_list.size()) {
    const auto next = comma_list.find(',', pos);
    const auto token = comma_list.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (token.empty()) fail(ErrorKind::InvalidConfig, "empty channel name in '" + std::string(comma_list) + "'");
    kinds.push_back(parse_channel(token));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return ChannelSet(kinds);
}

std::vector<ChannelSet> ChannelSet::all_nonempty() {
  std::vector<ChannelSet> out;
  for (unsigned mask = 1; mask < 16; ++mask) {
    std::vector<ChannelKind> kinds;
    for (unsigned bit = 0; bit < 4; ++bit) {
      if (mask & (1u << bit)) kinds.push_back(static_cast<ChannelKind>(bit));
    }
    out.emplace_back(kinds);
  }
  return out;
}

std::vector<ChannelSet> ChannelSet::ablation_sets() {
  std::vector<ChannelSet> out;
  for (const char* spec : {"ppg", "fdp", "sdp", "atc", "ppg,fdp", "ppg,sdp", "ppg,atc", "ppg,fdp,sdp", "ppg,fdp,atc",
                           "ppg,sdp,atc", "ppg,fdp,sdp,atc"}) {
    out.push_back(parse(spec));
  }
  return out;
}

bool ChannelSet::contains(ChannelKind kind) const {
  return std::find(kinds_.begin(), kinds_.end(), kind) != kinds_.end();
}

std::string ChannelSet::to_string() const {
  std::string s;
  for (ChannelKind k : kinds_) {
    if (!s.empty()) s += ',';
    s += channel_name(k);
  }
  return s;
}

std::string ChannelSet::label() const {
  std::string s;
  for (ChannelKind k : kinds_) {
    if (!s.empty()) s += '+';
    for (char c : channel_name(k)) s += static_cast<char>(c - 'a' + 'A');
  }
  return s;
}

ChannelStack build_channel_stack(const Segment& segment, const ChannelSet& kinds, double fs) {
  if (kinds.size() == 0) fail(ErrorKind::InvalidConfig, "channel set is empty");
  const auto clean = zscore(segment.values);

  ChannelStack stack;
  stack.channels = kinds.kinds();
  stack.length = clean.size();
  stack.label = segment.label;
  stack.data.reserve(kinds.size() * clean.size());
  for (ChannelKind kind : kinds.kinds()) {
    std::vector<double> row;
    switch (kind) {
      case ChannelKind::Clean: row = clean; break;
      case ChannelKind::Fdp: row = zscore(first_derivative(clean, fs)); break;
      case ChannelKind::Sdp: row = zscore(second_derivative(clean, fs)); break;
      case ChannelKind::Atc: row = autocorrelation(clean); break;
    }
    stack.data.insert(stack.data.end(), row.begin(), row.end());
  }
  return stack;
}

std::vector<PreparedSegment> preprocess_record(const SignalRecord& rec, const ChannelSet& kinds,
                                               const PreprocessConfig& cfg) {
  rec.validate();
  const auto coeffs = design_bandpass(rec.fs, cfg.band_low, cfg.band_high, cfg.filter_order);
  SignalRecord filtered = rec;
  filtered.samples = filter_signal(coeffs, rec.samples);

  std::vector<PreparedSegment> out;
  for (const Segment& seg : segment_record(filtered, cfg.segment_seconds, cfg.good_threshold)) {
    PreparedSegment prepared;
    prepared.source = seg.source;
    prepared.label = seg.label;
    try {
      prepared.stack = build_channel_stack(seg, kinds, rec.fs);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateSignal) throw;
      prepared.label = Quality::Bad;
    }
    out.push_back(std::move(prepared));
  }
  return out;
}

}  // namespace ppgsqa
