#include "ppgsqa/accounting.hpp"

#include <cstdio>

#include "json.hpp"
#include "ppgsqa/errors.hpp"

namespace ppgsqa {

std::string to_string(MacConvention c) {
  switch (c) {
    case MacConvention::Standard: return "standard";
    case MacConvention::ConvLinearOnly: return "conv-linear-only";
  }
  return "?";
}

MacConvention parse_mac_convention(const std::string& name) {
  if (name == "standard") return MacConvention::Standard;
  if (name == "conv-linear-only") return MacConvention::ConvLinearOnly;
  fail(ErrorKind::InvalidConfig, "unknown MAC convention '" + name + "'");
}

namespace {

class CostBuilder {
 public:
  CostBuilder(CostReport& report, MacConvention convention) : report_(report), convention_(convention) {}

  void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t s, std::size_t p) {
    const std::size_t lout = pooled_length(shape_.length, k, s, p);
    shape_ = {1, cout, lout};
    push(name, "Conv1d", cout * cin * k, lout * cout * cin * k, false);
  }
  void batchnorm(const std::string& name) {
    push(name, "BatchNorm1d", 2 * shape_.channels, shape_.numel(), true);
  }
  void elementwise(const std::string& name, const std::string& kind) { push(name, kind, 0, shape_.numel(), true); }
  void maxpool(const std::string& name, std::size_t k, std::size_t s, std::size_t p) {
    shape_.length = pooled_length(shape_.length, k, s, p);
    push(name, "MaxPool1d", 0, shape_.numel(), true);
  }
  void avgpool(const std::string& name) {
    shape_.length = 1;
    push(name, "AdaptiveAvgPool1d", 0, shape_.numel(), true);
  }
  void linear(const std::string& name, std::size_t in, std::size_t out, bool bias) {
    shape_ = {1, out, 1};
    push(name, "Linear", in * out + (bias ? out : 0), in * out, false);
  }

  Shape3 shape() const { return shape_; }
  void set_shape(Shape3 s) { shape_ = s; }

 private:
  void push(const std::string& name, const std::string& kind, std::size_t params, std::size_t macs, bool elementwise) {
    CostRow row;
    row.name = name;
    row.kind = kind;
    row.params = params;
    row.macs = (elementwise && convention_ == MacConvention::ConvLinearOnly) ? 0 : macs;
    row.output_shape = shape_;
    report_.total_params += row.params;
    report_.total_macs += row.macs;
    report_.rows.push_back(std::move(row));
  }

  CostReport& report_;
  MacConvention convention_;
  Shape3 shape_{};
};

}  // namespace

CostReport emit_cost_report(const ModelConfig& config, std::size_t input_len, MacConvention convention) {
  config.validate();
  CostReport report;
  report.config = config;
  report.input_len = input_len;
  report.convention = convention;

  CostBuilder cb(report, convention);
  cb.set_shape({1, config.in_channels, input_len});
  cb.conv("stem.conv", config.in_channels, config.stem_filters, config.stem_kernel, config.stem_stride,
          config.stem_padding);
  cb.batchnorm("stem.bn");
  cb.elementwise("stem.relu", "ReLU");
  cb.maxpool("stem.maxpool", config.pool_kernel, config.pool_stride, config.pool_padding);

  std::size_t channels = config.stem_filters;
  const std::size_t pad = config.block_kernel / 2;
  for (std::size_t s = 0; s < config.stage_filters.size(); ++s) {
    const std::size_t width = config.stage_filters[s];
    for (std::size_t i = 0; i < config.blocks_per_stage[s]; ++i) {
      const std::string p = "layer" + std::to_string(s + 1) + ".block" + std::to_string(i) + ".";
      const std::size_t stride = i == 0 ? config.stage_stride(s) : 1;
      const Shape3 block_in = cb.shape();

      cb.conv(p + "conv1", channels, width, config.block_kernel, stride, pad);
      cb.batchnorm(p + "bn1");
      cb.elementwise(p + "relu1", "ReLU");
      cb.conv(p + "conv2", width, width, config.block_kernel, 1, pad);
      cb.batchnorm(p + "bn2");
      if (config.use_se) {
        const Shape3 feature = cb.shape();
        const std::size_t hidden = width / config.reduction_ratio;
        cb.avgpool(p + "se.pool");
        cb.linear(p + "se.fc1", width, hidden, false);
        cb.elementwise(p + "se.relu", "ReLU");
        cb.linear(p + "se.fc2", hidden, width, false);
        cb.elementwise(p + "se.sigmoid", "Sigmoid");
        cb.set_shape(feature);
        cb.elementwise(p + "se.scale", "SEScale");
      }
      if (stride != 1 || channels != width) {
        const Shape3 branch = cb.shape();
        cb.set_shape(block_in);
        cb.conv(p + "downsample.conv", channels, width, 1, stride, 0);
        cb.batchnorm(p + "downsample.bn");
        cb.set_shape(branch);
      }
      cb.elementwise(p + "add", "Add");
      cb.elementwise(p + "relu2", "ReLU");
      channels = width;
    }
  }
  cb.avgpool("avgpool");
  cb.linear("fc", channels, config.num_classes, true);
  return report;
}

std::uint64_t count_params(const ModelConfig& config) { return emit_cost_report(config, config.segment_len).total_params; }

std::uint64_t count_macs(const ModelConfig& config, std::size_t input_len, MacConvention convention) {
  return emit_cost_report(config, input_len, convention).total_macs;
}

std::string CostReport::to_table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %-18s %10s %12s  %s\n", "layer", "kind", "params", "macs", "output");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-32s %-18s %10llu %12llu  [%zu,%zu]\n", r.name.c_str(), r.kind.c_str(),
                  static_cast<unsigned long long>(r.params), static_cast<unsigned long long>(r.macs),
                  r.output_shape.channels, r.output_shape.length);
    out += line;
  }
  std::snprintf(line, sizeof line, "total: %llu params (%.2fk), %llu MACs (%.2f MMAC), convention=%s\n",
                static_cast<unsigned long long>(total_params), params_k(),
                static_cast<unsigned long long>(total_macs), mmac(), ppgsqa::to_string(convention).c_str());
  out += line;
  return out;
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["in_channels"] = config.in_channels;
  j["use_se"] = config.use_se;
  j["input_len"] = input_len;
  j["convention"] = ppgsqa::to_string(convention);
  auto rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"name", r.name},
                         {"kind", r.kind},
                         {"params", r.params},
                         {"macs", r.macs},
                         {"output_shape", {r.output_shape.channels, r.output_shape.length}}});
  }
  j["rows"] = std::move(rows_json);
  j["total_params"] = total_params;
  j["total_macs"] = total_macs;
  j["params_k"] = params_k();
  j["mmac"] = mmac();
  return j.dump(2) + "\n";
}

}  // namespace ppgsqa
