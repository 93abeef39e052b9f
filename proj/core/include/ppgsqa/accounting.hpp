#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppgsqa/model.hpp"

namespace ppgsqa {

/// How multiply-accumulates are attributed to layers.
enum class MacConvention {
  /// Conv1d = L_out*C_out*C_in*K, Linear = fan_in*fan_out, and every
  /// BN/ReLU/pool/sigmoid/add/scale op costs 1 per output element.
  Standard,
  /// Only convolution and linear layers are counted.
  ConvLinearOnly,
};

std::string to_string(MacConvention c);
MacConvention parse_mac_convention(const std::string& name);

struct CostRow {
  std::string name;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  Shape3 output_shape{};  // batch = 1
};

struct CostReport {
  ModelConfig config;
  std::size_t input_len = 0;
  MacConvention convention = MacConvention::Standard;
  std::vector<CostRow> rows;  // graph topology order
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;

  double params_k() const { return static_cast<double>(total_params) / 1e3; }
  double mmac() const { return static_cast<double>(total_macs) / 1e6; }
  // 2 FLOPs per MAC.
  double mflops() const { return 2.0 * static_cast<double>(total_macs) / 1e6; }

  std::string to_table() const;
  std::string to_json() const;
};

/// Static cost analysis of a configuration, batch of one. Dropout rows are
/// omitted (identity at inference).
CostReport emit_cost_report(const ModelConfig& config, std::size_t input_len,
                            MacConvention convention = MacConvention::Standard);

std::uint64_t count_params(const ModelConfig& config);
std::uint64_t count_macs(const ModelConfig& config, std::size_t input_len,
                         MacConvention convention = MacConvention::Standard);

}  // namespace ppgsqa
