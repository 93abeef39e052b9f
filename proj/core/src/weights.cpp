#include <bit>
#include <charconv>
#include <cstring>

#include "json.hpp"
#include "ppgsqa/data_io.hpp"
#include "ppgsqa/errors.hpp"

namespace ppgsqa {

namespace {

constexpr std::string_view kMagic = "PPGSQA-WEIGHTS";

using ojson = nlohmann::ordered_json;

ojson config_to_json(const ModelConfig& c) {
  ojson j;
  j["in_channels"] = c.in_channels;
  j["use_se"] = c.use_se;
  j["reduction_ratio"] = c.reduction_ratio;
  j["stem_filters"] = c.stem_filters;
  j["stage_filters"] = c.stage_filters;
  j["blocks_per_stage"] = c.blocks_per_stage;
  j["dropout_p"] = c.dropout_p;
  j["num_classes"] = c.num_classes;
  j["segment_len"] = c.segment_len;
  j["stem_kernel"] = c.stem_kernel;
  j["stem_stride"] = c.stem_stride;
  j["stem_padding"] = c.stem_padding;
  j["pool_kernel"] = c.pool_kernel;
  j["pool_stride"] = c.pool_stride;
  j["pool_padding"] = c.pool_padding;
  j["block_kernel"] = c.block_kernel;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.use_se = j.at("use_se").get<bool>();
  c.reduction_ratio = j.at("reduction_ratio").get<std::size_t>();
  c.stem_filters = j.at("stem_filters").get<std::size_t>();
  c.stage_filters = j.at("stage_filters").get<std::vector<std::size_t>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<std::size_t>>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.segment_len = j.at("segment_len").get<std::size_t>();
  c.stem_kernel = j.at("stem_kernel").get<std::size_t>();
  c.stem_stride = j.at("stem_stride").get<std::size_t>();
  c.stem_padding = j.at("stem_padding").get<std::size_t>();
  c.pool_kernel = j.at("pool_kernel").get<std::size_t>();
  c.pool_stride = j.at("pool_stride").get<std::size_t>();
  c.pool_padding = j.at("pool_padding").get<std::size_t>();
  c.block_kernel = j.at("block_kernel").get<std::size_t>();
  return c;
}

void append_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

template <typename Entries>
ojson layout_json(const Entries& entries) {
  auto arr = ojson::array();
  for (const auto& e : entries) arr.push_back({{"name", e.name}, {"shape", e.shape}});
  return arr;
}

template <typename Entries>
void check_layout(const nlohmann::json& listed, const Entries& expected, const std::string& what) {
  if (listed.size() != expected.size()) {
    fail(ErrorKind::ShapeMismatch, "header lists " + std::to_string(listed.size()) + " " + what + ", config implies " +
                                       std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto name = listed[i].at("name").template get<std::string>();
    const auto shape = listed[i].at("shape").template get<ParamShape>();
    if (name != expected[i].name || shape != expected[i].shape) {
      fail(ErrorKind::ShapeMismatch, what + " '" + name + "' " + shape_to_string(shape) + " does not match config '" +
                                         expected[i].name + "' " + shape_to_string(expected[i].shape));
    }
  }
}

}  // namespace

std::string serialize_weights(const Model<float>& model, const ChannelSet& channels, std::uint64_t seed) {
  if (channels.size() != model.config().in_channels) {
    fail(ErrorKind::ShapeMismatch, "channel list does not match the model input width");
  }
  ojson header;
  header["format_version"] = kWeightFormatVersion;
  header["model_config"] = config_to_json(model.config());
  auto ch = ojson::array();
  for (ChannelKind k : channels.kinds()) ch.push_back(std::string(channel_name(k)));
  header["channels"] = std::move(ch);
  header["seed"] = seed;
  header["byte_order"] = "little";
  header["scalar_width"] = 32;
  header["parameters"] = layout_json(model.store().params());
  header["buffers"] = layout_json(model.store().buffers());
  const std::string header_text = header.dump();

  std::string out;
  out += kMagic;
  out += "\n" + std::to_string(header_text.size()) + "\n" + header_text;
  out.reserve(out.size() + 4 * (model.store().total_params() + model.store().total_buffer_values()));
  for (const auto& p : model.store().params()) {
    for (float v : p.value) append_f32_le(out, v);
  }
  for (const auto& b : model.store().buffers()) {
    for (float v : b.value) append_f32_le(out, v);
  }
  return out;
}

void save_weights(const Model<float>& model, const ChannelSet& channels, std::uint64_t seed, const fs::path& path) {
  write_file(path, serialize_weights(model, channels, seed));
}

LoadedWeights parse_weights(const std::string& bytes) {
  const auto first_nl = bytes.find('\n');
  if (first_nl == std::string::npos || std::string_view(bytes).substr(0, first_nl) != kMagic) {
    fail(ErrorKind::MalformedFile, "not a weight file (bad magic)");
  }
  const auto second_nl = bytes.find('\n', first_nl + 1);
  if (second_nl == std::string::npos) fail(ErrorKind::TruncatedBody, "missing header length");
  std::size_t header_len = 0;
  const char* len_begin = bytes.data() + first_nl + 1;
  const char* len_end = bytes.data() + second_nl;
  const auto [ptr, ec] = std::from_chars(len_begin, len_end, header_len);
  if (ec != std::errc() || ptr != len_end) fail(ErrorKind::MalformedFile, "bad header length");
  const std::size_t body_start = second_nl + 1 + header_len;
  if (body_start > bytes.size()) fail(ErrorKind::TruncatedBody, "header extends past end of file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(second_nl + 1, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedFile, std::string("weight header: ") + e.what());
  }

  try {
    if (header.at("format_version").get<int>() != kWeightFormatVersion) {
      fail(ErrorKind::VersionMismatch, "weight format version " + header.at("format_version").dump() +
                                           ", expected " + std::to_string(kWeightFormatVersion));
    }
    if (header.at("byte_order").get<std::string>() != "little" || header.at("scalar_width").get<int>() != 32) {
      fail(ErrorKind::VersionMismatch, "only little-endian float32 bodies are supported");
    }
    WeightFile meta;
    meta.config = config_from_json(header.at("model_config"));
    std::vector<ChannelKind> kinds;
    for (const auto& c : header.at("channels")) kinds.push_back(parse_channel(c.get<std::string>()));
    meta.channels = ChannelSet(kinds);
    meta.seed = header.at("seed").get<std::uint64_t>();
    if (meta.channels.size() != meta.config.in_channels) {
      fail(ErrorKind::ShapeMismatch, "header lists " + std::to_string(meta.channels.size()) +
                                         " channels but in_channels=" + std::to_string(meta.config.in_channels));
    }

    Model<float> model(meta.config);
    check_layout(header.at("parameters"), model.store().params(), "parameter");
    check_layout(header.at("buffers"), model.store().buffers(), "buffer");

    const std::size_t expected = 4 * (model.store().total_params() + model.store().total_buffer_values());
    const std::size_t body = bytes.size() - body_start;
    if (body < expected) {
      fail(ErrorKind::TruncatedBody, "body has " + std::to_string(body) + " bytes, expected " + std::to_string(expected));
    }
    if (body > expected) fail(ErrorKind::MalformedFile, std::to_string(body - expected) + " trailing bytes");

    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + body_start);
    for (auto& param : model.store().params()) {
      for (float& v : param.value) {
        v = read_f32_le(p);
        p += 4;
      }
    }
    for (auto& buf : model.store().buffers()) {
      for (float& v : buf.value) {
        v = read_f32_le(p);
        p += 4;
      }
    }
    return LoadedWeights{std::move(model), std::move(meta)};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedFile, std::string("weight header: ") + e.what());
  }
}

LoadedWeights load_weights(const fs::path& path) { return parse_weights(read_file(path)); }

}  // namespace ppgsqa
