#include "nerfsteg/container.hpp"

#include <algorithm>
#include <cstring>

namespace nerfsteg {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'N', 'R', 'S', 'G'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]);
  return v;
}

template <typename Value>
Value require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<Value>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field '" + key + "' has the wrong type");
  }
}

Tensor take(const ModelContainer& c, const std::string& name, const Shape& expected) {
  const Tensor& t = c.tensor(name);
  if (t.shape() != expected)
    throw FormatError("container: tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                      shape_str(expected));
  Tensor copy = t.detach();
  copy.set_requires_grad(true);
  return copy;
}

}  // namespace

const Tensor& ModelContainer::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("container: missing tensor '" + name + "'");
}

std::string encode_container(const ModelContainer& container) {
  json header;
  header["model_type"] = container.model_type;
  header["config"] = container.config;
  header["tensors"] = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : container.tensors) {
    const std::uint64_t len = 4 * t.numel();
    header["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"byte_offset", offset}, {"byte_len", len}});
    offset += len;
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_le(out, kContainerVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : container.tensors)
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_le(out, bits, 4);
    }
  return out;
}

ModelContainer decode_container(const std::string& bytes) {
  if (bytes.size() < 16) throw FormatError("container: file too short for the fixed header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("container: bad magic (expected NRSG)");
  const auto version = get_le(bytes, 4, 4);
  if (version != kContainerVersion) throw FormatError("container: unsupported version " + std::to_string(version));
  const auto header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) throw FormatError("container: header length exceeds file size");
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("container: malformed JSON header (") + e.what() + ")");
  }
  const std::size_t payload_start = 16 + header_len;
  const std::uint64_t payload_size = bytes.size() - payload_start;

  ModelContainer c;
  c.model_type = require<std::string>(header, "model_type", "container header");
  if (header.contains("config")) c.config = header["config"];
  const auto& entries = header.contains("tensors") ? header["tensors"] : json();
  if (!entries.is_array()) throw FormatError("container header: field 'tensors' must be an array");

  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "container tensors[" + std::to_string(i) + "]";
    const auto name = require<std::string>(entries[i], "name", where);
    const auto shape = require<Shape>(entries[i], "shape", where);
    const auto dtype = require<std::string>(entries[i], "dtype", where);
    const auto offset = require<std::uint64_t>(entries[i], "byte_offset", where);
    const auto len = require<std::uint64_t>(entries[i], "byte_len", where);
    if (dtype != "f32") throw FormatError(where + ": unsupported dtype '" + dtype + "'");
    if (len != 4 * shape_numel(shape))
      throw FormatError(where + " ('" + name + "'): byte_len " + std::to_string(len) + " inconsistent with shape " +
                        shape_str(shape));
    if (offset > payload_size || len > payload_size - offset)
      throw FormatError(where + " ('" + name + "'): extends past the payload; file truncated?");
    spans.emplace_back(offset, len);
    total += len;
    std::vector<float> data(len / 4);
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto bits = static_cast<std::uint32_t>(get_le(bytes, payload_start + offset + 4 * k, 4));
      std::memcpy(&data[k], &bits, sizeof bits);
    }
    c.tensors.emplace_back(name, Tensor(shape, std::move(data)));
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i - 1].first + spans[i - 1].second > spans[i].first)
      throw FormatError("container: tensor byte ranges overlap");
  if (total != payload_size)
    throw FormatError("container: payload is " + std::to_string(payload_size) + " bytes but tensors cover " +
                      std::to_string(total));
  return c;
}

void save_container(const std::filesystem::path& path, const ModelContainer& container) {
  write_file(path, encode_container(container));
}

ModelContainer load_container(const std::filesystem::path& path) {
  try {
    return decode_container(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ModelContainer field_container(const FieldParams& params) {
  ModelContainer c;
  c.model_type = "field";
  const auto& cfg = params.config;
  c.config = {{"pos_freqs", cfg.pos_freqs},
              {"dir_freqs", cfg.dir_freqs},
              {"depth", cfg.depth},
              {"width", cfg.width},
              {"include_raw_input", cfg.include_raw_input}};
  c.tensors = params.named_tensors();
  return c;
}

FieldParams field_from_container(const ModelContainer& c) {
  if (c.model_type != "field") throw FormatError("container holds a '" + c.model_type + "' model, expected field");
  FieldConfig cfg;
  cfg.pos_freqs = require<std::size_t>(c.config, "pos_freqs", "field config");
  cfg.dir_freqs = require<std::size_t>(c.config, "dir_freqs", "field config");
  cfg.depth = require<std::size_t>(c.config, "depth", "field config");
  cfg.width = require<std::size_t>(c.config, "width", "field config");
  cfg.include_raw_input = require<bool>(c.config, "include_raw_input", "field config");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  FieldParams params = init_field(cfg, 0);
  auto assign = [&](FieldNetwork& net, const std::string& prefix) {
    auto load = [&](DenseLayer& layer, const std::string& name) {
      layer.weight = take(c, prefix + name + ".weight", layer.weight.shape());
      layer.bias = take(c, prefix + name + ".bias", layer.bias.shape());
    };
    for (std::size_t i = 0; i < net.trunk.size(); ++i) load(net.trunk[i], "trunk." + std::to_string(i));
    load(net.sigma_head, "sigma");
    load(net.rgb_hidden, "rgb_hidden");
    load(net.rgb_out, "rgb_out");
  };
  assign(params.coarse, "coarse.");
  assign(params.fine, "fine.");
  return params;
}

void save_field(const std::filesystem::path& path, const FieldParams& params) {
  save_container(path, field_container(params));
}

FieldParams load_field(const std::filesystem::path& path) { return field_from_container(load_container(path)); }

ModelContainer extractor_container(const ExtractorParams& params, const Manifest& manifest) {
  ModelContainer c;
  c.model_type = "extractor";
  const auto& cfg = params.config;
  c.config = {{"depth", cfg.depth},
              {"height", cfg.height},
              {"width", cfg.width},
              {"conv1_channels", cfg.conv1_channels},
              {"conv1_kernel", cfg.conv1_kernel},
              {"pool_kernel", cfg.pool_kernel},
              {"pool_stride", cfg.pool_stride},
              {"conv2_channels", cfg.conv2_channels},
              {"conv2_kernel", cfg.conv2_kernel},
              {"fc_hidden", cfg.fc_hidden}};
  c.config["manifest"] = {{"depth", manifest.depth},
                          {"height", manifest.height},
                          {"width", manifest.width},
                          {"n_coarse", manifest.n_coarse},
                          {"n_fine", manifest.n_fine},
                          {"background", manifest.background},
                          {"render_seed", manifest.render_seed},
                          {"field_digest", manifest.field_digest},
                          {"created_by", manifest.created_by}};
  c.tensors = params.named_tensors();
  return c;
}

std::pair<ExtractorParams, Manifest> extractor_from_container(const ModelContainer& c) {
  if (c.model_type != "extractor")
    throw FormatError("container holds a '" + c.model_type + "' model, expected extractor");
  const std::string where = "extractor config";
  ExtractorConfig cfg;
  cfg.depth = require<std::size_t>(c.config, "depth", where);
  cfg.height = require<std::size_t>(c.config, "height", where);
  cfg.width = require<std::size_t>(c.config, "width", where);
  cfg.conv1_channels = require<std::size_t>(c.config, "conv1_channels", where);
  cfg.conv1_kernel = require<std::size_t>(c.config, "conv1_kernel", where);
  cfg.pool_kernel = require<std::size_t>(c.config, "pool_kernel", where);
  cfg.pool_stride = require<std::size_t>(c.config, "pool_stride", where);
  cfg.conv2_channels = require<std::size_t>(c.config, "conv2_channels", where);
  cfg.conv2_kernel = require<std::size_t>(c.config, "conv2_kernel", where);
  cfg.fc_hidden = require<std::size_t>(c.config, "fc_hidden", where);
  try {
    cfg.validate();
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }

  ExtractorParams p;
  p.config = cfg;
  const std::size_t k1 = cfg.conv1_kernel, k2 = cfg.conv2_kernel;
  p.conv1_w = take(c, "conv1.weight", {cfg.conv1_channels, 3, k1, k1});
  p.conv1_b = take(c, "conv1.bias", {cfg.conv1_channels});
  p.conv2_w = take(c, "conv2.weight", {cfg.conv2_channels, cfg.conv1_channels, k2, k2});
  p.conv2_b = take(c, "conv2.bias", {cfg.conv2_channels});
  p.fc1_w = take(c, "fc1.weight", {cfg.fc_hidden, cfg.flat_features()});
  p.fc1_b = take(c, "fc1.bias", {cfg.fc_hidden});
  p.fc2_w = take(c, "fc2.weight", {cfg.outputs(), cfg.fc_hidden});
  p.fc2_b = take(c, "fc2.bias", {cfg.outputs()});

  const json manifest_json = c.config.contains("manifest") ? c.config["manifest"] : json();
  const std::string mw = "extractor manifest";
  Manifest m;
  m.depth = require<std::size_t>(manifest_json, "depth", mw);
  m.height = require<std::size_t>(manifest_json, "height", mw);
  m.width = require<std::size_t>(manifest_json, "width", mw);
  m.n_coarse = require<std::size_t>(manifest_json, "n_coarse", mw);
  m.n_fine = require<std::size_t>(manifest_json, "n_fine", mw);
  m.background = require<Color>(manifest_json, "background", mw);
  m.render_seed = require<std::uint64_t>(manifest_json, "render_seed", mw);
  m.field_digest = require<std::string>(manifest_json, "field_digest", mw);
  if (manifest_json.contains("created_by") && manifest_json["created_by"].is_string())
    m.created_by = manifest_json["created_by"].get<std::string>();
  if (m.depth != cfg.depth || m.height != cfg.height || m.width != cfg.width)
    throw FormatError("extractor manifest dimensions disagree with the extractor config");
  return {std::move(p), std::move(m)};
}

void save_extractor(const std::filesystem::path& path, const ExtractorParams& params, const Manifest& manifest) {
  save_container(path, extractor_container(params, manifest));
}

std::pair<ExtractorParams, Manifest> load_extractor(const std::filesystem::path& path) {
  return extractor_from_container(load_container(path));
}

StegoBundle load_bundle(const std::filesystem::path& field_path, const std::filesystem::path& extractor_path) {
  StegoBundle bundle;
  bundle.field = load_field(field_path);
  auto [extractor, manifest] = load_extractor(extractor_path);
  if (manifest.field_digest != field_digest(bundle.field))
    throw FormatError(extractor_path.string() + ": extractor was trained against a different field model");
  bundle.extractor = std::move(extractor);
  bundle.manifest = std::move(manifest);
  return bundle;
}

std::string encode_key(const ViewKey& key) {
  key.validate();
  nlohmann::ordered_json doc;
  doc["theta_deg"] = key.theta_deg;
  doc["phi_deg"] = key.phi_deg;
  doc["radius"] = key.radius;
  doc["focal_px"] = key.focal_px;
  doc["width"] = key.width;
  doc["height"] = key.height;
  doc["near"] = key.near;
  doc["far"] = key.far;
  return doc.dump(2) + "\n";
}

ViewKey decode_key(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("key file: malformed JSON (") + e.what() + ")");
  }
  const std::string where = "key file";
  ViewKey key;
  key.theta_deg = require<double>(doc, "theta_deg", where);
  key.phi_deg = require<double>(doc, "phi_deg", where);
  key.radius = require<double>(doc, "radius", where);
  key.focal_px = require<double>(doc, "focal_px", where);
  key.width = require<std::size_t>(doc, "width", where);
  key.height = require<std::size_t>(doc, "height", where);
  key.near = require<double>(doc, "near", where);
  key.far = require<double>(doc, "far", where);
  key.validate();
  return key;
}

void save_key(const std::filesystem::path& path, const ViewKey& key) { write_file(path, encode_key(key)); }

ViewKey load_key(const std::filesystem::path& path) {
  try {
    return decode_key(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace nerfsteg
