#pragma once

// Single-file model container and key files.
//
// Layout: "NRSG" | u32 LE version | u64 LE header length | UTF-8 JSON header
// | payload of little-endian f32 values. The header lists every tensor as
// {name, shape, dtype, byte_offset, byte_len} relative to the payload start.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nerfsteg/image_io.hpp"
#include "nerfsteg/stego_pipeline.hpp"

namespace nerfsteg {

inline constexpr std::uint32_t kContainerVersion = 1;

struct ModelContainer {
  std::string model_type;  // "field" or "extractor"
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

std::string encode_container(const ModelContainer& container);
/// Throws FormatError on bad magic, unsupported version, inconsistent
/// header entries or a truncated payload. Unknown header keys are ignored.
ModelContainer decode_container(const std::string& bytes);

void save_container(const std::filesystem::path& path, const ModelContainer& container);
ModelContainer load_container(const std::filesystem::path& path);

ModelContainer field_container(const FieldParams& params);
FieldParams field_from_container(const ModelContainer& container);
void save_field(const std::filesystem::path& path, const FieldParams& params);
FieldParams load_field(const std::filesystem::path& path);

/// Extractor weights plus the bundle manifest in the config object.
ModelContainer extractor_container(const ExtractorParams& params, const Manifest& manifest);
std::pair<ExtractorParams, Manifest> extractor_from_container(const ModelContainer& container);
void save_extractor(const std::filesystem::path& path, const ExtractorParams& params, const Manifest& manifest);
std::pair<ExtractorParams, Manifest> load_extractor(const std::filesystem::path& path);

/// Loads a field and an extractor and checks that the extractor was trained
/// against that field.
StegoBundle load_bundle(const std::filesystem::path& field_path, const std::filesystem::path& extractor_path);

std::string encode_key(const ViewKey& key);
ViewKey decode_key(const std::string& text);
void save_key(const std::filesystem::path& path, const ViewKey& key);
ViewKey load_key(const std::filesystem::path& path);

}  // namespace nerfsteg
