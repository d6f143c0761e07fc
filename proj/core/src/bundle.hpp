#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autov/matrix.hpp"

namespace autov::detail {

// Single-file container: a magic line, one JSON header line describing the
// payload kind, metadata and tensor manifest, then one AVT1 blob per tensor
// in manifest order.
inline constexpr std::string_view kBundleMagic = "AVTBUNDLE 1";

struct NamedTensor {
  std::string name;
  TokenMatrix value;
};

struct Bundle {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;

  const TokenMatrix& get(std::string_view name) const;
};

void write_bundle(const std::filesystem::path& path, std::string_view kind, int version, const nlohmann::json& meta,
                  std::span<const NamedTensor> tensors);
Bundle read_bundle(const std::filesystem::path& path, std::string_view kind, int version);

[[noreturn]] void throw_missing_meta(const char* key);

// Reads a required metadata field, raising FormatError when absent or mistyped.
template <typename T>
T meta_field(const nlohmann::json& meta, const char* key) {
  if (!meta.contains(key)) throw_missing_meta(key);
  try {
    return meta.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw_missing_meta(key);
  }
}

}  // namespace autov::detail
