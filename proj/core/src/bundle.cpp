#include "bundle.hpp"

#include <fstream>
#include <sstream>

#include "autov/avt.hpp"
#include "autov/error.hpp"

namespace autov::detail {

const TokenMatrix& Bundle::get(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw FormatError("bundle is missing tensor '" + std::string(name) + "'");
}

void throw_missing_meta(const char* key) {
  throw FormatError(std::string("bundle header field '") + key + "' is missing or has the wrong type");
}

void write_bundle(const std::filesystem::path& path, std::string_view kind, int version, const nlohmann::json& meta,
                  std::span<const NamedTensor> tensors) {
  nlohmann::json header;
  header["kind"] = kind;
  header["version"] = version;
  header["meta"] = meta;
  auto& manifest = header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) manifest.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  out << kBundleMagic << '\n' << header.dump() << '\n';
  for (const auto& t : tensors) write_avt(out, t.value);
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Bundle read_bundle(const std::filesystem::path& path, std::string_view kind, int version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open '" + path.string() + "'");
  const std::string where = " in '" + path.string() + "'";

  std::string magic;
  if (!std::getline(in, magic) || magic != kBundleMagic) throw FormatError("bad bundle magic" + where);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing bundle header" + where);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed bundle header" + where + ": " + e.what());
  }
  if (!header.is_object() || !header.contains("kind") || !header["kind"].is_string() ||
      header["kind"].get<std::string>() != kind) {
    throw FormatError("expected a '" + std::string(kind) + "' bundle" + where);
  }
  if (!header.contains("version") || !header["version"].is_number_integer() || header["version"].get<int>() != version) {
    throw FormatError("unsupported '" + std::string(kind) + "' version" + where + " (expected " +
                      std::to_string(version) + ")");
  }
  if (!header.contains("tensors") || !header["tensors"].is_array()) throw FormatError("missing tensor manifest" + where);

  Bundle bundle;
  bundle.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header["tensors"]) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    try {
      name = entry.at("name").get<std::string>();
      rows = entry.at("rows").get<std::size_t>();
      cols = entry.at("cols").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError("malformed tensor manifest entry" + where);
    }
    TokenMatrix m = read_avt(in);
    if (m.rows() != rows || m.cols() != cols) {
      throw FormatError("tensor '" + name + "' is " + m.shape_string() + " but the manifest says " +
                        std::to_string(rows) + "x" + std::to_string(cols) + where);
    }
    bundle.tensors.push_back({std::move(name), std::move(m)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after last tensor" + where);
  return bundle;
}

}  // namespace autov::detail
