#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autov/bench.hpp"

namespace autov::cli {

struct Settings {
  BenchConfig bench;  // carries every module config
  std::uint64_t seed = 0;
  std::vector<double> ttest_reference;
  std::optional<double> ttest_stated_mean;

  // Copies the global seed into the module configs.
  void apply_seed();
  void validate() const;
};

struct Key {
  std::string name;  // "section.key", or a bare global key
  std::string help;
  std::function<std::string(const Settings&)> get;
  std::function<void(Settings&, std::string_view)> set;
};

const std::vector<Key>& keys();
const Key* find_key(std::string_view name);

// Sets `name` from its textual value; unknown keys and malformed values raise UsageError.
void set_key(Settings& s, std::string_view name, std::string_view value);

// "key = value" lines with optional "[section]" headers and '#' comments.
void apply_config_file(Settings& s, const std::string& path);
void apply_config_text(Settings& s, std::string_view text, const std::string& origin);

std::string format_double(double v);

// One "  name = default  help" line per key.
std::string key_listing();

}  // namespace autov::cli
