#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carat/harness.hpp"

namespace carat {

/// Value of a config key: a bare scalar token or a bracketed list, lists
/// nesting as needed ("[[0.5, 0.5], [0.3, 0.7]]").
struct ConfigValue {
  std::string scalar;
  std::vector<ConfigValue> items;
  bool is_list = false;

  std::string as_string() const;
  double as_real() const;
  long long as_integer() const;
  /// A scalar is promoted to a one-element list.
  std::vector<ConfigValue> as_list() const;
  std::vector<double> as_reals() const;
  std::vector<std::string> as_strings() const;
};

ConfigValue parse_value(std::string_view text);

/// Flat key-value file with optional [section] headers:
///
///   # comment
///   key = value
///   [name]
///   key = value
///
/// Keys before the first header are global; each section inherits them and
/// may override any of them.
class Config {
 public:
  struct Section {
    std::string name;
    std::map<std::string, ConfigValue> entries;
  };

  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  const std::map<std::string, ConfigValue>& globals() const { return globals_; }
  const std::vector<Section>& sections() const { return sections_; }

  /// Sections with globals merged in; the global block alone when the file
  /// has no sections.
  std::vector<Section> resolved() const;

 private:
  std::map<std::string, ConfigValue> globals_;
  std::vector<Section> sections_;
};

/// Expands every section into its family x design x n x delta grid.
ExperimentPlan plan_from_config(const Config& config);

/// The first cell of the config, which must describe exactly one scenario.
Scenario scenario_from_config(const Config& config);

}  // namespace carat
