#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace neurosym {

/// Effective pipeline configuration: the JSON config file with command-line
/// overrides applied. Relative input paths resolve against the config file's
/// directory.
class PipelineConfig {
 public:
  using Overrides = std::vector<std::pair<std::string, std::string>>;

  /// Loads, applies overrides, then validates. `out` and `seed` take
  /// precedence over the file's "output" path and "seed".
  static PipelineConfig load(const std::filesystem::path& path, const Overrides& overrides = {},
                             std::optional<std::uint64_t> seed = std::nullopt,
                             std::optional<std::filesystem::path> out = std::nullopt);
  static PipelineConfig from_json(nlohmann::json values, std::filesystem::path base_dir,
                                  const Overrides& overrides = {}, std::optional<std::uint64_t> seed = std::nullopt,
                                  std::optional<std::filesystem::path> out = std::nullopt);

  const nlohmann::json& values() const { return values_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }
  std::uint64_t seed() const { return seed_; }

  /// Value at a dotted key ("filter.percentile"), or `fallback` when absent.
  template <typename T>
  T get(std::string_view dotted, T fallback) const {
    const auto* v = find(dotted);
    return v == nullptr || v->is_null() ? fallback : v->get<T>();
  }
  const nlohmann::json* find(std::string_view dotted) const;

  /// Resolved input paths under "paths.<key>"; a key may hold one path or a
  /// list. Empty when the key is absent.
  std::vector<std::filesystem::path> inputs(std::string_view key) const;
  bool has_input(std::string_view key) const { return !inputs(key).empty(); }

  /// SHA-256 of the canonical effective config, output path excluded.
  std::string digest() const;

 private:
  void validate() const;

  nlohmann::json values_;
  std::filesystem::path base_dir_;
  std::filesystem::path out_dir_;
  std::uint64_t seed_ = 0;
};

/// Sets a dotted key. The value is parsed as JSON when possible ("1.5",
/// "true", "[1,2]") and taken as a string otherwise. "clf." is an alias for
/// "classify.".
void apply_override(nlohmann::json& config, std::string_view dotted, std::string_view value);

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage against the output directory, appending its manifest line.
void run_stage(const std::string& stage, const PipelineConfig& config);

/// Runs every stage in order after truncating the manifest.
void run_pipeline(const PipelineConfig& config);

/// Exclusive lock on an output directory, held for the object's lifetime.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace neurosym
