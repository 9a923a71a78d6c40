#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace doseresp::cli {

/// Shortest round-trip decimal form.
std::string fmt(double v);
/// fmt(*v), or "degenerate" when there is no value.
std::string fmt_opt(const std::optional<double>& v);
nlohmann::json json_opt(const std::optional<double>& v);
/// Finite values as numbers; inf/nan become null.
nlohmann::json json_num(double v);

std::string sha256_file(const std::filesystem::path& path);

/// Output directory whose files are written atomically (temp file, then
/// rename) and remembered for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir);

  void write(const std::string& name, const std::string& contents);
  void write_json(const std::string& name, const nlohmann::json& j);
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& path() const { return dir_; }

  /// Writes manifest.json listing every file written so far, and
  /// timing.json with the wall-clock duration. Timing lives in its own file
  /// so that manifest.json stays byte-identical between runs.
  void finish(const std::string& command, nlohmann::json config, nlohmann::json input,
              std::optional<unsigned long long> seed, double seconds, int exit_code);

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace doseresp::cli
