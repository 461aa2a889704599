#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace compactseg {

// Record written next to the outputs of every CLI run. Rerunning `argv` from
// `cwd` must reproduce every output digest; wall_clock_seconds is the only
// field allowed to differ.
inline constexpr int kManifestSchemaVersion = 1;

struct FileRecord {
  std::string path;  // as given on the command line
  std::string digest;  // FNV-1a 64 of the file bytes, hex
  std::uintmax_t bytes = 0;

  bool operator==(const FileRecord&) const = default;
};

FileRecord record_file(const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::vector<std::string> argv;  // without the program name
  std::string cwd;
  std::string config_json = "{}";  // resolved options, JSON object
  std::map<std::string, std::uint64_t> seeds;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::map<std::string, double> stats;
  double wall_clock_seconds = 0.0;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

}  // namespace compactseg
