#include "compactseg/manifest.hpp"

#include <stdexcept>

#include "compactseg/io.hpp"
#include "json.hpp"

namespace compactseg {

using nlohmann::json;

FileRecord record_file(const std::filesystem::path& path) {
  return {path.string(), file_digest(path), std::filesystem::file_size(path)};
}

namespace {

json files_to_json(const std::vector<FileRecord>& files) {
  json arr = json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"digest", f.digest}, {"bytes", f.bytes}});
  return arr;
}

std::vector<FileRecord> files_from_json(const json& arr) {
  std::vector<FileRecord> files;
  for (const auto& f : arr) {
    files.push_back({f.at("path").get<std::string>(), f.at("digest").get<std::string>(),
                     f.at("bytes").get<std::uintmax_t>()});
  }
  return files;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  json doc = {{"schema_version", kManifestSchemaVersion},
              {"tool", "compactseg"},
              {"tool_version", m.tool_version},
              {"command", m.command},
              {"argv", m.argv},
              {"cwd", m.cwd},
              {"config", json::parse(m.config_json)},
              {"seeds", m.seeds},
              {"inputs", files_to_json(m.inputs)},
              {"outputs", files_to_json(m.outputs)},
              {"stats", m.stats},
              {"wall_clock_seconds", m.wall_clock_seconds}};
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    const int version = doc.at("schema_version").get<int>();
    if (version != kManifestSchemaVersion) {
      throw std::invalid_argument("manifest: unsupported schema_version " + std::to_string(version));
    }
    RunManifest m;
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.command = doc.at("command").get<std::string>();
    m.argv = doc.at("argv").get<std::vector<std::string>>();
    m.cwd = doc.at("cwd").get<std::string>();
    m.config_json = doc.at("config").dump();
    m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = files_from_json(doc.at("inputs"));
    m.outputs = files_from_json(doc.at("outputs"));
    m.stats = doc.at("stats").get<std::map<std::string, double>>();
    m.wall_clock_seconds = doc.at("wall_clock_seconds").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(manifest));
}

RunManifest load_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace compactseg
