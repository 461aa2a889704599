#include "compactseg/volume.hpp"

#include <bit>
#include <cstring>
#include <algorithm>
#include <fstream>
#include <functional>

#include "compactseg/io.hpp"
#include "json.hpp"

namespace compactseg {

using nlohmann::json;

std::string Dims::str() const { return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z); }

LabelVolume::LabelVolume(Dims dims, std::uint16_t fill) : dims_(dims), labels_(dims.voxels(), fill) {
  if (dims.voxels() == 0) throw std::invalid_argument("label volume dims must be positive");
}

LabelVolume::LabelVolume(Dims dims, std::vector<std::uint16_t> labels) : dims_(dims), labels_(std::move(labels)) {
  if (dims.voxels() == 0) throw std::invalid_argument("label volume dims must be positive");
  if (labels_.size() != dims.voxels()) {
    throw std::invalid_argument("label volume holds " + std::to_string(labels_.size()) + " labels, expected " +
                                std::to_string(dims.voxels()));
  }
}

void check_probabilities(const ProbVolume& probs) {
  const auto values = probs.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0f && values[i] <= 1.0f)) {
      throw std::invalid_argument("probability at index " + std::to_string(i) + " is outside [0, 1]");
    }
  }
}

ProbVolume to_probabilities(const BitVolume& bits) {
  std::vector<float> values(bits.values().begin(), bits.values().end());
  return ProbVolume(bits.dims(), bits.n_channels(), std::move(values));
}

std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
  auto p = raw;
  p += ".json";
  return p;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void write_le(std::ofstream& out, std::span<const T> values) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::vector<unsigned char> buf(values.size() * sizeof(T));
  std::memcpy(buf.data(), values.data(), buf.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < values.size(); ++i) std::reverse(buf.begin() + i * sizeof(T), buf.begin() + (i + 1) * sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

template <typename T>
std::vector<T> read_le(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> buf(count * sizeof(T));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() || in.peek() != std::ifstream::traits_type::eof()) {
    throw std::runtime_error(path.string() + ": payload size does not match header (expected " +
                             std::to_string(buf.size()) + " bytes)");
  }
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < count; ++i) std::reverse(buf.begin() + i * sizeof(T), buf.begin() + (i + 1) * sizeof(T));
  }
  std::vector<T> values(count);
  std::memcpy(values.data(), buf.data(), buf.size());
  return values;
}

void write_payload_and_header(const std::filesystem::path& path, const json& header,
                              const std::function<void(std::ofstream&)>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  payload(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
  write_text_file(sidecar_path(path), header.dump(2) + "\n");
}

json read_header(const std::filesystem::path& path, std::string_view kind, std::string_view dtype) {
  json h;
  try {
    h = json::parse(read_text_file(sidecar_path(path)));
    if (h.at("format_version").get<int>() != kVolumeFormatVersion) throw std::runtime_error("unsupported format_version");
    if (h.at("kind").get<std::string>() != kind) throw std::runtime_error("expected kind '" + std::string(kind) + "'");
    if (h.at("dtype").get<std::string>() != dtype) throw std::runtime_error("expected dtype '" + std::string(dtype) + "'");
    if (h.at("endianness").get<std::string>() != "little") throw std::runtime_error("expected little endianness");
  } catch (const json::exception& e) {
    throw std::runtime_error(sidecar_path(path).string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(sidecar_path(path).string() + ": " + e.what());
  }
  return h;
}

Dims dims_from(const json& h) {
  const auto d = h.at("dims").get<std::vector<std::size_t>>();
  if (d.size() != 3) throw std::runtime_error("dims must have 3 entries");
  return Dims{d[0], d[1], d[2]};
}

}  // namespace

void save_label_volume(const LabelVolume& volume, const std::filesystem::path& path) {
  const Dims& d = volume.dims();
  json h = {{"format_version", kVolumeFormatVersion}, {"kind", "labels"},          {"dims", {d.x, d.y, d.z}},
            {"dtype", "uint16"},                      {"endianness", "little"},    {"ordering", "x-fastest"}};
  write_payload_and_header(path, h, [&](std::ofstream& out) { write_le<std::uint16_t>(out, volume.labels()); });
}

LabelVolume load_label_volume(const std::filesystem::path& path) {
  const json h = read_header(path, "labels", "uint16");
  const Dims d = dims_from(h);
  return LabelVolume(d, read_le<std::uint16_t>(path, d.voxels()));
}

void save_prob_volume(const ProbVolume& volume, const std::filesystem::path& path) {
  const Dims& d = volume.dims();
  json h = {{"format_version", kVolumeFormatVersion},
            {"kind", "probabilities"},
            {"dims", {d.x, d.y, d.z}},
            {"n_channels", volume.n_channels()},
            {"dtype", "float32"},
            {"endianness", "little"},
            {"ordering", "channel-major,x-fastest"}};
  write_payload_and_header(path, h, [&](std::ofstream& out) { write_le<float>(out, volume.values()); });
}

ProbVolume load_prob_volume(const std::filesystem::path& path) {
  const json h = read_header(path, "probabilities", "float32");
  const Dims d = dims_from(h);
  const auto channels = h.at("n_channels").get<std::size_t>();
  ProbVolume v(d, channels, read_le<float>(path, d.voxels() * channels));
  check_probabilities(v);
  return v;
}

}  // namespace compactseg
