#include "compactseg/codebook.hpp"

#include <bit>
#include <numeric>
#include <stdexcept>

#include "compactseg/ecc.hpp"
#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "json.hpp"

namespace compactseg {

using nlohmann::json;

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Vanilla:
      return "vanilla";
    case Scheme::Hamming74:
      return "hamming74";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "vanilla") return Scheme::Vanilla;
  if (name == "hamming74" || name == "hamming") return Scheme::Hamming74;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "' (expected vanilla or hamming74)");
}

unsigned required_data_bits(unsigned n_classes) {
  if (n_classes < 2) {
    throw std::invalid_argument("at least 2 classes are required, got " + std::to_string(n_classes));
  }
  return static_cast<unsigned>(std::bit_width(n_classes - 1));
}

unsigned required_hamming_bits(unsigned n_classes) { return encoded_bits(Scheme::Hamming74, required_data_bits(n_classes)); }

unsigned encoded_bits(Scheme scheme, unsigned n_data_bits) {
  return scheme == Scheme::Vanilla ? n_data_bits : ecc::chunked_length<ecc::Hamming74>(n_data_bits);
}

ReductionFactor memory_reduction_factor(unsigned n_classes, Scheme scheme) {
  return {n_classes, encoded_bits(scheme, required_data_bits(n_classes))};
}

Codebook::Codebook(Scheme scheme, std::vector<std::uint32_t> assignment, unsigned background_class,
                   std::optional<unsigned> n_data_bits)
    : scheme_(scheme), background_class_(background_class), assignment_(std::move(assignment)) {
  const auto n = static_cast<unsigned>(assignment_.size());
  const unsigned needed = required_data_bits(n);
  n_data_bits_ = n_data_bits.value_or(needed);
  if (n_data_bits_ < needed || n_data_bits_ > kMaxDataBits) {
    throw std::invalid_argument("n_data_bits " + std::to_string(n_data_bits_) + " outside [" + std::to_string(needed) +
                                ", " + std::to_string(kMaxDataBits) + "] for " + std::to_string(n) + " classes");
  }
  if (background_class_ >= n) {
    throw std::invalid_argument("background class " + std::to_string(background_class_) + " out of range");
  }
  lookup_.assign(std::size_t{1} << n_data_bits_, -1);
  for (unsigned c = 0; c < n; ++c) {
    const std::uint32_t w = assignment_[c];
    if (w >= lookup_.size()) {
      throw std::invalid_argument("class " + std::to_string(c) + " has word " + std::to_string(w) + " >= 2^" +
                                  std::to_string(n_data_bits_));
    }
    if (lookup_[w] >= 0) {
      throw std::invalid_argument("classes " + std::to_string(lookup_[w]) + " and " + std::to_string(c) +
                                  " share data word " + std::to_string(w));
    }
    lookup_[w] = static_cast<std::int32_t>(c);
  }
}

std::uint32_t Codebook::word_of(unsigned class_index) const {
  if (class_index >= assignment_.size()) {
    throw std::invalid_argument("class index " + std::to_string(class_index) + " out of range for " +
                                std::to_string(assignment_.size()) + " classes");
  }
  return assignment_[class_index];
}

std::optional<unsigned> Codebook::class_of(std::uint32_t word) const {
  if (word >= lookup_.size() || lookup_[word] < 0) return std::nullopt;
  return static_cast<unsigned>(lookup_[word]);
}

BitVector Codebook::encode(unsigned class_index) const {
  BitVector bits(n_encoded_bits());
  encode_into(class_index, bits);
  return bits;
}

void Codebook::encode_into(unsigned class_index, std::span<std::uint8_t> out) const {
  const DataWord word = data_word(class_index);
  if (out.size() != n_encoded_bits()) throw std::invalid_argument("encode_into: wrong output length");
  if (scheme_ == Scheme::Vanilla) {
    for (unsigned k = 0; k < n_data_bits_; ++k) out[k] = static_cast<std::uint8_t>(word.bit(k));
  } else {
    ecc::encode_chunked_into<ecc::Hamming74>(word, out);
  }
}

bool Codebook::operator==(const Codebook& other) const {
  return scheme_ == other.scheme_ && n_data_bits_ == other.n_data_bits_ &&
         background_class_ == other.background_class_ && assignment_ == other.assignment_;
}

Codebook identity_codebook(unsigned n_classes, Scheme scheme) {
  std::vector<std::uint32_t> words(n_classes);
  std::iota(words.begin(), words.end(), 0u);
  return Codebook(scheme, std::move(words));
}

Codebook build_random_codebook(unsigned n_classes, Scheme scheme, std::uint64_t seed) {
  const unsigned bits = required_data_bits(n_classes);
  std::vector<std::uint32_t> words(std::size_t{1} << bits);
  std::iota(words.begin(), words.end(), 0u);
  Rng rng(seed);
  rng.shuffle(std::span(words));
  words.resize(n_classes);
  return Codebook(scheme, std::move(words));
}

std::string codebook_to_json(const Codebook& codebook) {
  json doc;
  doc["format_version"] = kCodebookFormatVersion;
  doc["n_classes"] = codebook.n_classes();
  doc["n_data_bits"] = codebook.n_data_bits();
  doc["n_encoded_bits"] = codebook.n_encoded_bits();
  doc["scheme"] = std::string(to_string(codebook.scheme()));
  doc["background_class"] = codebook.background_class();
  doc["bit_order"] = "lsb-first";
  doc["assignment"] = std::vector<std::uint32_t>(codebook.assignment().begin(), codebook.assignment().end());
  return doc.dump(2) + "\n";
}

Codebook codebook_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("codebook: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCodebookFormatVersion) {
      throw std::runtime_error("codebook: unsupported format_version " + std::to_string(version));
    }
    if (doc.contains("bit_order") && doc["bit_order"] != "lsb-first") {
      throw std::runtime_error("codebook: unsupported bit_order");
    }
    auto assignment = doc.at("assignment").get<std::vector<std::uint32_t>>();
    const auto n_classes = doc.at("n_classes").get<unsigned>();
    if (assignment.size() != n_classes) {
      throw std::runtime_error("codebook: n_classes is " + std::to_string(n_classes) + " but assignment has " +
                               std::to_string(assignment.size()) + " entries");
    }
    Codebook cb(parse_scheme(doc.at("scheme").get<std::string>()), std::move(assignment),
                doc.value("background_class", 0u), doc.at("n_data_bits").get<unsigned>());
    if (doc.contains("n_encoded_bits") && doc["n_encoded_bits"].get<unsigned>() != cb.n_encoded_bits()) {
      throw std::runtime_error("codebook: n_encoded_bits inconsistent with scheme and n_data_bits");
    }
    return cb;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("codebook: ") + e.what());
  }
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  write_text_file(path, codebook_to_json(codebook));
}

Codebook load_codebook(const std::filesystem::path& path) {
  try {
    return codebook_from_json(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::uint64_t assignment_digest(const Codebook& codebook) {
  return fnv1a64(std::as_bytes(codebook.assignment()));
}

}  // namespace compactseg
