#include "compactseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "json.hpp"

namespace compactseg {

using nlohmann::json;

std::string_view to_string(HeadKind head) {
  switch (head) {
    case HeadKind::OneHot:
      return "onehot";
    case HeadKind::Binary:
      return "binary";
    case HeadKind::Hamming:
      return "hamming";
    case HeadKind::Tree:
      return "tree";
  }
  return "unknown";
}

HeadKind parse_head(std::string_view name) {
  if (name == "onehot") return HeadKind::OneHot;
  if (name == "binary") return HeadKind::Binary;
  if (name == "hamming") return HeadKind::Hamming;
  if (name == "tree") return HeadKind::Tree;
  throw std::invalid_argument("unknown head '" + std::string(name) + "' (expected onehot, binary, hamming or tree)");
}

Scheme head_scheme(HeadKind head) { return head == HeadKind::Hamming ? Scheme::Hamming74 : Scheme::Vanilla; }

unsigned head_channels(HeadKind head, unsigned n_classes) {
  switch (head) {
    case HeadKind::OneHot:
      return n_classes;
    case HeadKind::Binary:
    case HeadKind::Tree:
      return required_data_bits(n_classes);
    case HeadKind::Hamming:
      return required_hamming_bits(n_classes);
  }
  return 0;
}

std::size_t Architecture::n_head_vectors() const {
  const unsigned k = n_channels();
  return head == HeadKind::Tree ? (std::size_t{1} << k) - 1 : k;
}

namespace {

struct Layout {
  std::size_t w1, b1, w2, b2, head, total;
  std::size_t hidden, features, stride;  // stride = hidden + 1

  explicit Layout(const Architecture& a) {
    hidden = a.hidden;
    features = a.n_features;
    stride = hidden + 1;
    w1 = 0;
    b1 = w1 + hidden * features;
    w2 = b1 + hidden;
    b2 = w2 + 9 * hidden * hidden;
    head = b2 + hidden;
    total = head + a.n_head_vectors() * stride;
  }
};

void check_arch(const Architecture& a) {
  if (a.n_features == 0 || a.hidden == 0) throw std::invalid_argument("model: features and hidden width must be positive");
  if (a.head == HeadKind::Tree && a.n_channels() > kMaxDataBits) throw std::invalid_argument("model: tree too deep");
  required_data_bits(a.n_classes);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activations of one forward pass, pixel-major.
struct Pass {
  std::vector<double> h1, h2;
  std::vector<double> probs;             // channel-major
  std::vector<std::uint32_t> selection;  // tree: head vector per (channel, pixel)
};

class Network {
 public:
  Network(const Architecture& arch, std::span<const double> params) : a_(arch), l_(arch), p_(params) {}

  Pass forward(const ImageView& img, std::span<const std::uint8_t> teacher, std::vector<std::uint8_t>* bits_out) const {
    check_image(img);
    const std::size_t n_pix = img.pixels(), H = l_.hidden, F = l_.features;
    Pass pass;
    pass.h1.assign(n_pix * H, 0.0);
    for (std::size_t p = 0; p < n_pix; ++p) {
      const float* x = &img.features[p * F];
      double* out = &pass.h1[p * H];
      for (std::size_t h = 0; h < H; ++h) {
        const double* w = &p_[l_.w1 + h * F];
        double acc = p_[l_.b1 + h];
        for (std::size_t f = 0; f < F; ++f) acc += w[f] * static_cast<double>(x[f]);
        out[h] = std::tanh(acc);
      }
    }
    pass.h2.assign(n_pix * H, 0.0);
    for (std::size_t j = 0; j < img.height; ++j) {
      for (std::size_t i = 0; i < img.width; ++i) {
        double* out = &pass.h2[(j * img.width + i) * H];
        for (std::size_t o = 0; o < H; ++o) out[o] = p_[l_.b2 + o];
        for_each_tap(img, i, j, [&](std::size_t tap, std::size_t q) {
          const double* in = &pass.h1[q * H];
          const double* w = &p_[l_.w2 + tap * H * H];
          for (std::size_t o = 0; o < H; ++o) {
            double acc = 0.0;
            for (std::size_t c = 0; c < H; ++c) acc += w[o * H + c] * in[c];
            out[o] += acc;
          }
        });
        for (std::size_t o = 0; o < H; ++o) out[o] = std::tanh(out[o]);
      }
    }
    head_forward(img, pass, teacher, bits_out);
    return pass;
  }

  // grad_probs is d(objective)/d(probs), already scaled.
  void backward(const ImageView& img, const Pass& pass, std::span<const double> grad_probs, std::span<double> grad) const {
    const std::size_t n_pix = img.pixels(), H = l_.hidden, F = l_.features, S = l_.stride;
    const unsigned K = a_.n_channels();
    std::vector<double> dz(K * n_pix);
    if (a_.head == HeadKind::OneHot) {
      for (std::size_t p = 0; p < n_pix; ++p) {
        double dot = 0.0;
        for (unsigned k = 0; k < K; ++k) dot += pass.probs[k * n_pix + p] * grad_probs[k * n_pix + p];
        for (unsigned k = 0; k < K; ++k) {
          const double pk = pass.probs[k * n_pix + p];
          dz[k * n_pix + p] = pk * (grad_probs[k * n_pix + p] - dot);
        }
      }
    } else {
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = grad_probs[i] * pass.probs[i] * (1.0 - pass.probs[i]);
    }

    std::vector<double> dh2(n_pix * H, 0.0);
    for (unsigned k = 0; k < K; ++k) {
      for (std::size_t p = 0; p < n_pix; ++p) {
        const double g = dz[k * n_pix + p];
        if (g == 0.0) continue;
        const std::size_t v = a_.head == HeadKind::Tree ? pass.selection[k * n_pix + p] : k;
        const double* w = &p_[l_.head + v * S];
        double* gw = &grad[l_.head + v * S];
        const double* h = &pass.h2[p * H];
        double* dh = &dh2[p * H];
        for (std::size_t c = 0; c < H; ++c) {
          gw[c] += g * h[c];
          dh[c] += g * w[c];
        }
        gw[H] += g;
      }
    }

    std::vector<double> dh1(n_pix * H, 0.0);
    for (std::size_t j = 0; j < img.height; ++j) {
      for (std::size_t i = 0; i < img.width; ++i) {
        const std::size_t p = j * img.width + i;
        double* da = &dh2[p * H];
        for (std::size_t o = 0; o < H; ++o) {
          const double h = pass.h2[p * H + o];
          da[o] *= 1.0 - h * h;
          grad[l_.b2 + o] += da[o];
        }
        for_each_tap(img, i, j, [&](std::size_t tap, std::size_t q) {
          const double* in = &pass.h1[q * H];
          double* din = &dh1[q * H];
          const double* w = &p_[l_.w2 + tap * H * H];
          double* gw = &grad[l_.w2 + tap * H * H];
          for (std::size_t o = 0; o < H; ++o) {
            const double g = da[o];
            for (std::size_t c = 0; c < H; ++c) {
              gw[o * H + c] += g * in[c];
              din[c] += g * w[o * H + c];
            }
          }
        });
      }
    }

    for (std::size_t p = 0; p < n_pix; ++p) {
      const float* x = &img.features[p * F];
      for (std::size_t h = 0; h < H; ++h) {
        const double a = pass.h1[p * H + h];
        const double g = dh1[p * H + h] * (1.0 - a * a);
        grad[l_.b1 + h] += g;
        double* gw = &grad[l_.w1 + h * F];
        for (std::size_t f = 0; f < F; ++f) gw[f] += g * static_cast<double>(x[f]);
      }
    }
  }

 private:
  void check_image(const ImageView& img) const {
    if (img.n_features != l_.features || img.features.size() != img.pixels() * l_.features || img.pixels() == 0) {
      throw std::invalid_argument("model: image has " + std::to_string(img.n_features) + " features per pixel, model expects " +
                                  std::to_string(l_.features));
    }
  }

  // 3x3 taps with zero padding; tap index = (dy + 1) * 3 + (dx + 1).
  template <typename Fn>
  static void for_each_tap(const ImageView& img, std::size_t i, std::size_t j, Fn&& fn) {
    for (int dy = -1; dy <= 1; ++dy) {
      const long y = static_cast<long>(j) + dy;
      if (y < 0 || y >= static_cast<long>(img.height)) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const long x = static_cast<long>(i) + dx;
        if (x < 0 || x >= static_cast<long>(img.width)) continue;
        fn(static_cast<std::size_t>((dy + 1) * 3 + (dx + 1)), static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x));
      }
    }
  }

  double logit(std::size_t vector, const double* h) const {
    const std::size_t H = l_.hidden;
    const double* w = &p_[l_.head + vector * l_.stride];
    double acc = w[H];
    for (std::size_t c = 0; c < H; ++c) acc += w[c] * h[c];
    return acc;
  }

  void head_forward(const ImageView& img, Pass& pass, std::span<const std::uint8_t> teacher,
                    std::vector<std::uint8_t>* bits_out) const {
    const std::size_t n_pix = img.pixels(), H = l_.hidden;
    const unsigned K = a_.n_channels();
    pass.probs.assign(K * n_pix, 0.0);
    if (a_.head == HeadKind::OneHot) {
      std::vector<double> z(K);
      for (std::size_t p = 0; p < n_pix; ++p) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (unsigned k = 0; k < K; ++k) {
          z[k] = logit(k, &pass.h2[p * H]);
          zmax = std::max(zmax, z[k]);
        }
        double sum = 0.0;
        for (unsigned k = 0; k < K; ++k) sum += (z[k] = std::exp(z[k] - zmax));
        for (unsigned k = 0; k < K; ++k) pass.probs[k * n_pix + p] = z[k] / sum;
      }
      return;
    }
    if (a_.head != HeadKind::Tree) {
      for (unsigned k = 0; k < K; ++k) {
        for (std::size_t p = 0; p < n_pix; ++p) pass.probs[k * n_pix + p] = sigmoid(logit(k, &pass.h2[p * H]));
      }
      return;
    }
    if (!teacher.empty() && teacher.size() != K * n_pix) {
      throw std::invalid_argument("model: teacher bits must cover " + std::to_string(K) + " channels x " +
                                  std::to_string(n_pix) + " pixels");
    }
    pass.selection.assign(K * n_pix, 0);
    if (bits_out) bits_out->assign(K * n_pix, 0);
    for (std::size_t p = 0; p < n_pix; ++p) {
      std::size_t prefix = 0;
      for (unsigned k = 0; k < K; ++k) {
        const std::size_t v = Architecture::tree_bank_offset(k) + prefix;
        const double prob = sigmoid(logit(v, &pass.h2[p * H]));
        const unsigned bit = teacher.empty() ? (prob >= 0.5 ? 1u : 0u) : (teacher[k * n_pix + p] & 1u);
        pass.probs[k * n_pix + p] = prob;
        pass.selection[k * n_pix + p] = static_cast<std::uint32_t>(v);
        if (bits_out) (*bits_out)[k * n_pix + p] = static_cast<std::uint8_t>(bit);
        prefix |= std::size_t{bit} << k;
      }
    }
  }

  const Architecture& a_;
  Layout l_;
  std::span<const double> p_;
};

// Loss and its gradient w.r.t. the channel-major probabilities.
LossResult head_loss(const Architecture& arch, const std::vector<double>& probs, std::size_t n_pix,
                     const ImageTargets& targets, const ObjectiveSettings& settings) {
  const unsigned K = arch.n_channels();
  if (targets.labels.size() != n_pix) throw std::invalid_argument("model: labels do not cover the image");
  const ChannelMatrix pred{probs, K, n_pix};
  if (arch.head == HeadKind::OneHot) {
    return settings.onehot_dice ? dice_ce_loss(pred, targets.labels) : cross_entropy_loss(pred, targets.labels);
  }
  if (targets.bits.size() != K * n_pix) throw std::invalid_argument("model: target bits do not match the head");
  const std::vector<double> bits(targets.bits.begin(), targets.bits.end());
  return binary_dice_ce_loss(pred, {bits, K, n_pix}, settings.binary);
}

}  // namespace

std::size_t Architecture::n_params() const { return Layout(*this).total; }

ToyModel::ToyModel(Architecture arch, std::uint64_t seed) : arch_(arch) {
  check_arch(arch_);
  const Layout l(arch_);
  params_.assign(l.total, 0.0);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(l.features));
  const double s2 = 1.0 / std::sqrt(9.0 * static_cast<double>(l.hidden));
  const double s3 = 1.0 / std::sqrt(static_cast<double>(l.hidden));
  for (std::size_t i = l.w1; i < l.b1; ++i) params_[i] = s1 * rng.normal();
  for (std::size_t i = l.w2; i < l.b2; ++i) params_[i] = s2 * rng.normal();
  for (std::size_t v = 0; v < arch_.n_head_vectors(); ++v) {
    for (std::size_t c = 0; c < l.hidden; ++c) params_[l.head + v * l.stride + c] = s3 * rng.normal();
  }
}

ToyModel::ToyModel(Architecture arch, std::vector<double> params) : arch_(arch), params_(std::move(params)) {
  check_arch(arch_);
  if (params_.size() != arch_.n_params()) {
    throw std::invalid_argument("model: " + std::to_string(params_.size()) + " parameters, architecture needs " +
                                std::to_string(arch_.n_params()));
  }
}

std::vector<double> ToyModel::forward(const ImageView& image, std::span<const std::uint8_t> teacher_bits,
                                      std::vector<std::uint8_t>* tree_bits) const {
  if (arch_.head != HeadKind::Tree && !teacher_bits.empty()) {
    throw std::invalid_argument("model: teacher bits only apply to the tree head");
  }
  return Network(arch_, params_).forward(image, teacher_bits, tree_bits).probs;
}

double ToyModel::objective(const ImageView& image, const ImageTargets& targets, const ObjectiveSettings& settings,
                           std::span<double> grad, double scale) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("model: gradient buffer has the wrong size");
  if (arch_.head == HeadKind::Tree && targets.bits.empty()) {
    throw std::invalid_argument("model: the tree head needs teacher bits in training mode");
  }
  const Network net(arch_, params_);
  const Pass pass = net.forward(image, arch_.head == HeadKind::Tree ? targets.bits : std::span<const std::uint8_t>{},
                                nullptr);
  LossResult loss = head_loss(arch_, pass.probs, image.pixels(), targets, settings);
  for (auto& g : loss.gradient) g *= scale;
  net.backward(image, pass, loss.gradient, grad);
  return loss.value;
}

double ToyModel::objective_value(const ImageView& image, const ImageTargets& targets,
                                 const ObjectiveSettings& settings) const {
  if (arch_.head == HeadKind::Tree && targets.bits.empty()) {
    throw std::invalid_argument("model: the tree head needs teacher bits in training mode");
  }
  const Pass pass = Network(arch_, params_).forward(
      image, arch_.head == HeadKind::Tree ? targets.bits : std::span<const std::uint8_t>{}, nullptr);
  return head_loss(arch_, pass.probs, image.pixels(), targets, settings).value;
}

void save_model(const ToyModel& model, const std::filesystem::path& path) {
  const Architecture& a = model.arch();
  json doc = {{"format_version", kModelFormatVersion},
              {"head", std::string(to_string(a.head))},
              {"n_classes", a.n_classes},
              {"n_features", a.n_features},
              {"hidden", a.hidden},
              {"params", std::vector<double>(model.params().begin(), model.params().end())}};
  write_text_file(path, doc.dump() + "\n");
}

ToyModel load_model(const std::filesystem::path& path) {
  try {
    const json doc = json::parse(read_text_file(path));
    if (doc.at("format_version").get<int>() != kModelFormatVersion) throw std::runtime_error("unsupported format_version");
    Architecture a;
    a.head = parse_head(doc.at("head").get<std::string>());
    a.n_classes = doc.at("n_classes").get<unsigned>();
    a.n_features = doc.at("n_features").get<std::size_t>();
    a.hidden = doc.at("hidden").get<std::size_t>();
    return ToyModel(a, doc.at("params").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace compactseg
