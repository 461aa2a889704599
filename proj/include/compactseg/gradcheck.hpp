#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compactseg {

struct GradcheckResult {
  std::string name;
  double max_relative_error = 0.0;  // |a - n| / max(|a|, |n|, 1e-3)
  double tolerance = 0.0;
  std::size_t n_checked = 0;

  bool passed() const { return max_relative_error < tolerance; }
};

inline constexpr double kLossTolerance = 1e-6;
inline constexpr double kEndToEndTolerance = 1e-5;

// Central-difference checks of every loss and of each head's training
// objective on a seeded 4x4 image.
std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed = 1, double step = 1e-6);

}  // namespace compactseg
