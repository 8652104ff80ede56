#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "svl/autodiff.hpp"

namespace svl::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline Tensor random_spikes(Shape shape, int d_max, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, d_max);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("svl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace svl::testing
