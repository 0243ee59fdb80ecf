#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "projscan/rng.hpp"
#include "projscan/volume.hpp"

namespace testsupport {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("projscan-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline projscan::Volume3D random_volume(projscan::Dims3 dims,
                                        std::uint64_t seed, float lo = 0.0f,
                                        float hi = 1.0f) {
  projscan::Rng rng(seed);
  std::vector<float> data(dims.count());
  for (auto& v : data) v = rng.uniform_f(lo, hi);
  return projscan::Volume3D(dims, std::move(data));
}

} // namespace testsupport
