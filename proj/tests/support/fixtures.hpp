#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sigdistill/dataio.hpp"

namespace sigdistill::testing {

// Set of `per_class` random records per class with samples in [-1, 1].
inline LabeledSignalSet random_set(std::size_t classes, std::size_t per_class, std::size_t n,
                                   std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("C" + std::to_string(c));
  LabeledSignalSet set(names, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      SignalRecord r;
      for (std::size_t k = 0; k < n; ++k) {
        r.i_channel.push_back(d(rng));
        r.q_channel.push_back(d(rng));
      }
      r.label = c;
      if (i % 2 == 0) r.snr_db = static_cast<int>(i % 20) - 5;
      set.add(std::move(r));
    }
  return set;
}

// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sigdistill_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sigdistill::testing
