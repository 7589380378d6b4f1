#pragma once

// In-memory I/Q dataset types and the SIGDS container.
//
// SIGDS layout, all integers little-endian:
//   0-3   magic "SIGD"
//   4-5   version u16 (= 1)
//   6-7   n_channels u16 (= 2)
//   8-11  N u32 (samples per channel)
//   12-15 record_count u32
//   16-17 class_count u16
//   18-63 zero padding
//   class table: class_count x (u16 name_len, UTF-8 bytes)
//   records: record_count x (u16 label, i16 snr_db (-32768 = absent),
//                            N f32 I samples, N f32 Q samples)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sigdistill {

struct SignalRecord {
  std::vector<float> i_channel;
  std::vector<float> q_channel;
  std::size_t label = 0;
  std::optional<int> snr_db;
};

class LabeledSignalSet {
 public:
  static constexpr std::size_t n_channels = 2;

  LabeledSignalSet() = default;
  LabeledSignalSet(std::vector<std::string> class_names, std::size_t samples_per_channel);

  // Validates the record against the set invariants before appending.
  void add(SignalRecord record);
  void reserve(std::size_t n) { records_.reserve(n); }

  const std::vector<SignalRecord>& records() const noexcept { return records_; }
  const SignalRecord& operator[](std::size_t i) const { return records_.at(i); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::size_t samples_per_channel() const noexcept { return n_; }
  std::size_t num_classes() const noexcept { return class_names_.size(); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::vector<std::size_t> class_counts() const;
  // Record indices grouped by label, ascending within each class.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  std::optional<std::size_t> class_index(const std::string& name) const;

  // New set with the same classes and N holding the given records.
  LabeledSignalSet subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<SignalRecord> records_;
  std::vector<std::string> class_names_;
  std::size_t n_ = 0;
};

// Bit-exact comparison: class table, N, labels, snr and every float's bits.
bool bit_equal(const LabeledSignalSet& a, const LabeledSignalSet& b);

class SyntheticSet {
 public:
  SyntheticSet(LabeledSignalSet base, std::size_t spc);

  const LabeledSignalSet& base() const noexcept { return base_; }
  std::size_t spc() const noexcept { return spc_; }

 private:
  LabeledSignalSet base_;
  std::size_t spc_;
};

std::vector<std::uint8_t> encode_sigds(const LabeledSignalSet& set);
LabeledSignalSet decode_sigds(std::span<const std::uint8_t> bytes);

void save_sigds(const LabeledSignalSet& set, const std::filesystem::path& path);
LabeledSignalSet load_sigds(const std::filesystem::path& path);

// Stratified per class: floor(test_fraction * count) records go to the test
// side, clamped so each side keeps at least one record. Record order within
// each output follows the input order. Returns (train, test).
std::pair<LabeledSignalSet, LabeledSignalSet> split_train_test(const LabeledSignalSet& set,
                                                               double test_fraction,
                                                               std::uint64_t seed);

// Uniform sampling of spc records per class without replacement. Output is
// grouped by class in class order. Serves as the random-selection baseline
// and as the initialization of distilled sets.
SyntheticSet take_per_class(const LabeledSignalSet& set, std::size_t spc, std::uint64_t seed);

}  // namespace sigdistill
