#include "sigdistill/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "sigdistill/error.hpp"
#include "sigdistill/rng.hpp"

namespace sigdistill {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'I', 'G', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 64;
constexpr std::int16_t kSnrAbsent = std::numeric_limits<std::int16_t>::min();

void validate_class_names(const std::vector<std::string>& names) {
  if (names.size() > std::numeric_limits<std::uint16_t>::max())
    throw ValidationError("too many classes: " + std::to_string(names.size()));
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError("class names must be non-empty");
    if (n.size() > std::numeric_limits<std::uint16_t>::max())
      throw ValidationError("class name too long: " + n.substr(0, 32) + "...");
    if (!seen.insert(n).second) throw ValidationError("duplicate class name: " + n);
  }
}

bool all_finite(std::span<const float> xs) {
  return std::all_of(xs.begin(), xs.end(), [](float v) { return std::isfinite(v); });
}

class Writer {
 public:
  void u16(std::uint16_t v) { le(v, 2); }
  void i16(std::int16_t v) { le(static_cast<std::uint16_t>(v), 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void pad_to(std::size_t n) { out_.resize(std::max(out_.size(), n), 0); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  bool has(std::size_t n) const { return remaining() >= n; }
  void seek(std::size_t p) { pos_ = p; }

  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::int16_t i16() { return static_cast<std::int16_t>(le(2)); }
  std::uint32_t u32() { return le(4); }
  float f32() { return std::bit_cast<float>(le(4)); }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::uint32_t le(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

LabeledSignalSet::LabeledSignalSet(std::vector<std::string> class_names,
                                   std::size_t samples_per_channel)
    : class_names_(std::move(class_names)), n_(samples_per_channel) {
  validate_class_names(class_names_);
  if (n_ == 0) throw ValidationError("samples per channel must be positive");
  if (n_ > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("samples per channel exceeds u32");
}

void LabeledSignalSet::add(SignalRecord record) {
  if (record.i_channel.size() != n_ || record.q_channel.size() != n_)
    throw ValidationError("record channel length (" + std::to_string(record.i_channel.size()) +
                          ", " + std::to_string(record.q_channel.size()) +
                          ") does not match N=" + std::to_string(n_));
  if (record.label >= class_names_.size())
    throw ValidationError("label " + std::to_string(record.label) + " out of range for " +
                          std::to_string(class_names_.size()) + " classes");
  if (!all_finite(record.i_channel) || !all_finite(record.q_channel))
    throw ValidationError("record contains non-finite samples");
  if (record.snr_db && (*record.snr_db <= kSnrAbsent ||
                        *record.snr_db > std::numeric_limits<std::int16_t>::max()))
    throw ValidationError("snr_db out of i16 range: " + std::to_string(*record.snr_db));
  if (records_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("record count exceeds u32");
  records_.push_back(std::move(record));
}

std::vector<std::size_t> LabeledSignalSet::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (const auto& r : records_) ++counts[r.label];
  return counts;
}

std::vector<std::vector<std::size_t>> LabeledSignalSet::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(class_names_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out[records_[i].label].push_back(i);
  return out;
}

std::optional<std::size_t> LabeledSignalSet::class_index(const std::string& name) const {
  auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - class_names_.begin());
}

LabeledSignalSet LabeledSignalSet::subset(std::span<const std::size_t> indices) const {
  LabeledSignalSet out(class_names_, n_);
  out.reserve(indices.size());
  for (auto i : indices) out.records_.push_back(records_.at(i));
  return out;
}

bool bit_equal(const LabeledSignalSet& a, const LabeledSignalSet& b) {
  if (a.class_names() != b.class_names() || a.samples_per_channel() != b.samples_per_channel() ||
      a.size() != b.size())
    return false;
  auto same_bits = [](const std::vector<float>& x, const std::vector<float>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ra = a[i];
    const auto& rb = b[i];
    if (ra.label != rb.label || ra.snr_db != rb.snr_db || !same_bits(ra.i_channel, rb.i_channel) ||
        !same_bits(ra.q_channel, rb.q_channel))
      return false;
  }
  return true;
}

SyntheticSet::SyntheticSet(LabeledSignalSet base, std::size_t spc)
    : base_(std::move(base)), spc_(spc) {
  if (spc_ == 0) throw ValidationError("spc must be at least 1");
  auto counts = base_.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] != spc_)
      throw ValidationError("synthetic set class '" + base_.class_names()[c] + "' has " +
                            std::to_string(counts[c]) + " records, expected spc=" +
                            std::to_string(spc_));
}

std::vector<std::uint8_t> encode_sigds(const LabeledSignalSet& set) {
  const std::size_t n = set.samples_per_channel();
  Writer w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(LabeledSignalSet::n_channels));
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u16(static_cast<std::uint16_t>(set.num_classes()));
  w.pad_to(kHeaderSize);
  for (const auto& name : set.class_names()) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
  }
  for (const auto& r : set.records()) {
    w.u16(static_cast<std::uint16_t>(r.label));
    w.i16(r.snr_db ? static_cast<std::int16_t>(*r.snr_db) : kSnrAbsent);
    for (float v : r.i_channel) w.f32(v);
    for (float v : r.q_channel) w.f32(v);
  }
  return w.take();
}

LabeledSignalSet decode_sigds(std::span<const std::uint8_t> bytes) {
  using K = ParseError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ParseError(K::bad_magic, "bad magic");
  if (bytes.size() < kHeaderSize) throw ParseError(K::truncated_header, "truncated header");

  Reader r(bytes);
  r.seek(4);
  const auto version = r.u16();
  if (version != kVersion)
    throw ParseError(K::unsupported_version, "unsupported version " + std::to_string(version));
  const auto channels = r.u16();
  if (channels != LabeledSignalSet::n_channels)
    throw ParseError(K::bad_channel_count, "expected 2 channels, found " + std::to_string(channels));
  const std::size_t n = r.u32();
  const std::size_t record_count = r.u32();
  const std::size_t class_count = r.u16();
  if (n == 0) throw ParseError(K::truncated_header, "N must be positive");
  r.seek(kHeaderSize);

  std::vector<std::string> names;
  names.reserve(class_count);
  for (std::size_t c = 0; c < class_count; ++c) {
    if (!r.has(2)) throw ParseError(K::bad_class_table, "truncated class table");
    const std::size_t len = r.u16();
    if (len == 0 || !r.has(len)) throw ParseError(K::bad_class_table, "bad class name entry");
    names.push_back(r.str(len));
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size())
    throw ParseError(K::bad_class_table, "duplicate class name");

  LabeledSignalSet set(std::move(names), n);
  const std::size_t record_bytes = 4 + 2 * n * 4;
  if (r.remaining() / record_bytes < record_count)
    throw ParseError(K::truncated_payload, "truncated payload");
  set.reserve(record_count);
  for (std::size_t i = 0; i < record_count; ++i) {
    SignalRecord rec;
    rec.label = r.u16();
    if (rec.label >= class_count)
      throw ParseError(K::label_out_of_range, "label out of range in record " + std::to_string(i));
    const auto snr = r.i16();
    if (snr != kSnrAbsent) rec.snr_db = snr;
    rec.i_channel.resize(n);
    rec.q_channel.resize(n);
    for (auto& v : rec.i_channel) v = r.f32();
    for (auto& v : rec.q_channel) v = r.f32();
    if (!all_finite(rec.i_channel) || !all_finite(rec.q_channel))
      throw ParseError(K::non_finite_sample, "non-finite sample in record " + std::to_string(i));
    set.add(std::move(rec));
  }
  if (r.remaining() != 0) throw ParseError(K::trailing_bytes, "trailing bytes after payload");
  return set;
}

void save_sigds(const LabeledSignalSet& set, const std::filesystem::path& path) {
  const auto bytes = encode_sigds(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("write failed: " + path.string());
}

LabeledSignalSet load_sigds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw PersistenceError("read failed: " + path.string());
  return decode_sigds(bytes);
}

std::pair<LabeledSignalSet, LabeledSignalSet> split_train_test(const LabeledSignalSet& set,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test_fraction must lie in (0, 1)");
  auto by_class = set.indices_by_class();
  std::vector<bool> to_test(set.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2)
      throw ValidationError("class '" + set.class_names()[c] + "' has " +
                            std::to_string(idx.size()) + " records; split needs at least 2");
    auto n_test = static_cast<std::size_t>(std::floor(test_fraction * idx.size()));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    auto rng = make_rng(seed, {stream_tag::split, c});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < n_test; ++k) to_test[idx[k]] = true;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < set.size(); ++i) (to_test[i] ? test_idx : train_idx).push_back(i);
  return {set.subset(train_idx), set.subset(test_idx)};
}

SyntheticSet take_per_class(const LabeledSignalSet& set, std::size_t spc, std::uint64_t seed) {
  if (spc == 0) throw ValidationError("spc must be at least 1");
  auto by_class = set.indices_by_class();
  std::vector<std::size_t> picked;
  picked.reserve(spc * by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < spc)
      throw ValidationError("class '" + set.class_names()[c] + "' has " +
                            std::to_string(idx.size()) + " records, fewer than spc=" +
                            std::to_string(spc));
    auto rng = make_rng(seed, {stream_tag::init, c});
    std::shuffle(idx.begin(), idx.end(), rng);
    picked.insert(picked.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(spc));
  }
  return SyntheticSet(set.subset(picked), spc);
}

}  // namespace sigdistill
