#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "doctest.h"
#include "sigdistill/dataio.hpp"
#include "sigdistill/error.hpp"
#include "support/fixtures.hpp"

using namespace sigdistill;
using sigdistill::testing::random_set;
using sigdistill::testing::TempDir;

namespace {

constexpr std::size_t kHeader = 64;

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t read_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

ParseError::Kind decode_error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_sigds(bytes);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("decode accepted a malformed file");
  return ParseError::Kind::config;
}

// Multiset of records keyed by their exact bytes.
std::multiset<std::vector<std::uint8_t>> record_keys(const LabeledSignalSet& s) {
  std::multiset<std::vector<std::uint8_t>> keys;
  for (const auto& r : s.records()) {
    std::vector<std::uint8_t> k(sizeof(float) * 2 * r.i_channel.size() + sizeof(std::size_t));
    std::memcpy(k.data(), r.i_channel.data(), sizeof(float) * r.i_channel.size());
    std::memcpy(k.data() + sizeof(float) * r.i_channel.size(), r.q_channel.data(),
                sizeof(float) * r.q_channel.size());
    std::memcpy(k.data() + sizeof(float) * 2 * r.i_channel.size(), &r.label, sizeof(std::size_t));
    keys.insert(std::move(k));
  }
  return keys;
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("record invariants are enforced on add") {
    LabeledSignalSet set({"A", "B"}, 4);
    SignalRecord ok{{1, 2, 3, 4}, {0, 0, 0, 0}, 1, std::nullopt};
    set.add(ok);
    CHECK(set.size() == 1);

    auto short_rec = ok;
    short_rec.q_channel.pop_back();
    CHECK_THROWS_AS(set.add(short_rec), ValidationError);

    auto bad_label = ok;
    bad_label.label = 2;
    CHECK_THROWS_AS(set.add(bad_label), ValidationError);

    auto nan_rec = ok;
    nan_rec.i_channel[2] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(set.add(nan_rec), ValidationError);

    auto inf_rec = ok;
    inf_rec.q_channel[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(set.add(inf_rec), ValidationError);
  }

  TEST_CASE("class names must be unique and non-empty") {
    CHECK_THROWS_AS(LabeledSignalSet({"A", "A"}, 4), ValidationError);
    CHECK_THROWS_AS(LabeledSignalSet({"A", ""}, 4), ValidationError);
    CHECK_THROWS_AS(LabeledSignalSet({"A"}, 0), ValidationError);
  }

  TEST_CASE("empty set encodes to header plus class table") {
    LabeledSignalSet set({"BPSK"}, 128);
    const auto bytes = encode_sigds(set);
    CHECK(bytes.size() == kHeader + 2 + 4);
    CHECK(std::memcmp(bytes.data(), "SIGD", 4) == 0);
    CHECK(read_u16(bytes, 4) == 1);
    CHECK(read_u16(bytes, 6) == 2);
    CHECK(read_u32(bytes, 8) == 128);
    CHECK(read_u32(bytes, 12) == 0);
    CHECK(read_u16(bytes, 16) == 1);
    for (std::size_t i = 18; i < kHeader; ++i) CHECK(bytes[i] == 0);
    CHECK(read_u16(bytes, 64) == 4);
    const auto back = decode_sigds(bytes);
    CHECK(back.empty());
    CHECK(back.class_names() == std::vector<std::string>{"BPSK"});
    CHECK(back.samples_per_channel() == 128);
  }

  TEST_CASE("payload size follows from the layout") {
    LabeledSignalSet set({"AB"}, 4);
    set.add({{1, 2, 3, 4}, {5, 6, 7, 8}, 0, 3});
    set.add({{0, 0, 0, 0}, {1, 1, 1, 1}, 0, std::nullopt});
    const auto bytes = encode_sigds(set);
    const std::size_t table = 2 + 2;
    const std::size_t per_record_meta = 2 + 2;
    const std::size_t sample_bytes = bytes.size() - kHeader - table - 2 * per_record_meta;
    CHECK(sample_bytes == 2 * 2 * 4 * 4);

    // First record: label, snr, then I samples as little-endian f32.
    const std::size_t rec = kHeader + table;
    CHECK(read_u16(bytes, rec) == 0);
    CHECK(static_cast<std::int16_t>(read_u16(bytes, rec + 2)) == 3);
    float first;
    const std::uint32_t bits = read_u32(bytes, rec + 4);
    std::memcpy(&first, &bits, 4);
    CHECK(first == 1.0f);
    // Absent snr is the i16 minimum.
    const std::size_t rec2 = rec + per_record_meta + 2 * 4 * 4;
    CHECK(static_cast<std::int16_t>(read_u16(bytes, rec2 + 2)) == -32768);
  }

  TEST_CASE("save then load is bit-exact") {
    TempDir dir("dataio");
    auto set = random_set(3, 7, 16, 11);
    // Values that only survive a bit-exact path.
    SignalRecord odd{std::vector<float>(16, -0.0f), std::vector<float>(16, 1e-38f), 2, -32767};
    odd.i_channel[3] = std::numeric_limits<float>::denorm_min();
    set.add(odd);
    save_sigds(set, dir / "a.sigds");
    const auto back = load_sigds(dir / "a.sigds");
    CHECK(bit_equal(set, back));
    CHECK(back[set.size() - 1].snr_db == -32767);
    CHECK_FALSE(back[1].snr_db.has_value());

    save_sigds(back, dir / "b.sigds");
    std::ifstream a(dir / "a.sigds", std::ios::binary), b(dir / "b.sigds", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  TEST_CASE("malformed files produce distinct parse errors") {
    auto set = random_set(2, 3, 8, 5);
    const auto good = encode_sigds(set);

    auto bad_magic = good;
    std::memcpy(bad_magic.data(), "XXXX", 4);
    CHECK(decode_error_kind(bad_magic) == ParseError::Kind::bad_magic);
    try {
      decode_sigds(bad_magic);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()) == "bad magic");
    }

    auto bad_version = good;
    bad_version[4] = 2;
    CHECK(decode_error_kind(bad_version) == ParseError::Kind::unsupported_version);

    auto bad_channels = good;
    bad_channels[6] = 3;
    CHECK(decode_error_kind(bad_channels) == ParseError::Kind::bad_channel_count);

    // Declare 3 records but keep payload for 2.
    LabeledSignalSet two({"A"}, 8);
    for (std::size_t i = 0; i < 2; ++i) {
      auto r = set[i];
      r.label = 0;
      two.add(std::move(r));
    }
    auto truncated = encode_sigds(two);
    truncated[12] = 3;
    CHECK(decode_error_kind(truncated) == ParseError::Kind::truncated_payload);
    try {
      decode_sigds(truncated);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()) == "truncated payload");
    }

    auto header_only = std::vector<std::uint8_t>(good.begin(), good.begin() + 20);
    CHECK(decode_error_kind(header_only) == ParseError::Kind::truncated_header);

    auto bad_label = good;
    const std::size_t first_record = kHeader + 2 * (2 + 2);
    bad_label[first_record] = 9;
    CHECK(decode_error_kind(bad_label) == ParseError::Kind::label_out_of_range);

    auto nan_sample = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan_sample.data() + first_record + 4, &nan, 4);
    CHECK(decode_error_kind(nan_sample) == ParseError::Kind::non_finite_sample);

    auto trailing = good;
    trailing.push_back(0);
    CHECK(decode_error_kind(trailing) == ParseError::Kind::trailing_bytes);
  }

  TEST_CASE("load of a missing file is a persistence error") {
    TempDir dir("dataio");
    CHECK_THROWS_AS(load_sigds(dir / "nope.sigds"), PersistenceError);
    CHECK_THROWS_AS(save_sigds(random_set(1, 1, 4, 1), dir / "missing" / "x.sigds"), PersistenceError);
  }

  TEST_CASE("split is stratified, disjoint and exhaustive") {
    const auto set = random_set(3, 100, 8, 21);
    const auto [train, test] = split_train_test(set, 0.2, 42);
    CHECK(train.class_counts() == std::vector<std::size_t>{80, 80, 80});
    CHECK(test.class_counts() == std::vector<std::size_t>{20, 20, 20});

    auto all = record_keys(set);
    auto tr = record_keys(train);
    auto te = record_keys(test);
    std::multiset<std::vector<std::uint8_t>> joined = tr;
    joined.insert(te.begin(), te.end());
    CHECK(joined == all);
    std::vector<std::vector<std::uint8_t>> common;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(common));
    CHECK(common.empty());
  }

  TEST_CASE("split keeps one record per side at the smallest legal size") {
    const auto set = random_set(2, 2, 4, 3);
    const auto [train, test] = split_train_test(set, 0.5, 1);
    CHECK(train.class_counts() == std::vector<std::size_t>{1, 1});
    CHECK(test.class_counts() == std::vector<std::size_t>{1, 1});
    const auto [tr2, te2] = split_train_test(set, 0.01, 1);
    CHECK(te2.class_counts() == std::vector<std::size_t>{1, 1});
    CHECK_THROWS_AS(split_train_test(random_set(2, 1, 4, 3), 0.5, 1), ValidationError);
    CHECK_THROWS_AS(split_train_test(set, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(split_train_test(set, 1.0, 1), ValidationError);
  }

  TEST_CASE("split is deterministic per seed") {
    const auto set = random_set(2, 50, 8, 4);
    const auto a = split_train_test(set, 0.3, 9);
    const auto b = split_train_test(set, 0.3, 9);
    CHECK(bit_equal(a.first, b.first));
    CHECK(bit_equal(a.second, b.second));
    const auto c = split_train_test(set, 0.3, 10);
    CHECK_FALSE(bit_equal(a.second, c.second));
  }

  TEST_CASE("take_per_class histogram is uniform") {
    const auto set = random_set(11, 30, 8, 8);
    const auto s = take_per_class(set, 10, 3);
    CHECK(s.base().size() == 110);
    CHECK(s.spc() == 10);
    for (auto n : s.base().class_counts()) CHECK(n == 10);
    CHECK_THROWS_AS(take_per_class(set, 31, 3), ValidationError);
  }

  TEST_CASE("take_per_class with spc equal to class size takes every record") {
    const auto set = random_set(3, 12, 8, 2);
    const auto s = take_per_class(set, 12, 5);
    CHECK(record_keys(s.base()) == record_keys(set));
  }

  TEST_CASE("take_per_class selections differ across seeds") {
    const auto set = random_set(1, 1000, 4, 6);
    auto selected = [&](std::uint64_t seed) {
      std::multiset<std::vector<std::uint8_t>> keys = record_keys(take_per_class(set, 10, seed).base());
      return keys;
    };
    int identical = 0;
    for (std::uint64_t p = 0; p < 20; ++p) identical += selected(2 * p) == selected(2 * p + 1);
    CHECK(identical == 0);
    CHECK(bit_equal(take_per_class(set, 10, 77).base(), take_per_class(set, 10, 77).base()));
  }

  TEST_CASE("synthetic set requires exactly spc per class") {
    auto set = random_set(2, 3, 4, 1);
    CHECK_NOTHROW(SyntheticSet(set, 3));
    CHECK_THROWS_AS(SyntheticSet(set, 2), ValidationError);
  }
}
