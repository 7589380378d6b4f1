#include "sigdistill/siggen.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "sigdistill/error.hpp"

namespace sigdistill {

namespace {

using cd = std::complex<double>;

std::array<cd, 2> make_bpsk() { return {cd{1, 0}, cd{-1, 0}}; }

std::array<cd, 4> make_qpsk() {
  std::array<cd, 4> pts;
  const double a = 1.0 / std::numbers::sqrt2;
  for (int s = 0; s < 4; ++s) pts[s] = {(s & 1) ? -a : a, (s & 2) ? -a : a};
  return pts;
}

std::array<cd, 8> make_psk8() {
  std::array<cd, 8> pts;
  for (int pos = 0; pos < 8; ++pos) {
    const int gray = pos ^ (pos >> 1);
    pts[gray] = std::polar(1.0, pos * std::numbers::pi / 4.0);
  }
  return pts;
}

// Gray-coded 4-level amplitude: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
constexpr std::array<double, 4> kGrayPam4 = {-3.0, -1.0, 3.0, 1.0};

std::array<cd, 4> make_pam4() {
  std::array<cd, 4> pts;
  const double scale = 1.0 / std::sqrt(5.0);
  for (int s = 0; s < 4; ++s) pts[s] = {kGrayPam4[s] * scale, 0.0};
  return pts;
}

std::array<cd, 16> make_qam16() {
  std::array<cd, 16> pts;
  const double scale = 1.0 / std::sqrt(10.0);
  for (int s = 0; s < 16; ++s) pts[s] = {kGrayPam4[s & 3] * scale, kGrayPam4[s >> 2] * scale};
  return pts;
}

const auto kBpsk = make_bpsk();
const auto kQpsk = make_qpsk();
const auto kPsk8 = make_psk8();
const auto kPam4 = make_pam4();
const auto kQam16 = make_qam16();

}  // namespace

std::string_view modulation_name(Modulation m) {
  switch (m) {
    case Modulation::bpsk: return "BPSK";
    case Modulation::qpsk: return "QPSK";
    case Modulation::psk8: return "8PSK";
    case Modulation::pam4: return "PAM4";
    case Modulation::qam16: return "QAM16";
    case Modulation::cpfsk: return "CPFSK";
  }
  return "?";
}

Modulation parse_modulation(std::string_view name) {
  for (auto m : all_modulations())
    if (modulation_name(m) == name) return m;
  throw ValidationError("unknown modulation '" + std::string(name) +
                        "' (expected BPSK, QPSK, 8PSK, PAM4, QAM16 or CPFSK)");
}

std::vector<Modulation> all_modulations() {
  return {Modulation::bpsk, Modulation::qpsk, Modulation::psk8,
          Modulation::pam4, Modulation::qam16, Modulation::cpfsk};
}

std::size_t alphabet_size(Modulation m) {
  switch (m) {
    case Modulation::bpsk: return 2;
    case Modulation::qpsk: return 4;
    case Modulation::psk8: return 8;
    case Modulation::pam4: return 4;
    case Modulation::qam16: return 16;
    case Modulation::cpfsk: return 2;
  }
  return 0;
}

bool is_linear(Modulation m) { return m != Modulation::cpfsk; }

std::span<const std::complex<double>> constellation(Modulation m) {
  switch (m) {
    case Modulation::bpsk: return kBpsk;
    case Modulation::qpsk: return kQpsk;
    case Modulation::psk8: return kPsk8;
    case Modulation::pam4: return kPam4;
    case Modulation::qam16: return kQam16;
    case Modulation::cpfsk: return {};
  }
  return {};
}

void GenConfig::validate() const {
  if (schemes.empty()) throw ValidationError("at least one modulation scheme is required");
  if (n_per_class == 0) throw ValidationError("n_per_class must be positive");
  if (samples_per_symbol == 0) throw ValidationError("samples_per_symbol must be positive");
  if (samples_per_record == 0 || samples_per_record % samples_per_symbol != 0)
    throw ValidationError("N=" + std::to_string(samples_per_record) +
                          " must be a positive multiple of samples_per_symbol=" +
                          std::to_string(samples_per_symbol));
  if (snr_db_step <= 0) throw ValidationError("snr_db_step must be positive");
  if (snr_db_min > snr_db_max) throw ValidationError("snr range is empty");
  for (std::size_t i = 0; i < schemes.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (schemes[i] == schemes[j])
        throw ValidationError("duplicate scheme " + std::string(modulation_name(schemes[i])));
}

std::vector<int> GenConfig::snr_grid() const {
  std::vector<int> grid;
  for (int s = snr_db_min; s <= snr_db_max; s += snr_db_step) grid.push_back(s);
  return grid;
}

SignalRecord modulate(Modulation m, std::span<const int> symbols, std::size_t samples_per_symbol) {
  if (samples_per_symbol == 0) throw ValidationError("samples_per_symbol must be positive");
  const auto alphabet = static_cast<int>(alphabet_size(m));
  for (int s : symbols)
    if (s < 0 || s >= alphabet)
      throw ValidationError("symbol " + std::to_string(s) + " outside the " +
                            std::string(modulation_name(m)) + " alphabet of size " +
                            std::to_string(alphabet));

  SignalRecord rec;
  const std::size_t n = symbols.size() * samples_per_symbol;
  rec.i_channel.resize(n);
  rec.q_channel.resize(n);

  if (is_linear(m)) {
    const auto points = constellation(m);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
      const auto p = points[static_cast<std::size_t>(symbols[k])];
      for (std::size_t j = 0; j < samples_per_symbol; ++j) {
        rec.i_channel[k * samples_per_symbol + j] = static_cast<float>(p.real());
        rec.q_channel[k * samples_per_symbol + j] = static_cast<float>(p.imag());
      }
    }
    return rec;
  }

  // Binary CPFSK: phase advances by pi*h*d/sps per sample, d in {-1, +1}.
  const double step = std::numbers::pi * kCpfskModulationIndex / static_cast<double>(samples_per_symbol);
  double phase = 0.0;
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const double d = symbols[k] == 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < samples_per_symbol; ++j) {
      phase += d * step;
      rec.i_channel[k * samples_per_symbol + j] = static_cast<float>(std::cos(phase));
      rec.q_channel[k * samples_per_symbol + j] = static_cast<float>(std::sin(phase));
    }
  }
  return rec;
}

double signal_power(const SignalRecord& record) {
  if (record.i_channel.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t n = 0; n < record.i_channel.size(); ++n) {
    const double i = record.i_channel[n];
    const double q = record.q_channel[n];
    acc += i * i + q * q;
  }
  return acc / static_cast<double>(record.i_channel.size());
}

SignalRecord add_awgn(const SignalRecord& record, int snr_db, Rng& rng) {
  if (snr_db == kNoiselessSnr) return record;
  const double ps = signal_power(record);
  if (!(ps > 0.0)) throw ValidationError("cannot add AWGN at a fixed SNR to a zero-power record");

  const double noise_power = ps / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
  SignalRecord out = record;
  for (std::size_t n = 0; n < out.i_channel.size(); ++n) {
    out.i_channel[n] = static_cast<float>(out.i_channel[n] + gauss(rng));
    out.q_channel[n] = static_cast<float>(out.q_channel[n] + gauss(rng));
  }
  out.snr_db = snr_db;
  return out;
}

LabeledSignalSet generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  std::vector<std::string> names;
  for (auto m : cfg.schemes) names.emplace_back(modulation_name(m));
  LabeledSignalSet set(std::move(names), cfg.samples_per_record);
  set.reserve(cfg.schemes.size() * cfg.n_per_class);

  const auto grid = cfg.snr_grid();
  const std::size_t n_symbols = cfg.samples_per_record / cfg.samples_per_symbol;
  std::vector<int> symbols(n_symbols);
  for (std::size_t c = 0; c < cfg.schemes.size(); ++c) {
    const auto m = cfg.schemes[c];
    for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
      auto rng = make_rng(cfg.seed, {stream_tag::generate, c, i});
      std::uniform_int_distribution<int> sym(0, static_cast<int>(alphabet_size(m)) - 1);
      std::uniform_int_distribution<std::size_t> snr_pick(0, grid.size() - 1);
      for (auto& s : symbols) s = sym(rng);
      const int snr = grid[snr_pick(rng)];
      auto rec = add_awgn(modulate(m, symbols, cfg.samples_per_symbol), snr, rng);
      rec.label = c;
      set.add(std::move(rec));
    }
  }
  return set;
}

}  // namespace sigdistill
