#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigdistill/dataio.hpp"
#include "sigdistill/rng.hpp"

namespace sigdistill {

enum class Modulation { bpsk, qpsk, psk8, pam4, qam16, cpfsk };

std::string_view modulation_name(Modulation m);
// Accepts the names produced by modulation_name ("BPSK", "8PSK", ...).
Modulation parse_modulation(std::string_view name);
std::vector<Modulation> all_modulations();

std::size_t alphabet_size(Modulation m);
bool is_linear(Modulation m);
// Gray-mapped unit-average-power alphabet. Empty for CPFSK.
std::span<const std::complex<double>> constellation(Modulation m);

inline constexpr double kCpfskModulationIndex = 0.5;
// Passed as snr_db to add_awgn to skip the noise stage.
inline constexpr int kNoiselessSnr = std::numeric_limits<int>::max();

struct GenConfig {
  std::vector<Modulation> schemes = all_modulations();
  std::size_t n_per_class = 1000;
  std::size_t samples_per_record = 128;
  std::size_t samples_per_symbol = 8;
  int snr_db_min = 10;
  int snr_db_max = 18;
  int snr_db_step = 2;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<int> snr_grid() const;
};

// Baseband waveform, rectangular pulses for linear schemes and continuous
// phase for CPFSK. Output has symbols.size() * samples_per_symbol samples per
// channel and label 0.
SignalRecord modulate(Modulation m, std::span<const int> symbols, std::size_t samples_per_symbol);

// Adds complex AWGN with per-complex-sample power P_signal / 10^(snr_db/10),
// split evenly between I and Q. Records snr_db on the output.
SignalRecord add_awgn(const SignalRecord& record, int snr_db, Rng& rng);

LabeledSignalSet generate_dataset(const GenConfig& cfg);

// Mean of I^2 + Q^2 over the record.
double signal_power(const SignalRecord& record);

}  // namespace sigdistill
