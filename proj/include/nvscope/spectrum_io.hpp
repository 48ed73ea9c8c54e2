#pragma once

// Spectrum CSV persistence.
//
//   # version=1
//   # start_mhz=2614
//   # stop_mhz=3126
//   # step_mhz=4
//   # n_avg=6
//   # settle_ms=2
//   # source=simulated
//   # baseline_applied=false
//   # timestamp=2025-04-14T00:00:00Z
//   # device=simulator fw=1 adc_bits=12 vref_mv=3000
//   f_mhz,signal_mv,n_avg
//   2614.000,199.927,6
//
// Frequencies are written with exactly three decimals (whole kHz, lossless);
// signals with 6 significant digits. settle_ms and device are optional on load.

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "nvscope/spectrum.hpp"

namespace nvscope {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr int kSpectrumCsvVersion = 1;

void write_spectrum_csv(const Spectrum& spec, std::ostream& os);
std::string spectrum_to_csv(const Spectrum& spec);

/// Throws ParseError (with line number) or InvariantViolation.
Spectrum read_spectrum_csv(std::istream& is);
Spectrum spectrum_from_csv(const std::string& text);

/// File variants; I/O failures throw std::runtime_error naming the path.
void save_spectrum(const Spectrum& spec, const std::string& path);
Spectrum load_spectrum(const std::string& path);

/// Formats a value to 6 significant digits exactly as the CSV writer does.
std::string format_signal(double mv);

}  // namespace nvscope
