#pragma once

// ADF4351 fractional-N frequency planning and register packing.
//
//   RF_out = f_PFD * (INT + FRAC / MOD) / 2^rf_div_exp
//   f_PFD  = REF_in * (1 + doubler) / (R * (1 + rdiv2))
//
// Bitfield positions follow the ADF4351 datasheet register map.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvscope {
struct SweepPlan;
}

namespace nvscope::pll {

enum class PllErrorKind { InvalidConfig, OutOfRange, Unrepresentable, MalformedRegisters, MalformedTable };

class PllError : public std::runtime_error {
public:
    PllError(PllErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    PllErrorKind kind() const noexcept { return kind_; }

private:
    PllErrorKind kind_;
};

inline constexpr std::uint32_t kModMax = 4095;
inline constexpr std::uint32_t kIntMin = 23;
inline constexpr std::uint32_t kIntMax = 65535;
inline constexpr std::uint32_t kMaxRfDivExp = 6;
inline constexpr std::uint64_t kVcoMinHz = 2'200'000'000ULL;
inline constexpr std::uint64_t kVcoMaxHz = 4'400'000'000ULL;
inline constexpr double kMaxPfdMhz = 32.0;

struct PllConfig {
    double ref_mhz = 25.0;
    std::uint32_t r_counter = 1;
    bool doubler = false;
    bool rdiv2 = false;
    double min_out_khz = 35'000.0;
    double max_out_khz = 4'400'000.0;

    void validate() const;

    /// Reference in whole hertz; fractional-hertz references are not supported.
    std::uint64_t ref_hz() const;
    /// f_PFD = pfd_numerator_hz / pfd_denominator, kept rational so planning is exact.
    std::uint64_t pfd_numerator_hz() const { return ref_hz() * (doubler ? 2 : 1); }
    std::uint64_t pfd_denominator() const { return static_cast<std::uint64_t>(r_counter) * (rdiv2 ? 2 : 1); }
    double f_pfd_khz() const;
};

struct FrequencyPlan {
    std::uint32_t int_n = 0;
    std::uint32_t frac = 0;
    std::uint32_t mod = 2;
    std::uint32_t rf_div_exp = 0;
    double f_pfd_khz = 0.0;
    double f_target_khz = 0.0;
    double f_actual_khz = 0.0;  // realizable output, rounded to the nearest hertz

    std::uint32_t rf_divider() const { return 1u << rf_div_exp; }
    double f_vco_khz() const { return f_actual_khz * rf_divider(); }
    /// Checks the structural invariants (MOD, FRAC, INT and VCO ranges, reduced fraction).
    void validate() const;
};

struct RegisterSet {
    std::array<std::uint32_t, 6> words{};

    std::uint32_t& operator[](std::size_t k) { return words[k]; }
    std::uint32_t operator[](std::size_t k) const { return words[k]; }
    bool operator==(const RegisterSet&) const = default;
};

FrequencyPlan plan_frequency(const PllConfig& cfg, double f_target_khz);

/// Exact (unrounded) output minus target, in hertz, for a plan produced by plan_frequency.
double exact_error_hz(const PllConfig& cfg, const FrequencyPlan& plan);

/// Band-select clock divider: ceil(f_PFD / 125 kHz) clamped to the 8-bit field.
std::uint32_t band_select_divider(const PllConfig& cfg);

RegisterSet encode_registers(const FrequencyPlan& plan, const PllConfig& cfg);

/// Output frequency programmed by regs (kHz, rounded to the nearest hertz).
/// The reference comes from cfg; R, doubler and rdiv2 are read back from R2.
double decode_frequency(const RegisterSet& regs, const PllConfig& cfg);

// Field accessors for tests and tooling.
struct DecodedFields {
    std::uint32_t int_n, frac, mod, prescaler, r_counter, doubler, rdiv2, rf_div_exp, band_select_div;
};
DecodedFields decode_fields(const RegisterSet& regs);

struct SweepTableEntry {
    std::uint32_t f_khz = 0;
    RegisterSet regs;
    bool operator==(const SweepTableEntry&) const = default;
};

std::vector<SweepTableEntry> build_sweep_table(const PllConfig& cfg, const SweepPlan& plan);

// Binary table: "NVSW", u16 version, u32 count, then per entry u32 f_khz + 6 x u32 words.
// All integers little-endian.
inline constexpr std::uint16_t kSweepTableVersion = 1;
inline constexpr std::size_t kSweepHeaderBytes = 10;
inline constexpr std::size_t kSweepEntryBytes = 28;

std::vector<std::uint8_t> serialize_sweep_table(std::span<const SweepTableEntry> entries);
std::vector<SweepTableEntry> parse_sweep_table(std::span<const std::uint8_t> bytes);

}  // namespace nvscope::pll
