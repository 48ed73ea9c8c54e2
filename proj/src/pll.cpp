#include "nvscope/pll.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "nvscope/spectrum.hpp"

namespace nvscope::pll {

namespace {

__extension__ using u128 = unsigned __int128;
__extension__ using i128 = __int128;

std::string khz_str(double khz) {
    std::ostringstream os;
    os.precision(12);
    os << khz;
    return os.str();
}

// Exact output in Hz for the given fields, rounded half-up.
std::uint64_t output_hz(std::uint64_t pfd_num, std::uint64_t pfd_den, std::uint32_t int_n, std::uint32_t frac,
                        std::uint32_t mod, std::uint32_t exp) {
    const u128 numer = static_cast<u128>(pfd_num) * (static_cast<u128>(int_n) * mod + frac);
    const u128 denom = static_cast<u128>(pfd_den) * mod * (u128{1} << exp);
    return static_cast<std::uint64_t>((2 * numer + denom) / (2 * denom));
}

double pfd_khz(std::uint64_t num, std::uint64_t den) {
    return static_cast<double>(num) / static_cast<double>(den) / 1000.0;
}

constexpr std::uint32_t field(std::uint32_t word, unsigned shift, unsigned bits) {
    return (word >> shift) & ((1u << bits) - 1u);
}

}  // namespace

void PllConfig::validate() const {
    if (!std::isfinite(ref_mhz) || ref_mhz <= 0.0) throw PllError(PllErrorKind::InvalidConfig, "ref_mhz must be > 0");
    if (r_counter < 1 || r_counter > 1023)
        throw PllError(PllErrorKind::InvalidConfig, "r_counter must be in [1, 1023]");
    if (!(min_out_khz > 0.0) || !(max_out_khz >= min_out_khz))
        throw PllError(PllErrorKind::InvalidConfig, "output range must satisfy 0 < min_out_khz <= max_out_khz");
    if (f_pfd_khz() > kMaxPfdMhz * 1000.0)
        throw PllError(PllErrorKind::InvalidConfig, "PFD frequency " + khz_str(f_pfd_khz()) + " kHz exceeds 32 MHz");
}

std::uint64_t PllConfig::ref_hz() const { return static_cast<std::uint64_t>(std::llround(ref_mhz * 1e6)); }

double PllConfig::f_pfd_khz() const { return pfd_khz(pfd_numerator_hz(), pfd_denominator()); }

void FrequencyPlan::validate() const {
    if (mod < 2 || mod > kModMax) throw PllError(PllErrorKind::Unrepresentable, "MOD outside [2, 4095]");
    if (frac >= mod) throw PllError(PllErrorKind::Unrepresentable, "FRAC must be < MOD");
    if (frac > 0 && std::gcd(frac, mod) != 1) throw PllError(PllErrorKind::Unrepresentable, "FRAC/MOD not reduced");
    if (int_n < kIntMin || int_n > kIntMax) throw PllError(PllErrorKind::Unrepresentable, "INT outside [23, 65535]");
    if (rf_div_exp > kMaxRfDivExp) throw PllError(PllErrorKind::Unrepresentable, "RF divider exponent > 6");
    const double vco_khz = f_vco_khz();
    // one hertz of slack for the rounding in f_actual_khz
    if (vco_khz < kVcoMinHz / 1000.0 - 0.001 * rf_divider() || vco_khz > kVcoMaxHz / 1000.0 + 0.001 * rf_divider())
        throw PllError(PllErrorKind::Unrepresentable, "VCO frequency outside [2.2, 4.4] GHz");
}

FrequencyPlan plan_frequency(const PllConfig& cfg, double f_target_khz) {
    cfg.validate();
    if (!std::isfinite(f_target_khz) || f_target_khz < cfg.min_out_khz || f_target_khz > cfg.max_out_khz) {
        throw PllError(PllErrorKind::OutOfRange, "target " + khz_str(f_target_khz) + " kHz outside device range [" +
                                                     khz_str(cfg.min_out_khz / 1000.0) + " MHz, " +
                                                     khz_str(cfg.max_out_khz / 1000.0) + " MHz]");
    }
    const auto target_hz = static_cast<std::uint64_t>(std::llround(f_target_khz * 1000.0));

    std::uint32_t exp = 0;
    while (exp < kMaxRfDivExp && (target_hz << exp) < kVcoMinHz) ++exp;
    const std::uint64_t vco_hz = target_hz << exp;
    if (vco_hz < kVcoMinHz || vco_hz > kVcoMaxHz) {
        throw PllError(PllErrorKind::OutOfRange,
                       "target " + khz_str(f_target_khz) + " kHz cannot place the VCO in [2.2, 4.4] GHz");
    }

    // N = vco / f_pfd = vco * den / num, as an exact rational
    const std::uint64_t num = cfg.pfd_numerator_hz();
    const std::uint64_t den = cfg.pfd_denominator();
    const u128 scaled = static_cast<u128>(vco_hz) * den;
    u128 int_part = scaled / num;
    const std::uint64_t rem = static_cast<std::uint64_t>(scaled % num);

    std::uint64_t frac = rem;
    std::uint64_t mod = num;
    if (frac == 0) {
        mod = 2;
    } else {
        const std::uint64_t g = std::gcd(frac, mod);
        frac /= g;
        mod /= g;
        if (mod > kModMax) {
            // best approximation with MOD = 4095, rounded to nearest
            frac = static_cast<std::uint64_t>((static_cast<u128>(rem) * kModMax * 2 + num) / (2 * static_cast<u128>(num)));
            mod = kModMax;
            if (frac == kModMax) {
                ++int_part;
                frac = 0;
            }
            if (frac == 0) {
                mod = 2;
            } else {
                const std::uint64_t g2 = std::gcd(frac, mod);
                frac /= g2;
                mod /= g2;
            }
        }
        if (mod < 2) mod = 2;  // unreachable for a reduced proper fraction, kept for the MOD >= 2 invariant
    }

    if (int_part < kIntMin || int_part > kIntMax) {
        std::ostringstream os;
        os << "target " << khz_str(f_target_khz) << " kHz needs INT=" << static_cast<std::uint64_t>(int_part)
           << ", outside [23, 65535] for f_PFD=" << khz_str(cfg.f_pfd_khz()) << " kHz";
        throw PllError(PllErrorKind::Unrepresentable, os.str());
    }

    FrequencyPlan plan;
    plan.int_n = static_cast<std::uint32_t>(int_part);
    plan.frac = static_cast<std::uint32_t>(frac);
    plan.mod = static_cast<std::uint32_t>(mod);
    plan.rf_div_exp = exp;
    plan.f_pfd_khz = cfg.f_pfd_khz();
    plan.f_target_khz = f_target_khz;
    plan.f_actual_khz = output_hz(num, den, plan.int_n, plan.frac, plan.mod, exp) / 1000.0;
    plan.validate();
    return plan;
}

double exact_error_hz(const PllConfig& cfg, const FrequencyPlan& plan) {
    const auto target_hz = static_cast<std::int64_t>(std::llround(plan.f_target_khz * 1000.0));
    const i128 denom = static_cast<i128>(cfg.pfd_denominator()) * plan.mod * (i128{1} << plan.rf_div_exp);
    const i128 numer = static_cast<i128>(cfg.pfd_numerator_hz()) * (static_cast<i128>(plan.int_n) * plan.mod + plan.frac) -
                       static_cast<i128>(target_hz) * denom;
    return static_cast<double>(numer) / static_cast<double>(denom);
}

std::uint32_t band_select_divider(const PllConfig& cfg) {
    const u128 num = cfg.pfd_numerator_hz();
    const u128 den = static_cast<u128>(cfg.pfd_denominator()) * 125'000;
    auto div = static_cast<std::uint64_t>((num + den - 1) / den);
    if (div < 1) div = 1;
    if (div > 255) div = 255;
    return static_cast<std::uint32_t>(div);
}

RegisterSet encode_registers(const FrequencyPlan& plan, const PllConfig& cfg) {
    plan.validate();
    const bool integer_mode = plan.frac == 0;
    const std::uint32_t prescaler = plan.int_n >= 75 ? 1u : 0u;  // 8/9 above INT 75, else 4/5

    RegisterSet r;
    r[0] = (plan.int_n << 15) | (plan.frac << 3) | 0u;

    r[1] = (prescaler << 27)  // prescaler
           | (1u << 15)       // phase value (recommended 1)
           | (plan.mod << 3) | 1u;

    r[2] = (0u << 29)                             // low-noise mode
           | (0u << 26)                           // MUXOUT three-state
           | ((cfg.doubler ? 1u : 0u) << 25)      // reference doubler
           | ((cfg.rdiv2 ? 1u : 0u) << 24)        // reference divide-by-2
           | ((cfg.r_counter & 0x3FFu) << 14)     // R counter
           | (7u << 9)                            // charge pump 2.5 mA
           | ((integer_mode ? 1u : 0u) << 8)      // LDF: INT-N count in integer mode
           | ((integer_mode ? 1u : 0u) << 7)      // LDP: 6 ns in integer mode
           | (1u << 6)                            // PD polarity positive
           | 2u;

    r[3] = (150u << 3) | 3u;  // clock divider value, all modes off

    r[4] = (1u << 23)                                        // feedback from fundamental
           | (plan.rf_div_exp << 20)                         // RF divider select
           | (band_select_divider(cfg) << 12)                // band select clock divider
           | (1u << 5)                                       // RF output enabled
           | (3u << 3)                                       // +5 dBm
           | 4u;

    r[5] = (1u << 22)    // LD pin: digital lock detect
           | (3u << 19)  // reserved, must be 11
           | 5u;
    return r;
}

DecodedFields decode_fields(const RegisterSet& regs) {
    for (std::uint32_t k = 0; k < 6; ++k) {
        if ((regs[k] & 7u) != k)
            throw PllError(PllErrorKind::MalformedRegisters, "register R" + std::to_string(k) + " has wrong address bits");
    }
    DecodedFields d{};
    d.int_n = field(regs[0], 15, 16);
    d.frac = field(regs[0], 3, 12);
    d.mod = field(regs[1], 3, 12);
    d.prescaler = field(regs[1], 27, 1);
    d.r_counter = field(regs[2], 14, 10);
    d.doubler = field(regs[2], 25, 1);
    d.rdiv2 = field(regs[2], 24, 1);
    d.rf_div_exp = field(regs[4], 20, 3);
    d.band_select_div = field(regs[4], 12, 8);
    return d;
}

double decode_frequency(const RegisterSet& regs, const PllConfig& cfg) {
    const DecodedFields d = decode_fields(regs);
    if (d.mod < 2) throw PllError(PllErrorKind::MalformedRegisters, "MOD < 2");
    if (d.frac >= d.mod) throw PllError(PllErrorKind::MalformedRegisters, "FRAC >= MOD");
    if (d.r_counter == 0) throw PllError(PllErrorKind::MalformedRegisters, "R counter is zero");
    if (d.rf_div_exp > kMaxRfDivExp) throw PllError(PllErrorKind::MalformedRegisters, "RF divider select > 6");
    const std::uint64_t num = cfg.ref_hz() * (d.doubler ? 2 : 1);
    const std::uint64_t den = static_cast<std::uint64_t>(d.r_counter) * (d.rdiv2 ? 2 : 1);
    return output_hz(num, den, d.int_n, d.frac, d.mod, d.rf_div_exp) / 1000.0;
}

std::vector<SweepTableEntry> build_sweep_table(const PllConfig& cfg, const SweepPlan& plan) {
    plan.validate();
    std::vector<SweepTableEntry> table;
    table.reserve(plan.point_count());
    for (const std::uint32_t f_khz : plan.frequencies_khz()) {
        FrequencyPlan fp;
        try {
            fp = plan_frequency(cfg, f_khz);
        } catch (const PllError& e) {
            throw PllError(e.kind(), "sweep frequency " + std::to_string(f_khz) + " kHz: " + e.what());
        }
        SweepTableEntry entry{f_khz, encode_registers(fp, cfg)};
        const double decoded = decode_frequency(entry.regs, cfg);
        if (std::abs(decoded - f_khz) >= 1.0) {
            throw PllError(PllErrorKind::Unrepresentable,
                           "sweep frequency " + std::to_string(f_khz) + " kHz decodes to " + khz_str(decoded) + " kHz");
        }
        table.push_back(entry);
    }
    return table;
}

namespace {
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}
}  // namespace

std::vector<std::uint8_t> serialize_sweep_table(std::span<const SweepTableEntry> entries) {
    std::vector<std::uint8_t> out;
    out.reserve(kSweepHeaderBytes + entries.size() * kSweepEntryBytes);
    for (const char c : {'N', 'V', 'S', 'W'}) out.push_back(static_cast<std::uint8_t>(c));
    put_u16(out, kSweepTableVersion);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put_u32(out, e.f_khz);
        for (const std::uint32_t w : e.regs.words) put_u32(out, w);
    }
    return out;
}

std::vector<SweepTableEntry> parse_sweep_table(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kSweepHeaderBytes || bytes[0] != 'N' || bytes[1] != 'V' || bytes[2] != 'S' || bytes[3] != 'W')
        throw PllError(PllErrorKind::MalformedTable, "sweep table: bad magic");
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
    if (version != kSweepTableVersion)
        throw PllError(PllErrorKind::MalformedTable, "sweep table: unsupported version " + std::to_string(version));
    const std::uint32_t count = get_u32(bytes, 6);
    if (bytes.size() != kSweepHeaderBytes + static_cast<std::size_t>(count) * kSweepEntryBytes)
        throw PllError(PllErrorKind::MalformedTable, "sweep table: size does not match entry count");
    std::vector<SweepTableEntry> entries(count);
    std::size_t at = kSweepHeaderBytes;
    for (auto& e : entries) {
        e.f_khz = get_u32(bytes, at);
        at += 4;
        for (auto& w : e.regs.words) {
            w = get_u32(bytes, at);
            at += 4;
        }
    }
    return entries;
}

}  // namespace nvscope::pll
