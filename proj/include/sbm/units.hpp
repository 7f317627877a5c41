#pragma once

#include <numbers>

// All rates and amplitudes are angular (rad/s) inside the library. Users quote
// values as f = x/2pi in MHz or kHz; these helpers are the only conversion point.
namespace sbm::units
{

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double FromMHz(double mhz) { return kTwoPi * 1.0e6 * mhz; }
constexpr double FromKHz(double khz) { return kTwoPi * 1.0e3 * khz; }
constexpr double ToMHz(double rad_per_s) { return rad_per_s / (kTwoPi * 1.0e6); }
constexpr double ToKHz(double rad_per_s) { return rad_per_s / (kTwoPi * 1.0e3); }

}  // namespace sbm::units
