#pragma once

#include <complex>
#include <optional>
#include <vector>

namespace sbm
{

using Complex = std::complex<double>;

/// Two-level scatterer. Rates in rad/s.
struct AtomParams
{
  double gamma1 = 0.0;     ///< radiative relaxation into the line
  double gamma1_nr = 0.0;  ///< non-radiative relaxation
  double gamma_phi = 0.0;  ///< pure dephasing
  std::optional<double> omega01;        ///< only used for absolute-frequency reporting
  std::optional<double> dipole_moment;  ///< Rabi-to-voltage reporting constant
};

/// Two coherent tones at omega_d -/+ half_splitting. Amplitudes are Rabi
/// frequencies (mu V / hbar) in rad/s.
struct BichromaticDrive
{
  double omega_minus_amp = 0.0;
  double omega_plus_amp = 0.0;
  double central_detuning = 0.0;  ///< omega_d - omega01
  double half_splitting = 0.0;
};

/// Derived quantities of the stationary two-tone solution.
///
/// `coherence_prefactor` is the finite combination sin(theta)/Lambda, which
/// equals lambda*Gamma1 / (2*(Gamma1|lambda|^2 + Gamma2(Om-^2 + Om+^2))).
/// Lambda alone diverges at single-tone drive and is never formed.
struct MixingAngles
{
  Complex lambda;
  double theta = 0.0;
  double y = 0.0;  ///< -tan(theta/2)
  Complex coherence_prefactor;
  double gamma1 = 0.0;  ///< carried along to scale <sigma^-> into a scattered Rabi amplitude
};

/// Bloch vector in the frame rotating at the central drive frequency.
struct BlochState
{
  Complex coherence;  ///< <sigma^->
  double inversion = -1.0;  ///< <sigma_z>; ground state is -1

  /// 4|s|^2 + w^2, equal to 1 for a pure state.
  double BlochNormSquared() const { return 4.0 * std::norm(coherence) + inversion * inversion; }
};

/// One harmonic of the scattered field.
/// Index n is the coefficient of exp(i n dw t) in the rotating-frame signal;
/// negative n lies on the side of the Omega_- tone.
struct SidebandEntry
{
  int index = 0;
  Complex amplitude;
};

enum class Side
{
  Minus = -1,
  Plus = +1,
};

constexpr int HarmonicIndex(int p, Side side) { return static_cast<int>(side) * (2 * p + 1); }

struct SidebandSpectrum
{
  std::vector<SidebandEntry> entries;  ///< sorted by index
  int p_max = 0;
  double tail_bound = 0.0;  ///< relative bound on the truncated remainder

  /// Amplitude at index n, or zero if n is odd but not stored.
  Complex At(int n) const;
  Complex At(int p, Side side) const { return At(HarmonicIndex(p, side)); }
};

/// Throws InvalidArgument unless gamma1 > 0, other rates >= 0, all finite.
void Validate(const AtomParams &atom);

/// Throws InvalidArgument for non-finite or negative amplitudes, both zero,
/// or a non-positive half splitting.
void Validate(const BichromaticDrive &drive);

/// Gamma2 = (Gamma1 + Gamma1_nr)/2 + gamma_phi.
double DephasingRate(const AtomParams &atom);

MixingAngles DeriveMixingAngles(const AtomParams &atom, const BichromaticDrive &drive);

}  // namespace sbm
