#include "sbm/analytic_mixing.hpp"

#include <cmath>
#include <string>

#include "sbm/errors.hpp"

namespace sbm
{

namespace
{

// tan(theta)/Lambda, finite for every admissible drive since theta < pi/2.
Complex SeriesPrefactor(const MixingAngles &angles)
{
  return angles.coherence_prefactor / std::cos(angles.theta);
}

// Coefficient of exp(i n dw t) in <sigma^-> for n = side*(2p+1).
Complex CoherenceHarmonic(const MixingAngles &angles, const BichromaticDrive &drive, int p,
                          Side side)
{
  const double co_rotating =
      side == Side::Minus ? drive.omega_minus_amp : drive.omega_plus_amp;
  const double counter = side == Side::Minus ? drive.omega_plus_amp : drive.omega_minus_amp;
  const double geometric = p == 0 ? 1.0 : std::pow(angles.y, p);
  return -SeriesPrefactor(angles) * geometric * (co_rotating + angles.y * counter);
}

}  // namespace

Complex ReflectionCoefficient(const AtomParams &atom, double rabi_amp, double detuning)
{
  Validate(atom);
  Require(std::isfinite(rabi_amp) && rabi_amp >= 0.0, "rabi_amp must be finite and >= 0");
  Require(std::isfinite(detuning), "detuning must be finite");
  const double g1 = atom.gamma1;
  const double g2 = DephasingRate(atom);
  const Complex lambda(g2, detuning);
  return 0.5 * lambda * g1 / (std::norm(lambda) + rabi_amp * rabi_amp * g2 / g1);
}

ReflectionPoint EvaluateReflection(const AtomParams &atom, double rabi_amp, double detuning)
{
  const Complex r = ReflectionCoefficient(atom, rabi_amp, detuning);
  return {detuning, r, 1.0 - r};
}

Complex StationaryCoherence(const MixingAngles &angles, const BichromaticDrive &drive,
                            double time, double epsilon)
{
  const double phase = drive.half_splitting * time;
  const double denom = 1.0 + std::sin(angles.theta) * std::cos(2.0 * phase);
  if (!(denom >= epsilon))
  {
    Fail(ErrorKind::DegenerateEvaluation,
         "stationary coherence denominator " + std::to_string(denom) + " below epsilon");
  }
  const Complex envelope = drive.omega_minus_amp * std::polar(1.0, -phase) +
                           drive.omega_plus_amp * std::polar(1.0, phase);
  return -angles.coherence_prefactor * envelope / denom;
}

SidebandSpectrum SidebandSeriesCoherence(const MixingAngles &angles,
                                         const BichromaticDrive &drive, int p_max)
{
  Require(p_max >= 0, "p_max must be >= 0");
  SidebandSpectrum spec;
  spec.p_max = p_max;
  spec.entries.reserve(2 * static_cast<std::size_t>(p_max) + 2);
  for (int p = p_max; p >= 0; --p)
  {
    spec.entries.push_back({HarmonicIndex(p, Side::Minus),
                            CoherenceHarmonic(angles, drive, p, Side::Minus)});
  }
  for (int p = 0; p <= p_max; ++p)
  {
    spec.entries.push_back(
        {HarmonicIndex(p, Side::Plus), CoherenceHarmonic(angles, drive, p, Side::Plus)});
  }
  const double ay = std::abs(angles.y);
  spec.tail_bound = std::pow(ay, p_max + 1) / (1.0 - ay);
  return spec;
}

Complex SidebandAmplitude(const MixingAngles &angles, const BichromaticDrive &drive, int p,
                          Side side)
{
  Require(p >= 0, "sideband order p must be >= 0");
  return angles.gamma1 * CoherenceHarmonic(angles, drive, p, side);
}

SidebandSpectrum ScatteredSpectrum(const MixingAngles &angles, const BichromaticDrive &drive,
                                   int p_max)
{
  SidebandSpectrum spec = SidebandSeriesCoherence(angles, drive, p_max);
  for (auto &e : spec.entries)
  {
    e.amplitude *= angles.gamma1;
  }
  return spec;
}

double ConsecutiveIntensityRatio(const MixingAngles &angles)
{
  return angles.y * angles.y;
}

double MeanPhotonNumber(const AtomParams &atom, double rabi_amp)
{
  Validate(atom);
  return rabi_amp * rabi_amp / (atom.gamma1 * DephasingRate(atom));
}

double WeakDriveFlux(const AtomParams &atom, const BichromaticDrive &drive, int p)
{
  Require(p >= 0, "sideband order p must be >= 0");
  const double n_minus = MeanPhotonNumber(atom, drive.omega_minus_amp);
  const double n_plus = MeanPhotonNumber(atom, drive.omega_plus_amp);
  return std::pow(n_minus, p) * std::pow(n_plus, p + 1);
}

double PredictedPeakDrive(const AtomParams &atom, int p)
{
  Validate(atom);
  Require(p >= 0, "sideband order p must be >= 0");
  return std::sqrt(2.0) * atom.gamma1 * (2 * p + 1) / 4.0;
}

double PredictedSplitting(double rabi_amp, int p)
{
  Require(p >= 0, "sideband order p must be >= 0");
  return 4.0 * rabi_amp / (2 * p + 1);
}

}  // namespace sbm
