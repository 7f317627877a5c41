#include "sbm/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sbm/errors.hpp"

namespace sbm
{

const char *ToString(ErrorKind kind) noexcept
{
  switch (kind)
  {
    case ErrorKind::InvalidArgument:
      return "invalid_argument";
    case ErrorKind::DegenerateEvaluation:
      return "degenerate_evaluation";
    case ErrorKind::IntegrationFailure:
      return "integration_failure";
    case ErrorKind::NonPeriodic:
      return "non_periodic";
    case ErrorKind::Aliasing:
      return "aliasing";
    case ErrorKind::FitFailure:
      return "fit_failure";
    case ErrorKind::Io:
      return "io";
  }
  return "unknown";
}

Complex SidebandSpectrum::At(int n) const
{
  auto it = std::lower_bound(entries.begin(), entries.end(), n,
                             [](const SidebandEntry &e, int idx) { return e.index < idx; });
  if (it != entries.end() && it->index == n)
  {
    return it->amplitude;
  }
  return {};
}

void Validate(const AtomParams &atom)
{
  Require(std::isfinite(atom.gamma1) && std::isfinite(atom.gamma1_nr) &&
              std::isfinite(atom.gamma_phi),
          "atom rates must be finite");
  Require(atom.gamma1 > 0.0, "gamma1 must be positive");
  Require(atom.gamma1_nr >= 0.0, "gamma1_nr must be non-negative");
  Require(atom.gamma_phi >= 0.0, "gamma_phi must be non-negative");
  if (atom.omega01)
  {
    Require(std::isfinite(*atom.omega01), "omega01 must be finite");
  }
  if (atom.dipole_moment)
  {
    Require(std::isfinite(*atom.dipole_moment) && *atom.dipole_moment > 0.0,
            "dipole_moment must be positive");
  }
}

void Validate(const BichromaticDrive &drive)
{
  Require(std::isfinite(drive.omega_minus_amp) && std::isfinite(drive.omega_plus_amp) &&
              std::isfinite(drive.central_detuning) && std::isfinite(drive.half_splitting),
          "drive parameters must be finite");
  Require(drive.omega_minus_amp >= 0.0 && drive.omega_plus_amp >= 0.0,
          "drive amplitudes must be non-negative");
  Require(drive.omega_minus_amp > 0.0 || drive.omega_plus_amp > 0.0,
          "at least one drive amplitude must be non-zero");
  Require(drive.half_splitting > 0.0, "half_splitting must be positive");
}

double DephasingRate(const AtomParams &atom)
{
  return 0.5 * (atom.gamma1 + atom.gamma1_nr) + atom.gamma_phi;
}

MixingAngles DeriveMixingAngles(const AtomParams &atom, const BichromaticDrive &drive)
{
  Validate(atom);
  Validate(drive);

  const double g1 = atom.gamma1;
  const double g2 = DephasingRate(atom);
  const double om = drive.omega_minus_amp;
  const double op = drive.omega_plus_amp;

  MixingAngles a;
  a.lambda = Complex(g2, drive.central_detuning);
  const double denom = g1 * std::norm(a.lambda) + g2 * (om * om + op * op);
  // AM-GM keeps the argument in [0, 1); clamp only absorbs rounding.
  const double arg = std::clamp(2.0 * g2 * om * op / denom, 0.0, 1.0);
  a.theta = std::asin(arg);
  a.y = -std::tan(0.5 * a.theta);
  a.coherence_prefactor = a.lambda * g1 / (2.0 * denom);
  a.gamma1 = g1;
  return a;
}

}  // namespace sbm
