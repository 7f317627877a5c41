#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sbm/core_model.hpp"

// Brute-force check on the closed-form spectra: integrate the optical Bloch
// equations in the frame rotating at omega_d,
//
//   ds/dt = (i dw0 - Gamma2) s + (i/2) Omega(t) w
//   dw/dt = -Gamma1 (w + 1) + i (Omega*(t) s - Omega(t) s*)
//
// with Omega(t) = Om- exp(-i dw t) + Om+ exp(+i dw t), then project the
// scattered field -i Gamma1 s(t) onto exp(i n dw t) over whole periods.
namespace sbm
{

struct IntegrationSettings
{
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  std::optional<double> settle_time;  ///< default 60 / Gamma1
  int n_periods = 4;                  ///< projection windows of length 2 pi / dw
  std::optional<double> max_step;     ///< default period / 256
  int samples_per_period = 4096;
  int max_settle_periods = 16;
  double settle_tolerance = 1e-8;  ///< relative change of the harmonic vector between windows
  std::size_t max_steps = 50'000'000;
};

struct BlochTrajectory
{
  std::vector<double> times;
  std::vector<BlochState> states;
  BichromaticDrive drive;
  std::size_t steps = 0;
};

/// Result of a full steady-state harmonic extraction.
struct OracleSpectrum
{
  SidebandSpectrum spectrum;  ///< odd harmonics, scattered Rabi amplitudes
  std::vector<SidebandEntry> even_harmonics;  ///< |n| <= 2 p_max + 1, n even
  double even_to_odd_ratio = 0.0;  ///< max |even| / max |odd|
  double settle_change = 0.0;      ///< relative change between the first averaged windows
  int windows_used = 0;
  std::size_t steps = 0;
};

/// Period of the two-tone envelope's fundamental, 2 pi / dw.
double BeatPeriod(const BichromaticDrive &drive);

/// Integrate from `initial` at t = 0 and report the state at each entry of
/// `times` (non-decreasing, >= 0). Zero drive amplitudes are allowed.
BlochTrajectory IntegrateBloch(const AtomParams &atom, const BichromaticDrive &drive,
                               const IntegrationSettings &settings,
                               std::span<const double> times,
                               BlochState initial = BlochState{});

/// Integrate from the ground state and sample uniformly over the projection
/// window [settle, settle + n_periods * period).
BlochTrajectory IntegrateBloch(const AtomParams &atom, const BichromaticDrive &drive,
                               const IntegrationSettings &settings);

/// Periodic steady-state harmonics of the scattered field up to order p_max.
/// Throws NonPeriodic if consecutive windows never agree, Aliasing if the
/// sampling cannot resolve harmonic 2 p_max + 1.
OracleSpectrum SteadyHarmonics(const AtomParams &atom, const BichromaticDrive &drive,
                               int p_max, const IntegrationSettings &settings = {});

}  // namespace sbm
