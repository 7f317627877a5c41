#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbm/analytic_mixing.hpp"

namespace sbm
{

/// Starting point for the reflection fit. Missing fields come from the
/// data-driven heuristic.
struct FitGuess
{
  std::optional<double> gamma1;
  std::optional<double> gamma2;
  std::optional<double> rabi_amp;
  std::optional<double> omega01;
};

struct FitOptions
{
  int max_evaluations = 4000;
  double tolerance = 1e-15;
  /// Smallest admissible ratio of singular values of the scaled Jacobian.
  double min_conditioning = 1e-6;
};

/// Single-curve fit of the single-tone reflection model. `omega01` is the
/// resonance position on the data's detuning axis.
struct FitResult
{
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double rabi_amp = 0.0;
  double omega01 = 0.0;
  double gamma1_err = 0.0;
  double gamma2_err = 0.0;
  double rabi_amp_err = 0.0;
  double omega01_err = 0.0;
  double residual_norm = 0.0;  ///< sqrt(sum |r_model - r_data|^2)
  bool converged = false;
  bool at_constraint = false;  ///< optimum sits on gamma2 = gamma1 / 2
  int iterations = 0;
};

/// Several curves sharing gamma1, gamma2 and omega01, each with its own drive.
struct SharedFitResult
{
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double omega01 = 0.0;
  double gamma1_err = 0.0;
  double gamma2_err = 0.0;
  double omega01_err = 0.0;
  std::vector<double> rabi_amps;
  std::vector<double> rabi_amp_errs;
  double residual_norm = 0.0;
  bool converged = false;
  bool at_constraint = false;
  int iterations = 0;
};

FitResult FitReflection(std::span<const ReflectionPoint> data, const FitGuess &guess = {},
                        const FitOptions &options = {});

SharedFitResult FitReflectionShared(std::span<const std::vector<ReflectionPoint>> curves,
                                    const FitOptions &options = {});

/// Heuristic start: omega01 from the peak of Re r, gamma2 from the phase
/// slope Im r / Re r, the rest from the on-resonance depth and half-width.
FitGuess InitialGuess(std::span<const ReflectionPoint> data);

// ---------------------------------------------------------------------------

struct PowerSample
{
  double power_db = 0.0;
  double rabi_amp = 0.0;
};

/// Omega = slope * 10^(P/20) + offset.
struct PowerCalibration
{
  std::vector<PowerSample> samples;  ///< sorted by power
  double slope = 0.0;
  double offset = 0.0;

  double RabiAt(double power_db) const;
};

PowerCalibration CalibratePower(std::span<const PowerSample> samples);

// ---------------------------------------------------------------------------

struct SynthSettings
{
  double rabi_amp = 0.0;
  double omega01 = 0.0;  ///< resonance offset on the detuning axis
  std::vector<double> detunings;
  double relative_noise = 0.0;  ///< complex Gaussian, scaled by |r| per point
  std::uint64_t seed = 1;
};

/// Noisy single-tone reflection curve, deterministic for a given seed.
std::vector<ReflectionPoint> SynthesizeReflection(const AtomParams &atom,
                                                  const SynthSettings &settings);

/// Reads `detuning_hz,re_t,im_t` and converts to r = 1 - t, detuning in rad/s.
std::vector<ReflectionPoint> ReadTransmissionCsv(const std::filesystem::path &path);
std::vector<ReflectionPoint> ParseTransmissionCsv(const std::string &text);

std::string FormatTransmissionCsv(std::span<const ReflectionPoint> data);

}  // namespace sbm
