#pragma once

#include "sbm/core_model.hpp"

// Closed-form stationary response of a two-level atom to two coherent tones.
//
// Scattered amplitudes are reported in Rabi units, Omega_sc = mu V_sc / hbar,
// with the global phase fixed so that a single tone gives Omega_sc = -r Omega.
// In that convention Omega_sc = Gamma1 * StationaryCoherence(); the Bloch
// oracle's rotating-frame coherence s equals i * StationaryCoherence(), so the
// same field reads -i Gamma1 s there.
namespace sbm
{

/// Single-tone reflection; t = 1 - r.
struct ReflectionPoint
{
  double detuning = 0.0;
  Complex r;
  Complex t;
};

/// r = (1/2) lambda Gamma1 / (|lambda|^2 + Omega^2 Gamma2 / Gamma1), lambda = Gamma2 + i detuning.
Complex ReflectionCoefficient(const AtomParams &atom, double rabi_amp, double detuning);

ReflectionPoint EvaluateReflection(const AtomParams &atom, double rabi_amp, double detuning);

/// Quasi-static <sigma^-> at time t under the two-tone drive.
/// Throws DegenerateEvaluation if 1 + sin(theta) cos(2 dw t) < epsilon.
Complex StationaryCoherence(const MixingAngles &angles, const BichromaticDrive &drive,
                            double time, double epsilon = 1e-12);

/// Fourier coefficients of <sigma^-> at exp(i n dw t), |n| <= 2 p_max + 1.
/// Coefficients of successive orders on one side differ by exactly a factor y.
SidebandSpectrum SidebandSeriesCoherence(const MixingAngles &angles,
                                         const BichromaticDrive &drive, int p_max);

/// Scattered Rabi amplitude of order p on the given side.
Complex SidebandAmplitude(const MixingAngles &angles, const BichromaticDrive &drive, int p,
                          Side side);

/// All scattered amplitudes up to p_max (Gamma1 times the coherence series).
SidebandSpectrum ScatteredSpectrum(const MixingAngles &angles, const BichromaticDrive &drive,
                                   int p_max);

/// |V_{2p+3}|^2 / |V_{2p+1}|^2 on either side, which is tan^2(theta/2) for every p.
double ConsecutiveIntensityRatio(const MixingAngles &angles);

/// Mean photon number per coherence time, Omega^2 / (Gamma1 Gamma2).
double MeanPhotonNumber(const AtomParams &atom, double rabi_amp);

/// Weak-drive photon number in the + sideband of order p: N_-^p N_+^(p+1).
double WeakDriveFlux(const AtomParams &atom, const BichromaticDrive &drive, int p);

/// Drive amplitude at which the order-p sideband peaks, sqrt(2) Gamma1 (2p+1) / 4.
double PredictedPeakDrive(const AtomParams &atom, int p);

/// Guideline for the detuning splitting of order p, 4 Omega / (2p+1).
double PredictedSplitting(double rabi_amp, int p);

}  // namespace sbm
