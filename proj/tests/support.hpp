#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "sbm/core_model.hpp"
#include "sbm/units.hpp"

namespace sbm::testing
{

inline double RelErr(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline double RelErr(std::complex<double> got, std::complex<double> want)
{
  return std::abs(got - want) / std::abs(want);
}

/// Seeded source of admissible physical inputs for property tests.
class Gen
{
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double Uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double LogUniform(double lo, double hi) { return std::exp(Uniform(std::log(lo), std::log(hi))); }
  int Int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  AtomParams Atom()
  {
    AtomParams a;
    a.gamma1 = units::FromMHz(LogUniform(0.1, 20.0));
    a.gamma1_nr = Uniform(0.0, 1.0) < 0.5 ? 0.0 : a.gamma1 * Uniform(0.0, 0.5);
    a.gamma_phi = Uniform(0.0, 1.0) < 0.5 ? 0.0 : a.gamma1 * Uniform(0.0, 2.0);
    return a;
  }

  /// Amplitudes and detuning scaled to gamma1 over several decades.
  BichromaticDrive Drive(const AtomParams &a)
  {
    BichromaticDrive d;
    d.omega_minus_amp = a.gamma1 * LogUniform(1e-3, 10.0);
    d.omega_plus_amp = a.gamma1 * LogUniform(1e-3, 10.0);
    d.central_detuning = a.gamma1 * Uniform(-5.0, 5.0);
    d.half_splitting = units::FromKHz(LogUniform(0.1, 100.0));
    return d;
  }

  std::mt19937_64 &Engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

/// Reference atom: gamma1/2pi = 2.2 MHz, gamma2 = gamma1/2.
inline AtomParams ReferenceAtom()
{
  AtomParams a;
  a.gamma1 = units::FromMHz(2.2);
  return a;
}

inline BichromaticDrive SymmetricDrive(double omega, double detuning = 0.0,
                                       double half_splitting = units::FromKHz(5.0))
{
  return {omega, omega, detuning, half_splitting};
}

}  // namespace sbm::testing
