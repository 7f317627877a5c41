#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sbm/analytic_mixing.hpp"
#include "sbm/errors.hpp"
#include "support.hpp"

using namespace sbm;
using sbm::testing::Gen;
using sbm::testing::ReferenceAtom;
using sbm::testing::RelErr;
using sbm::testing::SymmetricDrive;

namespace
{

Complex SeriesSum(const SidebandSpectrum &s, double phase)
{
  Complex sum;
  for (const auto &e : s.entries)
  {
    sum += e.amplitude * std::polar(1.0, e.index * phase);
  }
  return sum;
}

/// Fourier coefficient of the closed-form coherence by periodic trapezoid rule.
Complex QuadratureHarmonic(const MixingAngles &m, const BichromaticDrive &d, int n, int samples)
{
  const double period = 2 * std::numbers::pi / d.half_splitting;
  Complex acc;
  for (int k = 0; k < samples; ++k)
  {
    const double t = period * k / samples;
    acc += StationaryCoherence(m, d, t) * std::polar(1.0, -n * d.half_splitting * t);
  }
  return acc / static_cast<double>(samples);
}

}  // namespace

TEST_CASE("reflection: weak-drive resonance and saturation")
{
  const AtomParams a = ReferenceAtom();
  // gamma2 = gamma1/2 makes weak-drive resonant reflection total.
  CHECK(ReflectionCoefficient(a, a.gamma1 * 1e-6, 0.0).real() == doctest::Approx(1.0).epsilon(1e-11));
  // Omega = gamma2: r = G1 G2 / 2 / (G2^2 + G2^3 / G1) = 2/3.
  const Complex r = ReflectionCoefficient(a, a.gamma1 / 2, 0.0);
  CHECK(r.real() == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r.imag() == 0.0);
  // Off resonance the phase follows lambda = gamma2 + i detuning.
  const Complex off = ReflectionCoefficient(a, a.gamma1 / 2, a.gamma1 / 2);
  CHECK(std::arg(off) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-14));

  double last = 2.0;
  for (double om : {0.1, 0.5, 1.0, 3.0, 10.0})
  {
    const double mag = std::abs(ReflectionCoefficient(a, units::FromMHz(om), 0.0));
    CHECK(mag < last);
    last = mag;
  }
  const ReflectionPoint p = EvaluateReflection(a, units::FromMHz(0.7), units::FromMHz(0.4));
  CHECK(std::abs(p.t - (1.0 - p.r)) < 1e-16);
}

TEST_CASE("spectrum frozen values at gamma2 = Omega, zero detuning")
{
  // theta = pi/6, y = -(2 - sqrt 3), coherence prefactor 1/(2 gamma1).
  const AtomParams a = ReferenceAtom();
  const double om = a.gamma1 / 2;
  const BichromaticDrive d = SymmetricDrive(om);
  const MixingAngles m = DeriveMixingAngles(a, d);
  const double y = -(2.0 - std::sqrt(3.0));
  const double main = -0.5 / std::cos(std::numbers::pi / 6) * om * (1 + y);
  for (int p = 0; p <= 4; ++p)
  {
    const double want = main * std::pow(y, p);
    CHECK(RelErr(SidebandAmplitude(m, d, p, Side::Plus), want) < 1e-13);
    CHECK(RelErr(SidebandAmplitude(m, d, p, Side::Minus), want) < 1e-13);
  }
  // |Omega_sc(+-3)| / Omega
  CHECK(std::abs(SidebandAmplitude(m, d, 1, Side::Plus)) / om ==
        doctest::Approx(0.11324865405187).epsilon(1e-11));
}

TEST_CASE("single tone reduces to minus reflection times drive")
{
  Gen g(3);
  for (int k = 0; k < 200; ++k)
  {
    const AtomParams a = g.Atom();
    BichromaticDrive d = g.Drive(a);
    d.omega_plus_amp = 0.0;
    const MixingAngles m = DeriveMixingAngles(a, d);
    const Complex want = -ReflectionCoefficient(a, d.omega_minus_amp, d.central_detuning) * d.omega_minus_amp;
    REQUIRE(RelErr(SidebandAmplitude(m, d, 0, Side::Minus), want) < 1e-13);
    for (int p = 0; p <= 3; ++p)
    {
      REQUIRE(SidebandAmplitude(m, d, p, Side::Plus) == Complex(0.0, 0.0));
    }
    for (int p = 1; p <= 3; ++p)
    {
      REQUIRE(SidebandAmplitude(m, d, p, Side::Minus) == Complex(0.0, 0.0));
    }
  }
}

TEST_CASE("property: generating-function identity of the periodic denominator")
{
  // 1 / (1 + sin(th) cos x) = (1 + 2 sum_k y^k cos(k x)) / cos(th), y = -tan(th/2).
  Gen g(5);
  for (int k = 0; k < 10000; ++k)
  {
    const double th = g.Uniform(0.0, 1.5);
    const double x = g.Uniform(-std::numbers::pi, std::numbers::pi);
    const double y = -std::tan(th / 2);
    double sum = 1.0, yk = 1.0;
    for (int j = 1; std::abs(yk) > 1e-18; ++j)
    {
      yk *= y;
      sum += 2.0 * yk * std::cos(j * x);
    }
    const double direct = 1.0 / (1.0 + std::sin(th) * std::cos(x));
    REQUIRE(RelErr(sum / std::cos(th), direct) < 1e-12);
  }
}

TEST_CASE("property: series reconstructs the closed-form coherence")
{
  Gen g(7);
  for (int k = 0; k < 10000; ++k)
  {
    const AtomParams a = g.Atom();
    const BichromaticDrive d = g.Drive(a);
    const MixingAngles m = DeriveMixingAngles(a, d);
    if (std::abs(m.y) > 0.9)
    {
      continue;
    }
    const int p_max = static_cast<int>(std::ceil(std::log(1e-18) / std::log(std::max(std::abs(m.y), 1e-300))));
    const SidebandSpectrum s = SidebandSeriesCoherence(m, d, std::clamp(p_max, 1, 400));
    const double t = g.Uniform(0.0, 2 * std::numbers::pi / d.half_splitting);
    const Complex direct = StationaryCoherence(m, d, t);
    REQUIRE(std::abs(SeriesSum(s, d.half_splitting * t) - direct) <= 1e-12 * std::abs(direct) + 1e-300);
  }
}

TEST_CASE("truncation at p_max = 40 stays inside the reported tail bound")
{
  const AtomParams a = ReferenceAtom();
  for (double om : {0.1, 1.0, 4.0, 12.0, 40.0})
  {
    const BichromaticDrive d = SymmetricDrive(units::FromMHz(om));
    const MixingAngles m = DeriveMixingAngles(a, d);
    const SidebandSpectrum s = SidebandSeriesCoherence(m, d, 40);
    CHECK(s.p_max == 40);
    CHECK(s.entries.size() == 82u);
    CHECK(s.tail_bound == doctest::Approx(std::pow(std::abs(m.y), 41) / (1 - std::abs(m.y))));
    const double scale = std::abs(s.At(1)) + std::abs(s.At(-1));
    for (double phase : {0.0, 0.3, 1.1, 2.0})
    {
      const Complex direct = StationaryCoherence(m, d, phase / d.half_splitting);
      CHECK(std::abs(SeriesSum(s, phase) - direct) <= s.tail_bound * scale * (1 + 1e-9) + 1e-15 * scale);
    }
    if (om <= 1.0)
    {
      CHECK(s.tail_bound < 1e-8);
    }
  }
}

TEST_CASE("quadrature projection of the closed form matches the coefficients")
{
  Gen g(13);
  for (int k = 0; k < 40; ++k)
  {
    const AtomParams a = g.Atom();
    const BichromaticDrive d = g.Drive(a);
    const MixingAngles m = DeriveMixingAngles(a, d);
    if (std::abs(m.y) > 0.8)
    {
      continue;
    }
    const SidebandSpectrum s = SidebandSeriesCoherence(m, d, 4);
    const double ref = std::abs(s.At(1)) + std::abs(s.At(-1));
    for (int n = -9; n <= 9; ++n)
    {
      const Complex q = QuadratureHarmonic(m, d, n, 2048);
      REQUIRE(std::abs(q - s.At(n)) <= 1e-12 * ref);
    }
  }
}

TEST_CASE("order-independent intensity ratio")
{
  const AtomParams a = ReferenceAtom();
  for (double om : {0.05, 0.3, 1.0, 2.2, 5.0, 12.0})
  {
    for (double ratio : {1.0, 1.26, 0.5})
    {
      const BichromaticDrive d{units::FromMHz(om) * ratio, units::FromMHz(om), units::FromMHz(0.7), 1e4};
      const MixingAngles m = DeriveMixingAngles(a, d);
      const double want = std::pow(std::tan(m.theta / 2), 2);
      CHECK(ConsecutiveIntensityRatio(m) == doctest::Approx(want).epsilon(1e-14));
      for (Side side : {Side::Minus, Side::Plus})
      {
        for (int p = 0; p <= 3; ++p)
        {
          const double r = std::norm(SidebandAmplitude(m, d, p + 1, side)) /
                           std::norm(SidebandAmplitude(m, d, p, side));
          if (p >= 1)
          {
            CHECK(RelErr(r, want) < 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("property: symmetric drive is side-symmetric, detuning sign is a mirror")
{
  Gen g(17);
  for (int k = 0; k < 2000; ++k)
  {
    const AtomParams a = g.Atom();
    BichromaticDrive d = g.Drive(a);
    d.omega_plus_amp = d.omega_minus_amp;
    const MixingAngles m = DeriveMixingAngles(a, d);
    BichromaticDrive flipped = d;
    flipped.central_detuning = -d.central_detuning;
    const MixingAngles mf = DeriveMixingAngles(a, flipped);
    for (int p = 0; p <= 4; ++p)
    {
      const double plus = std::norm(SidebandAmplitude(m, d, p, Side::Plus));
      REQUIRE(plus == doctest::Approx(std::norm(SidebandAmplitude(m, d, p, Side::Minus))).epsilon(1e-12));
      REQUIRE(plus == doctest::Approx(std::norm(SidebandAmplitude(mf, flipped, p, Side::Plus))).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: the stronger tone's side always dominates")
{
  Gen g(19);
  for (int k = 0; k < 5000; ++k)
  {
    const AtomParams a = g.Atom();
    BichromaticDrive d = g.Drive(a);
    if (d.omega_minus_amp == d.omega_plus_amp)
    {
      continue;
    }
    const Side strong = d.omega_minus_amp > d.omega_plus_amp ? Side::Minus : Side::Plus;
    const Side weak = strong == Side::Minus ? Side::Plus : Side::Minus;
    const MixingAngles m = DeriveMixingAngles(a, d);
    if (m.y == 0.0)
    {
      continue;
    }
    for (int p = 0; p <= 4; ++p)
    {
      REQUIRE(std::abs(SidebandAmplitude(m, d, p, strong)) > std::abs(SidebandAmplitude(m, d, p, weak)));
    }
  }
}

TEST_CASE("weak-drive photon statistics")
{
  const AtomParams a = ReferenceAtom();
  const double g2 = DephasingRate(a);
  CHECK(MeanPhotonNumber(a, a.gamma1) == doctest::Approx(a.gamma1 / g2).epsilon(1e-15));
  for (double ratio : {1.0, 1.26, 0.7})
  {
    const BichromaticDrive d{a.gamma1 * 1e-4 * ratio, a.gamma1 * 1e-4, 0.0, 1e4};
    const MixingAngles m = DeriveMixingAngles(a, d);
    for (int p = 0; p <= 3; ++p)
    {
      const double lhs = std::norm(SidebandAmplitude(m, d, p, Side::Plus));
      const double rhs = a.gamma1 * g2 * WeakDriveFlux(a, d, p);
      CHECK(lhs / rhs == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  // With extra dephasing the limit is (gamma1 / 2 gamma2)^2.
  AtomParams deph = a;
  deph.gamma_phi = a.gamma1 / 2;
  const BichromaticDrive d = SymmetricDrive(a.gamma1 * 1e-4);
  const MixingAngles m = DeriveMixingAngles(deph, d);
  const double rhs = deph.gamma1 * DephasingRate(deph) * WeakDriveFlux(deph, d, 1);
  CHECK(std::norm(SidebandAmplitude(m, d, 1, Side::Plus)) / rhs == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("predicted peak and splitting laws")
{
  const AtomParams a = ReferenceAtom();
  CHECK(PredictedPeakDrive(a, 1) == doctest::Approx(std::sqrt(2.0) * a.gamma1 * 3 / 4).epsilon(1e-15));
  CHECK(PredictedPeakDrive(a, 0) == doctest::Approx(std::sqrt(2.0) * a.gamma1 / 4).epsilon(1e-15));
  CHECK(PredictedSplitting(5.0, 2) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("degenerate denominator is reported")
{
  MixingAngles m;
  m.theta = std::numbers::pi / 2;
  m.y = -1.0;
  m.lambda = {1.0, 0.0};
  m.coherence_prefactor = {0.5, 0.0};
  m.gamma1 = 1.0;
  const BichromaticDrive d{1.0, 1.0, 0.0, 1.0};
  try
  {
    (void)StationaryCoherence(m, d, std::numbers::pi / 2);
    FAIL("expected a degenerate-evaluation error");
  }
  catch (const Error &e)
  {
    CHECK(e.kind() == ErrorKind::DegenerateEvaluation);
  }
  CHECK_NOTHROW((void)StationaryCoherence(m, d, 0.0));
}

TEST_CASE("invalid orders are rejected")
{
  const AtomParams a = ReferenceAtom();
  const BichromaticDrive d = SymmetricDrive(a.gamma1);
  const MixingAngles m = DeriveMixingAngles(a, d);
  CHECK_THROWS_AS((void)SidebandAmplitude(m, d, -1, Side::Plus), Error);
  CHECK_THROWS_AS((void)SidebandSeriesCoherence(m, d, -1), Error);
}
