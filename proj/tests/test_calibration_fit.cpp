#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sbm/calibration_fit.hpp"
#include "sbm/errors.hpp"
#include "sbm/experiment_runner.hpp"
#include "support.hpp"

using namespace sbm;
using sbm::testing::ReferenceAtom;
using sbm::testing::RelErr;

namespace
{

ErrorKind KindOf(auto &&fn)
{
  try
  {
    fn();
  }
  catch (const Error &e)
  {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

std::vector<ReflectionPoint> Curve(double omega_mhz, double noise, std::uint64_t seed, double span_mhz = 10.0,
                                   int points = 201, double omega01_mhz = 0.0,
                                   const AtomParams &atom = ReferenceAtom())
{
  SynthSettings s;
  s.rabi_amp = units::FromMHz(omega_mhz);
  s.omega01 = units::FromMHz(omega01_mhz);
  s.detunings = LinearGrid(units::FromMHz(-span_mhz), units::FromMHz(span_mhz), points);
  s.relative_noise = noise;
  s.seed = seed;
  return SynthesizeReflection(atom, s);
}

}  // namespace

TEST_CASE("zero-noise data are recovered exactly")
{
  const AtomParams a = ReferenceAtom();
  for (double om : {0.1, 0.3, 1.0, 3.0})
  {
    for (double w01 : {0.0, 0.8})
    {
      const auto data = Curve(om, 0.0, 1, 10.0, 201, w01);
      const FitResult r = FitReflection(data);
      CHECK(r.converged);
      CHECK(r.residual_norm < 1e-10);
      CHECK(RelErr(r.gamma1, a.gamma1) < 1e-7);
      CHECK(RelErr(r.gamma2, a.gamma1 / 2) < 1e-7);
      CHECK(RelErr(r.rabi_amp, units::FromMHz(om)) < 1e-6);
      CHECK(std::abs(r.omega01 - units::FromMHz(w01)) < 1e-7 * a.gamma1);
      CHECK(r.gamma2 >= r.gamma1 / 2 * (1 - 1e-12));
    }
  }
}

TEST_CASE("dephased atom is fitted off the constraint")
{
  AtomParams a = ReferenceAtom();
  a.gamma_phi = 0.3 * a.gamma1;
  const FitResult r = FitReflection(Curve(1.0, 0.0, 1, 10.0, 201, 0.0, a));
  CHECK(r.residual_norm < 1e-10);
  CHECK_FALSE(r.at_constraint);
  CHECK(RelErr(r.gamma2, DephasingRate(a)) < 1e-7);
  CHECK(RelErr(r.gamma1, a.gamma1) < 1e-7);
}

TEST_CASE("noisy round trip")
{
  const AtomParams a = ReferenceAtom();
  SUBCASE("moderate drive: every parameter within 2%")
  {
    const FitResult r = FitReflection(Curve(1.0, 1e-2, 1));
    CHECK(RelErr(r.gamma1, a.gamma1) < 0.02);
    CHECK(RelErr(r.gamma2, a.gamma1 / 2) < 0.02);
    CHECK(RelErr(r.rabi_amp, units::FromMHz(1.0)) < 0.02);
  }
  SUBCASE("weak drive: rates within 2%, drive consistent with its standard error")
  {
    // At Omega = 0.3 MHz saturation changes the width by under 4%, so the
    // drive is only resolved to a few percent at this noise level.
    const FitResult r = FitReflection(Curve(0.3, 1e-2, 1));
    CHECK(RelErr(r.gamma1, a.gamma1) < 0.02);
    CHECK(RelErr(r.gamma2, a.gamma1 / 2) < 0.02);
    CHECK(r.rabi_amp_err > 0.0);
    CHECK(std::abs(r.rabi_amp - units::FromMHz(0.3)) < 3.0 * r.rabi_amp_err);
  }
}

TEST_CASE("standard errors track the scatter over seeds")
{
  double sum = 0.0, sum2 = 0.0, err = 0.0;
  const int n = 40;
  for (int seed = 1; seed <= n; ++seed)
  {
    const FitResult r = FitReflection(Curve(1.0, 1e-2, seed));
    sum += r.gamma1;
    sum2 += r.gamma1 * r.gamma1;
    err += r.gamma1_err / n;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(err / sd > 0.6);
  CHECK(err / sd < 1.6);
}

TEST_CASE("saturation ordering of fitted curves")
{
  double last = 2.0;
  for (double om : {0.2, 1.5, 5.0})
  {
    const FitResult r = FitReflection(Curve(om, 1e-2, 7));
    AtomParams fitted;
    fitted.gamma1 = r.gamma1;
    fitted.gamma_phi = r.gamma2 - r.gamma1 / 2;
    const double depth = std::abs(ReflectionCoefficient(fitted, r.rabi_amp, 0.0));
    CHECK(depth < last);
    last = depth;
  }
}

TEST_CASE("fit is invariant under reordering")
{
  auto data = Curve(0.8, 1e-2, 3);
  const FitResult ref = FitReflection(data);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 3; ++k)
  {
    std::shuffle(data.begin(), data.end(), rng);
    const FitResult r = FitReflection(data);
    CHECK(RelErr(r.gamma1, ref.gamma1) < 1e-8);
    CHECK(RelErr(r.gamma2, ref.gamma2) < 1e-8);
    CHECK(RelErr(r.rabi_amp, ref.rabi_amp) < 1e-8);
    CHECK(std::abs(r.omega01 - ref.omega01) < 1e-8 * ref.gamma1);
  }
}

TEST_CASE("fitted drive scales with the true drive")
{
  const double base = FitReflection(Curve(0.5, 0.0, 1)).rabi_amp;
  for (double c : {0.5, 2.0, 4.0})
  {
    CHECK(RelErr(FitReflection(Curve(0.5 * c, 0.0, 1)).rabi_amp / base, c) < 1e-6);
  }
}

TEST_CASE("shared rates across several drive levels")
{
  const AtomParams a = ReferenceAtom();
  const std::vector<double> oms{0.3, 1.0, 3.0};
  std::vector<std::vector<ReflectionPoint>> curves;
  for (double om : oms)
  {
    curves.push_back(Curve(om, 0.0, 1));
  }
  const SharedFitResult r = FitReflectionShared(curves);
  CHECK(r.converged);
  CHECK(r.residual_norm < 1e-10);
  CHECK(RelErr(r.gamma1, a.gamma1) < 1e-7);
  CHECK(RelErr(r.gamma2, a.gamma1 / 2) < 1e-7);
  REQUIRE(r.rabi_amps.size() == 3u);
  for (std::size_t k = 0; k < oms.size(); ++k)
  {
    CHECK(RelErr(r.rabi_amps[k], units::FromMHz(oms[k])) < 1e-6);
  }
}

TEST_CASE("fit failures")
{
  SUBCASE("all points far off resonance")
  {
    const AtomParams a = ReferenceAtom();
    SynthSettings s;
    s.rabi_amp = units::FromMHz(0.5);
    s.detunings = LinearGrid(1e3 * a.gamma1, 2e3 * a.gamma1, 60);
    const auto data = SynthesizeReflection(a, s);
    const ErrorKind k = KindOf([&] { FitReflection(data); });
    CHECK((k == ErrorKind::FitFailure || k == ErrorKind::InvalidArgument));
  }
  SUBCASE("too few points")
  {
    const auto data = Curve(1.0, 0.0, 1, 5.0, 4);
    CHECK(KindOf([&] { FitReflection(data); }) == ErrorKind::InvalidArgument);
  }
  SUBCASE("non-finite data")
  {
    auto data = Curve(1.0, 0.0, 1);
    data[10].r = Complex(std::nan(""), 0.0);
    CHECK(KindOf([&] { FitReflection(data); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("power calibration")
{
  SUBCASE("exact 1 dB amplitude step has zero offset")
  {
    const double om = units::FromMHz(0.4);
    const std::vector<PowerSample> s{{-20.0, om}, {-19.0, om * std::pow(10.0, 0.05)}};
    const PowerCalibration c = CalibratePower(s);
    CHECK(std::abs(c.offset) < 1e-9 * om);
    CHECK(RelErr(c.slope, om / std::pow(10.0, -1.0)) < 1e-12);
    CHECK(RelErr(c.RabiAt(-10.0), om * std::pow(10.0, 0.5)) < 1e-12);
  }
  SUBCASE("a 1.259 step over 1 dB is a power ratio and leaves an offset")
  {
    const double om = units::FromMHz(0.4);
    const std::vector<PowerSample> s{{-20.0, om}, {-19.0, om * 1.259}};
    CHECK(std::abs(CalibratePower(s).offset) > 0.5 * om);
  }
  SUBCASE("samples are sorted by power")
  {
    const std::vector<PowerSample> s{{-10.0, 3.0}, {-30.0, 0.3}, {-20.0, 1.0}};
    const PowerCalibration c = CalibratePower(s);
    CHECK(c.samples.front().power_db == -30.0);
    CHECK(c.samples.back().power_db == -10.0);
  }
  SUBCASE("five-point ladder with 1% noise")
  {
    // One noisy ladder scatters by about 1% in slope; check the ensemble.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> noise(0.0, 0.01);
    const double a = units::FromMHz(3.0);
    int within = 0;
    double sq = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t)
    {
      std::vector<PowerSample> s;
      for (double p : {-30.0, -25.0, -20.0, -15.0, -10.0})
      {
        s.push_back({p, a * std::pow(10.0, p / 20) * (1 + noise(rng))});
      }
      const double e = RelErr(CalibratePower(s).slope, a);
      within += e < 0.02;
      sq += e * e;
    }
    CHECK(within >= 0.9 * trials);
    CHECK(std::sqrt(sq / trials) < 0.015);
  }
  SUBCASE("degenerate ladders")
  {
    const std::vector<PowerSample> same{{-20.0, 1.0}, {-10.0, 1.0}, {-5.0, 1.0}};
    CHECK(KindOf([&] { CalibratePower(same); }) == ErrorKind::FitFailure);
    const std::vector<PowerSample> one_power{{-20.0, 1.0}, {-20.0, 2.0}};
    CHECK(KindOf([&] { CalibratePower(one_power); }) == ErrorKind::FitFailure);
    const std::vector<PowerSample> single{{-20.0, 1.0}};
    CHECK(KindOf([&] { CalibratePower(single); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("synthetic data are seed-deterministic")
{
  const auto a = Curve(0.5, 1e-2, 9);
  const auto b = Curve(0.5, 1e-2, 9);
  const auto c = Curve(0.5, 1e-2, 10);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    CHECK(a[k].r == b[k].r);
    CHECK(a[k].t == 1.0 - a[k].r);
    differs = differs || a[k].r != c[k].r;
  }
  CHECK(differs);
}

TEST_CASE("transmission CSV")
{
  const auto data = Curve(0.5, 1e-2, 2, 10.0, 21);
  const std::string text = FormatTransmissionCsv(data);
  CHECK(text.rfind("detuning_hz,re_t,im_t\n", 0) == 0);
  const auto back = ParseTransmissionCsv(text);
  REQUIRE(back.size() == data.size());
  for (std::size_t k = 0; k < data.size(); ++k)
  {
    CHECK(back[k].t == data[k].t);
    CHECK(std::abs(back[k].detuning - data[k].detuning) <= 1e-15 * (1 + std::abs(data[k].detuning)));
    CHECK(back[k].r == 1.0 - back[k].t);
  }
  // Extra columns and comments are tolerated, missing ones are not.
  CHECK(ParseTransmissionCsv("# vna\nfreq,detuning_hz,im_t,re_t\n1,1000,0.5,0.25\n")[0].t == Complex(0.25, 0.5));
  CHECK(KindOf([&] { ParseTransmissionCsv("detuning_hz,re_t\n1,2\n"); }) == ErrorKind::Io);
  CHECK(KindOf([&] { ParseTransmissionCsv("detuning_hz,re_t,im_t\n1,x,2\n"); }) == ErrorKind::Io);
  CHECK(KindOf([&] { ReadTransmissionCsv("/nonexistent/curve.csv"); }) == ErrorKind::Io);
}
