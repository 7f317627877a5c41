#include "sbm/bloch_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "sbm/errors.hpp"

namespace sbm
{

namespace
{

namespace odeint = boost::numeric::odeint;

// (Re s, Im s, w)
using State = std::array<double, 3>;

struct BlochRhs
{
  double gamma1;
  double gamma2;
  double detuning;
  double omega_minus;
  double omega_plus;
  double half_splitting;

  void operator()(const State &x, State &dxdt, double t) const
  {
    const Complex s(x[0], x[1]);
    const double w = x[2];
    const double phase = half_splitting * t;
    const Complex rabi =
        omega_minus * std::polar(1.0, -phase) + omega_plus * std::polar(1.0, phase);
    const Complex i(0.0, 1.0);
    const Complex ds = Complex(-gamma2, detuning) * s + 0.5 * i * rabi * w;
    // i (Omega* s - Omega s*) = -2 Im(Omega* s)
    const double dw = -gamma1 * (w + 1.0) - 2.0 * std::imag(std::conj(rabi) * s);
    dxdt[0] = ds.real();
    dxdt[1] = ds.imag();
    dxdt[2] = dw;
  }
};

void ValidateForIntegration(const BichromaticDrive &drive)
{
  Require(std::isfinite(drive.omega_minus_amp) && std::isfinite(drive.omega_plus_amp) &&
              std::isfinite(drive.central_detuning) && std::isfinite(drive.half_splitting),
          "drive parameters must be finite");
  Require(drive.omega_minus_amp >= 0.0 && drive.omega_plus_amp >= 0.0,
          "drive amplitudes must be non-negative");
  Require(drive.half_splitting > 0.0, "half_splitting must be positive");
}

void ValidateSettings(const IntegrationSettings &s)
{
  Require(s.rel_tol > 0.0 && s.abs_tol > 0.0, "integration tolerances must be positive");
  Require(s.n_periods >= 1, "n_periods must be >= 1");
  Require(s.samples_per_period >= 2, "samples_per_period must be >= 2");
  Require(s.max_settle_periods >= 1, "max_settle_periods must be >= 1");
  Require(s.settle_tolerance > 0.0, "settle_tolerance must be positive");
  if (s.settle_time)
  {
    Require(std::isfinite(*s.settle_time) && *s.settle_time >= 0.0,
            "settle_time must be >= 0");
  }
  if (s.max_step)
  {
    Require(std::isfinite(*s.max_step) && *s.max_step > 0.0, "max_step must be positive");
  }
}

BlochState ToBloch(const State &x) { return {Complex(x[0], x[1]), x[2]}; }

// Dense-output Dormand-Prince stepper that hands out states at increasing times.
class Propagator
{
public:
  Propagator(const AtomParams &atom, const BichromaticDrive &drive,
             const IntegrationSettings &settings, BlochState initial)
    : rhs_{atom.gamma1,
           DephasingRate(atom),
           drive.central_detuning,
           drive.omega_minus_amp,
           drive.omega_plus_amp,
           drive.half_splitting},
      stepper_(odeint::make_dense_output(settings.abs_tol, settings.rel_tol,
                                         settings.max_step.value_or(BeatPeriod(drive) / 256.0),
                                         odeint::runge_kutta_dopri5<State>())),
      max_steps_(settings.max_steps)
  {
    const double fastest = atom.gamma1 + DephasingRate(atom) +
                           std::abs(drive.central_detuning) + 2.0 * drive.omega_minus_amp +
                           2.0 * drive.omega_plus_amp;
    min_step_ = 1e-9 / fastest;
    const State x0{initial.coherence.real(), initial.coherence.imag(), initial.inversion};
    stepper_.initialize(x0, 0.0, std::min(0.01 / fastest, settings.max_step.value_or(1e300)));
  }

  BlochState At(double t)
  {
    while (stepper_.current_time() < t)
    {
      Step();
    }
    State x;
    stepper_.calc_state(t, x);
    return ToBloch(x);
  }

  std::size_t steps() const { return steps_; }

private:
  void Step()
  {
    try
    {
      stepper_.do_step(rhs_);
    }
    catch (const std::exception &e)
    {
      Fail(ErrorKind::IntegrationFailure, std::string("step control failed: ") + e.what());
    }
    ++steps_;
    const State &x = stepper_.current_state();
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2]))
    {
      Fail(ErrorKind::IntegrationFailure,
           "non-finite state at t = " + std::to_string(stepper_.current_time()));
    }
    const double dt = stepper_.current_time() - stepper_.previous_time();
    if (dt < min_step_)
    {
      Fail(ErrorKind::IntegrationFailure, "step size underflow");
    }
    if (steps_ > max_steps_)
    {
      Fail(ErrorKind::IntegrationFailure, "step budget exhausted");
    }
  }

  BlochRhs rhs_;
  odeint::dense_output_runge_kutta<
      odeint::controlled_runge_kutta<odeint::runge_kutta_dopri5<State>>>
      stepper_;
  std::size_t max_steps_;
  std::size_t steps_ = 0;
  double min_step_ = 0.0;
};

double SettleTime(const AtomParams &atom, const IntegrationSettings &settings)
{
  return settings.settle_time.value_or(60.0 / atom.gamma1);
}

// Harmonics n in [-n_max, n_max] of -i Gamma1 s over one window, phases
// referenced to absolute time so windows are directly comparable.
std::vector<Complex> WindowHarmonics(Propagator &prop, double gamma1, double half_splitting,
                                     double t0, double period, int samples, int n_max)
{
  std::vector<Complex> acc(2 * static_cast<std::size_t>(n_max) + 1);
  const Complex minus_i(0.0, -1.0);
  for (int j = 0; j < samples; ++j)
  {
    const double t = t0 + period * j / samples;
    const Complex field = minus_i * gamma1 * prop.At(t).coherence;
    for (int n = -n_max; n <= n_max; ++n)
    {
      acc[n + n_max] += field * std::polar(1.0, -n * half_splitting * t);
    }
  }
  for (auto &c : acc)
  {
    c /= static_cast<double>(samples);
  }
  return acc;
}

double RelativeChange(const std::vector<Complex> &a, const std::vector<Complex> &b)
{
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    diff += std::norm(a[k] - b[k]);
    norm += std::norm(a[k]);
  }
  return norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
}

}  // namespace

double BeatPeriod(const BichromaticDrive &drive)
{
  Require(drive.half_splitting > 0.0, "half_splitting must be positive");
  return 2.0 * std::numbers::pi / drive.half_splitting;
}

BlochTrajectory IntegrateBloch(const AtomParams &atom, const BichromaticDrive &drive,
                               const IntegrationSettings &settings,
                               std::span<const double> times, BlochState initial)
{
  Validate(atom);
  ValidateForIntegration(drive);
  ValidateSettings(settings);
  Require(std::is_sorted(times.begin(), times.end()), "sample times must be non-decreasing");
  Require(times.empty() || times.front() >= 0.0, "sample times must be >= 0");

  Propagator prop(atom, drive, settings, initial);
  BlochTrajectory traj;
  traj.drive = drive;
  traj.times.assign(times.begin(), times.end());
  traj.states.reserve(times.size());
  for (double t : times)
  {
    traj.states.push_back(t == 0.0 ? initial : prop.At(t));
  }
  traj.steps = prop.steps();
  return traj;
}

BlochTrajectory IntegrateBloch(const AtomParams &atom, const BichromaticDrive &drive,
                               const IntegrationSettings &settings)
{
  Validate(atom);
  ValidateForIntegration(drive);
  ValidateSettings(settings);
  const double t0 = SettleTime(atom, settings);
  const double period = BeatPeriod(drive);
  const int total = settings.n_periods * settings.samples_per_period;
  std::vector<double> times(total);
  for (int j = 0; j < total; ++j)
  {
    times[j] = t0 + period * j / settings.samples_per_period;
  }
  return IntegrateBloch(atom, drive, settings, times);
}

OracleSpectrum SteadyHarmonics(const AtomParams &atom, const BichromaticDrive &drive,
                               int p_max, const IntegrationSettings &settings)
{
  Validate(atom);
  ValidateForIntegration(drive);
  ValidateSettings(settings);
  Require(p_max >= 0, "p_max must be >= 0");
  const int n_max = 2 * p_max + 1;
  if (settings.samples_per_period <= 2 * n_max)
  {
    Fail(ErrorKind::Aliasing, "samples_per_period " +
                                  std::to_string(settings.samples_per_period) +
                                  " cannot resolve harmonic " + std::to_string(n_max));
  }

  const double period = BeatPeriod(drive);
  const double t_settle = SettleTime(atom, settings);
  Propagator prop(atom, drive, settings, BlochState{});

  std::vector<std::vector<Complex>> windows;
  int first_settled = -1;
  double settle_change = 0.0;
  const int max_windows = settings.max_settle_periods + settings.n_periods;
  for (int k = 0; k < max_windows; ++k)
  {
    windows.push_back(WindowHarmonics(prop, atom.gamma1, drive.half_splitting,
                                      t_settle + k * period, period,
                                      settings.samples_per_period, n_max));
    if (first_settled < 0 && k > 0)
    {
      const double change = RelativeChange(windows[k], windows[k - 1]);
      if (change < settings.settle_tolerance)
      {
        first_settled = k - 1;
        settle_change = change;
      }
      else if (k + 1 >= settings.max_settle_periods)
      {
        Fail(ErrorKind::NonPeriodic,
             "transient not settled after " + std::to_string(k + 1) +
                 " periods (relative change " + std::to_string(change) + ")");
      }
    }
    if (first_settled >= 0 && k - first_settled + 1 >= settings.n_periods)
    {
      break;
    }
  }

  std::vector<Complex> mean(windows.front().size());
  const int used = static_cast<int>(windows.size()) - first_settled;
  for (std::size_t k = first_settled; k < windows.size(); ++k)
  {
    for (std::size_t n = 0; n < mean.size(); ++n)
    {
      mean[n] += windows[k][n];
    }
  }

  OracleSpectrum out;
  out.spectrum.p_max = p_max;
  double max_odd = 0.0;
  double max_even = 0.0;
  for (int n = -n_max; n <= n_max; ++n)
  {
    const Complex c = mean[n + n_max] / static_cast<double>(used);
    if (n % 2 != 0)
    {
      out.spectrum.entries.push_back({n, c});
      max_odd = std::max(max_odd, std::abs(c));
    }
    else
    {
      out.even_harmonics.push_back({n, c});
      max_even = std::max(max_even, std::abs(c));
    }
  }
  out.even_to_odd_ratio = max_odd > 0.0 ? max_even / max_odd : 0.0;
  out.settle_change = settle_change;
  out.windows_used = used;
  out.steps = prop.steps();
  return out;
}

}  // namespace sbm
