#include "sbm/calibration_fit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "sbm/errors.hpp"
#include "sbm/units.hpp"

namespace sbm
{

namespace
{

constexpr int kMinPoints = 5;

// Parameter layout: [ln g1, (ln g2), omega01 / scale, ln Om_1 .. ln Om_K].
// With `tie` set, gamma2 is pinned to gamma1 / 2 and its slot is dropped.
struct Layout
{
  bool tie = false;
  int curves = 1;
  double scale = 1.0;

  int Size() const { return (tie ? 2 : 3) + curves; }
  int Center() const { return tie ? 1 : 2; }
  int Rabi(int k) const { return Center() + 1 + k; }
};

struct Physical
{
  double gamma1;
  double gamma2;
  double omega01;
  std::vector<double> rabi;
};

Physical Unpack(const Layout &lay, const Eigen::VectorXd &x)
{
  Physical p;
  p.gamma1 = std::exp(x[0]);
  p.gamma2 = lay.tie ? 0.5 * p.gamma1 : std::exp(x[1]);
  p.omega01 = x[lay.Center()] * lay.scale;
  p.rabi.resize(lay.curves);
  for (int k = 0; k < lay.curves; ++k)
  {
    p.rabi[k] = std::exp(x[lay.Rabi(k)]);
  }
  return p;
}

Eigen::VectorXd Pack(const Layout &lay, const Physical &p)
{
  Eigen::VectorXd x(lay.Size());
  x[0] = std::log(p.gamma1);
  if (!lay.tie)
  {
    x[1] = std::log(p.gamma2);
  }
  x[lay.Center()] = p.omega01 / lay.scale;
  for (int k = 0; k < lay.curves; ++k)
  {
    x[lay.Rabi(k)] = std::log(p.rabi[k]);
  }
  return x;
}

struct ReflectionResidual : Eigen::DenseFunctor<double>
{
  ReflectionResidual(Layout lay, std::span<const std::vector<ReflectionPoint>> curves, int m)
    : Eigen::DenseFunctor<double>(lay.Size(), 2 * m), lay(lay), curves(curves)
  {
  }

  int operator()(const InputType &x, ValueType &f) const
  {
    const Physical p = Unpack(lay, x);
    int row = 0;
    for (int k = 0; k < lay.curves; ++k)
    {
      for (const auto &pt : curves[k])
      {
        const Complex lambda(p.gamma2, pt.detuning - p.omega01);
        const double denom =
            std::norm(lambda) + p.rabi[k] * p.rabi[k] * p.gamma2 / p.gamma1;
        const Complex res = 0.5 * p.gamma1 * lambda / denom - pt.r;
        f[row++] = res.real();
        f[row++] = res.imag();
      }
    }
    return 0;
  }

  int df(const InputType &x, JacobianType &jac) const
  {
    const Physical p = Unpack(lay, x);
    const Complex i(0.0, 1.0);
    jac.setZero();
    int row = 0;
    for (int k = 0; k < lay.curves; ++k)
    {
      const double om = p.rabi[k];
      for (const auto &pt : curves[k])
      {
        const double d = pt.detuning - p.omega01;
        const Complex lambda(p.gamma2, d);
        const double n = std::norm(lambda) + om * om * p.gamma2 / p.gamma1;
        const Complex r = 0.5 * p.gamma1 * lambda / n;
        const Complex dr_dn = -r / n;
        const Complex dr_dg1 = r / p.gamma1 + dr_dn * (-om * om * p.gamma2 / (p.gamma1 * p.gamma1));
        const Complex dr_dg2 = 0.5 * p.gamma1 / n + dr_dn * (2.0 * p.gamma2 + om * om / p.gamma1);
        const Complex dr_dd = 0.5 * p.gamma1 * i / n + dr_dn * (2.0 * d);
        const Complex dr_dom = dr_dn * (2.0 * om * p.gamma2 / p.gamma1);

        Complex col0 = p.gamma1 * dr_dg1;
        if (lay.tie)
        {
          col0 += 0.5 * p.gamma1 * dr_dg2;
        }
        const Complex col_c = -dr_dd * lay.scale;
        const Complex col_om = om * dr_dom;

        auto put = [&](int col, Complex v) {
          jac(row, col) = v.real();
          jac(row + 1, col) = v.imag();
        };
        put(0, col0);
        if (!lay.tie)
        {
          put(1, p.gamma2 * dr_dg2);
        }
        put(lay.Center(), col_c);
        put(lay.Rabi(k), col_om);
        row += 2;
      }
    }
    return 0;
  }

  Layout lay;
  std::span<const std::vector<ReflectionPoint>> curves;
};

struct EngineResult
{
  Physical value;
  Eigen::VectorXd sigma;  ///< standard errors in physical units, layout order
  double residual_norm = 0.0;
  int iterations = 0;
};

bool IsConverged(Eigen::LevenbergMarquardtSpace::Status status)
{
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (status)
  {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      return true;
    default:
      return false;
  }
}

EngineResult RunEngine(const Layout &lay, std::span<const std::vector<ReflectionPoint>> curves,
                       const Physical &start, const FitOptions &options)
{
  int m = 0;
  for (const auto &c : curves)
  {
    m += static_cast<int>(c.size());
  }
  ReflectionResidual functor(lay, curves, m);
  Eigen::LevenbergMarquardt<ReflectionResidual> lm(functor);
  lm.setMaxfev(options.max_evaluations);
  lm.setXtol(options.tolerance);
  lm.setFtol(options.tolerance);
  lm.setGtol(0.0);

  Eigen::VectorXd x = Pack(lay, start);
  const auto status = lm.minimize(x);
  if (!IsConverged(status) || !x.allFinite())
  {
    Fail(ErrorKind::FitFailure, "reflection fit did not converge (status " +
                                    std::to_string(static_cast<int>(status)) + ")");
  }

  Eigen::VectorXd f(functor.values());
  functor(x, f);
  Eigen::MatrixXd jac(functor.values(), functor.inputs());
  functor.df(x, jac);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[sv.size() - 1] > options.min_conditioning * sv[0]))
  {
    Fail(ErrorKind::FitFailure, "singular Jacobian: data do not constrain all parameters");
  }

  EngineResult out;
  out.value = Unpack(lay, x);
  out.residual_norm = f.norm();
  out.iterations = static_cast<int>(lm.iterations());

  const int dof = std::max(1, functor.values() - functor.inputs());
  const double s2 = f.squaredNorm() / dof;
  const Eigen::MatrixXd &v = svd.matrixV();
  const Eigen::VectorXd inv_sv2 = sv.array().square().inverse();
  const Eigen::MatrixXd cov = s2 * v * inv_sv2.asDiagonal() * v.transpose();

  // Chain rule back to physical units: exp parameters scale by value, the
  // centre by `scale`.
  out.sigma.resize(lay.Size());
  for (int j = 0; j < lay.Size(); ++j)
  {
    const double sd = std::sqrt(std::max(0.0, cov(j, j)));
    double factor = 1.0;
    if (j == 0)
    {
      factor = out.value.gamma1;
    }
    else if (!lay.tie && j == 1)
    {
      factor = out.value.gamma2;
    }
    else if (j == lay.Center())
    {
      factor = lay.scale;
    }
    else
    {
      factor = out.value.rabi[j - lay.Center() - 1];
    }
    out.sigma[j] = sd * factor;
  }
  return out;
}

void ValidateCurve(std::span<const ReflectionPoint> data)
{
  Require(static_cast<int>(data.size()) >= kMinPoints,
          "at least " + std::to_string(kMinPoints) + " reflection points are required");
  for (const auto &pt : data)
  {
    Require(std::isfinite(pt.detuning) && std::isfinite(pt.r.real()) &&
                std::isfinite(pt.r.imag()),
            "reflection data must be finite");
  }
}

SharedFitResult FitCurves(std::span<const std::vector<ReflectionPoint>> curves,
                          const std::vector<FitGuess> &guesses, const FitOptions &options)
{
  Physical start;
  start.gamma1 = 0.0;
  start.gamma2 = 0.0;
  start.omega01 = 0.0;
  for (std::size_t k = 0; k < curves.size(); ++k)
  {
    const FitGuess &g = guesses[k];
    start.gamma1 += *g.gamma1 / curves.size();
    start.gamma2 += *g.gamma2 / curves.size();
    start.omega01 += *g.omega01 / curves.size();
    start.rabi.push_back(*g.rabi_amp);
  }
  Require(std::isfinite(start.gamma1) && start.gamma1 > 0.0 && std::isfinite(start.gamma2) &&
              start.gamma2 > 0.0 && std::isfinite(start.omega01),
          "initial guess must be finite with positive rates");
  for (double om : start.rabi)
  {
    Require(std::isfinite(om) && om > 0.0, "initial Rabi guess must be positive");
  }

  Layout lay;
  lay.curves = static_cast<int>(curves.size());
  lay.scale = start.gamma2;
  EngineResult res = RunEngine(lay, curves, start, options);

  bool at_constraint = false;
  if (res.value.gamma2 < 0.5 * res.value.gamma1 * (1.0 - 1e-12))
  {
    lay.tie = true;
    Physical tied = res.value;
    tied.gamma1 = 0.5 * (res.value.gamma1 + 2.0 * res.value.gamma2);
    tied.gamma2 = 0.5 * tied.gamma1;
    res = RunEngine(lay, curves, tied, options);
    at_constraint = true;
  }

  SharedFitResult out;
  out.gamma1 = res.value.gamma1;
  out.gamma2 = res.value.gamma2;
  out.omega01 = res.value.omega01;
  out.gamma1_err = res.sigma[0];
  out.gamma2_err = lay.tie ? 0.5 * res.sigma[0] : res.sigma[1];
  out.omega01_err = res.sigma[lay.Center()];
  out.rabi_amps = res.value.rabi;
  for (int k = 0; k < lay.curves; ++k)
  {
    out.rabi_amp_errs.push_back(res.sigma[lay.Rabi(k)]);
  }
  out.residual_norm = res.residual_norm;
  out.converged = std::isfinite(out.residual_norm);
  out.at_constraint = at_constraint;
  out.iterations = res.iterations;
  return out;
}

}  // namespace

FitGuess InitialGuess(std::span<const ReflectionPoint> data)
{
  ValidateCurve(data);
  const auto peak = std::max_element(data.begin(), data.end(), [](const auto &a, const auto &b) {
    return a.r.real() < b.r.real();
  });
  Require(peak->r.real() > 0.0, "reflection data show no resonance");
  const double center = peak->detuning;

  // Im r / Re r = (detuning - omega01) / gamma2 exactly.
  double num = 0.0;
  double den = 0.0;
  for (const auto &pt : data)
  {
    num += (pt.detuning - center) * pt.r.real() * pt.r.imag();
    den += pt.r.imag() * pt.r.imag();
  }

  // Re r = A / (W^2 + d^2): weighted linear fit of 1/Re r = alpha + beta d^2.
  Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto &pt : data)
  {
    if (pt.r.real() <= 0.0)
    {
      continue;
    }
    const double d = pt.detuning - center;
    const Eigen::Vector2d row(pt.r.real(), pt.r.real() * d * d);
    normal += row * row.transpose();
    rhs += row;
  }
  const Eigen::Vector2d ab = normal.ldlt().solve(rhs);

  double span = 0.0;
  for (const auto &pt : data)
  {
    span = std::max(span, std::abs(pt.detuning - center));
  }
  double width = (ab[0] > 0.0 && ab[1] > 0.0) ? std::sqrt(ab[0] / ab[1]) : 0.25 * span;
  double gamma2 = (num > 0.0 && den > 0.0) ? num / den : width;
  gamma2 = std::min(gamma2, width);
  if (!(gamma2 > 0.0))
  {
    gamma2 = 0.25 * span;
  }
  const double amplitude = ab[1] > 0.0 ? 1.0 / ab[1] : peak->r.real() * width * width;
  double gamma1 = std::min(2.0 * amplitude / gamma2, 2.0 * gamma2);
  const double rabi2 = std::max((width * width - gamma2 * gamma2) * gamma1 / gamma2,
                                1e-4 * gamma1 * gamma2);

  FitGuess g;
  g.gamma1 = gamma1;
  g.gamma2 = gamma2;
  g.rabi_amp = std::sqrt(rabi2);
  g.omega01 = center;
  return g;
}

FitResult FitReflection(std::span<const ReflectionPoint> data, const FitGuess &guess,
                        const FitOptions &options)
{
  ValidateCurve(data);
  FitGuess g = InitialGuess(data);
  if (guess.gamma1) g.gamma1 = guess.gamma1;
  if (guess.gamma2) g.gamma2 = guess.gamma2;
  if (guess.rabi_amp) g.rabi_amp = guess.rabi_amp;
  if (guess.omega01) g.omega01 = guess.omega01;

  const std::vector<std::vector<ReflectionPoint>> curves{{data.begin(), data.end()}};
  const SharedFitResult s = FitCurves(curves, {g}, options);

  FitResult r;
  r.gamma1 = s.gamma1;
  r.gamma2 = s.gamma2;
  r.rabi_amp = s.rabi_amps.front();
  r.omega01 = s.omega01;
  r.gamma1_err = s.gamma1_err;
  r.gamma2_err = s.gamma2_err;
  r.rabi_amp_err = s.rabi_amp_errs.front();
  r.omega01_err = s.omega01_err;
  r.residual_norm = s.residual_norm;
  r.converged = s.converged;
  r.at_constraint = s.at_constraint;
  r.iterations = s.iterations;
  return r;
}

SharedFitResult FitReflectionShared(std::span<const std::vector<ReflectionPoint>> curves,
                                    const FitOptions &options)
{
  Require(!curves.empty(), "at least one curve is required");
  std::vector<FitGuess> guesses;
  for (const auto &c : curves)
  {
    guesses.push_back(InitialGuess(c));
  }
  return FitCurves(curves, guesses, options);
}

// ---------------------------------------------------------------------------

double PowerCalibration::RabiAt(double power_db) const
{
  return slope * std::pow(10.0, power_db / 20.0) + offset;
}

PowerCalibration CalibratePower(std::span<const PowerSample> samples)
{
  Require(samples.size() >= 2, "power calibration needs at least two samples");
  PowerCalibration cal;
  cal.samples.assign(samples.begin(), samples.end());
  std::sort(cal.samples.begin(), cal.samples.end(),
            [](const auto &a, const auto &b) { return a.power_db < b.power_db; });
  for (const auto &s : cal.samples)
  {
    Require(std::isfinite(s.power_db) && std::isfinite(s.rabi_amp) && s.rabi_amp >= 0.0,
            "power samples must be finite with non-negative Rabi amplitude");
  }
  for (std::size_t k = 1; k < cal.samples.size(); ++k)
  {
    if (!(cal.samples[k].power_db > cal.samples[k - 1].power_db) ||
        !(cal.samples[k].rabi_amp > cal.samples[k - 1].rabi_amp))
    {
      Fail(ErrorKind::FitFailure,
           "degenerate power calibration: Rabi amplitude must increase strictly with power");
    }
  }

  // Ordinary least squares on u = 10^(P/20).
  double su = 0.0, so = 0.0, suu = 0.0, suo = 0.0;
  const double n = static_cast<double>(cal.samples.size());
  for (const auto &s : cal.samples)
  {
    const double u = std::pow(10.0, s.power_db / 20.0);
    su += u;
    so += s.rabi_amp;
    suu += u * u;
    suo += u * s.rabi_amp;
  }
  const double det = n * suu - su * su;
  cal.slope = (n * suo - su * so) / det;
  cal.offset = (so - cal.slope * su) / n;
  return cal;
}

// ---------------------------------------------------------------------------

std::vector<ReflectionPoint> SynthesizeReflection(const AtomParams &atom,
                                                  const SynthSettings &settings)
{
  Validate(atom);
  Require(settings.relative_noise >= 0.0, "noise must be non-negative");
  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ReflectionPoint> out;
  out.reserve(settings.detunings.size());
  for (double det : settings.detunings)
  {
    const Complex r = ReflectionCoefficient(atom, settings.rabi_amp, det - settings.omega01);
    const double re = gauss(rng);
    const double im = gauss(rng);
    const Complex noisy = r + settings.relative_noise * std::abs(r) * Complex(re, im);
    out.push_back({det, noisy, 1.0 - noisy});
  }
  return out;
}

namespace
{

double ParseDouble(std::string_view field, int line)
{
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front())))
    field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back())))
    field.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
  {
    Fail(ErrorKind::Io, "line " + std::to_string(line) + ": cannot parse '" +
                            std::string(field) + "' as a number");
  }
  return v;
}

}  // namespace

std::vector<ReflectionPoint> ParseTransmissionCsv(const std::string &text)
{
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int col_det = -1, col_re = -1, col_im = -1;
  std::vector<ReflectionPoint> out;
  while (std::getline(in, line))
  {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true)
    {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos)
        break;
      rest.remove_prefix(comma + 1);
    }
    if (col_det < 0)
    {
      for (int k = 0; k < static_cast<int>(fields.size()); ++k)
      {
        std::string name(fields[k]);
        name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
        if (name == "detuning_hz") col_det = k;
        if (name == "re_t") col_re = k;
        if (name == "im_t") col_im = k;
      }
      if (col_det < 0 || col_re < 0 || col_im < 0)
      {
        Fail(ErrorKind::Io, "CSV header must contain detuning_hz, re_t, im_t");
      }
      continue;
    }
    const int need = std::max({col_det, col_re, col_im});
    if (static_cast<int>(fields.size()) <= need)
    {
      Fail(ErrorKind::Io, "line " + std::to_string(lineno) + ": too few columns");
    }
    const double det = units::kTwoPi * ParseDouble(fields[col_det], lineno);
    const Complex t(ParseDouble(fields[col_re], lineno), ParseDouble(fields[col_im], lineno));
    out.push_back({det, 1.0 - t, t});
  }
  if (col_det < 0)
  {
    Fail(ErrorKind::Io, "CSV has no header");
  }
  return out;
}

std::vector<ReflectionPoint> ReadTransmissionCsv(const std::filesystem::path &path)
{
  std::ifstream f(path);
  if (!f)
  {
    Fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::stringstream buf;
  buf << f.rdbuf();
  return ParseTransmissionCsv(buf.str());
}

std::string FormatTransmissionCsv(std::span<const ReflectionPoint> data)
{
  std::string out = "detuning_hz,re_t,im_t\n";
  char buf[64];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
  };
  for (const auto &pt : data)
  {
    put(pt.detuning / units::kTwoPi);
    out += ',';
    put(pt.t.real());
    out += ',';
    put(pt.t.imag());
    out += '\n';
  }
  return out;
}

}  // namespace sbm
