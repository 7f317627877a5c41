#include "sbm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbm/analytic_mixing.hpp"
#include "sbm/calibration_fit.hpp"
#include "sbm/experiment_runner.hpp"
#include "sbm/units.hpp"

namespace sbm::cli
{

namespace
{

using nlohmann::json;
using units::FromKHz;
using units::FromMHz;
using units::ToMHz;

/// Every flag, in "/2pi" units as typed. Unset optionals fall back to
/// per-command defaults.
struct RunConfig
{
  std::string command;

  double gamma1_mhz = 2.2;
  std::optional<double> gamma2_mhz;
  std::optional<double> omega_mhz;
  std::optional<double> omega_minus_mhz;
  std::optional<double> omega_plus_mhz;
  double detuning_mhz = 0.0;
  double dsplit_khz = 5.0;
  int pmax = 4;

  std::optional<double> grid_min_mhz;
  std::optional<double> grid_max_mhz;
  std::optional<int> grid_points;
  std::string grid_scale = "log";
  double det_min_mhz = -20.0;
  double det_max_mhz = 20.0;
  int det_points = 201;
  std::vector<int> orders;
  std::string engine = "analytic";
  std::optional<int> oracle_stride;
  double offset_db = 1.0;
  std::optional<double> amplitude_ratio;
  double minus_scale = 1.0;
  double plus_scale = 1.0;
  bool raw = false;
  double tolerance = 1e-2;

  std::vector<std::string> inputs;
  std::vector<double> powers_db;
  std::string ladder;
  std::string mode = "shared";

  double omega01_mhz = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 1;

  std::string out;
  std::vector<std::string> format;
  bool wall_clock = false;
  int workers = 0;
  bool serial = false;
  bool verbose = false;
};

std::vector<std::string> SplitList(const std::string &s)
{
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s)
  {
    if (c == ',' || c == ' ' || c == '[' || c == ']' || c == '"')
    {
      if (!cur.empty())
        parts.push_back(std::move(cur)), cur.clear();
    }
    else
    {
      cur += c;
    }
  }
  if (!cur.empty())
    parts.push_back(std::move(cur));
  return parts;
}

std::vector<int> OrdersOr(const RunConfig &c, std::vector<int> fallback)
{
  return c.orders.empty() ? fallback : c.orders;
}

/// Single output format, or `fallback` when none was given.
std::string OneFormat(const RunConfig &c, const char *fallback)
{
  Require(c.format.size() <= 1, "format: this output takes a single format");
  return c.format.empty() ? fallback : c.format.front();
}

AtomParams MakeAtom(const RunConfig &c)
{
  AtomParams atom;
  atom.gamma1 = FromMHz(c.gamma1_mhz);
  Require(std::isfinite(atom.gamma1) && atom.gamma1 > 0.0, "gamma1-mhz must be positive");
  if (c.gamma2_mhz)
  {
    const double g2 = FromMHz(*c.gamma2_mhz);
    const double phi = g2 - 0.5 * atom.gamma1;
    Require(std::isfinite(g2) && phi >= -1e-12 * atom.gamma1, "gamma2-mhz must be >= gamma1-mhz / 2");
    atom.gamma_phi = std::max(phi, 0.0);
  }
  atom.omega01 = FromMHz(c.omega01_mhz);
  Validate(atom);
  return atom;
}

BichromaticDrive MakeDrive(const RunConfig &c, double default_omega_mhz)
{
  const double omega = c.omega_mhz.value_or(default_omega_mhz);
  BichromaticDrive d;
  d.omega_minus_amp = FromMHz(c.omega_minus_mhz.value_or(omega));
  d.omega_plus_amp = FromMHz(c.omega_plus_mhz.value_or(omega));
  d.central_detuning = FromMHz(c.detuning_mhz);
  d.half_splitting = FromKHz(c.dsplit_khz);
  return d;
}

Engine ParseEngine(const std::string &s)
{
  if (s == "analytic")
    return Engine::Analytic;
  if (s == "oracle")
    return Engine::Oracle;
  if (s == "dual")
    return Engine::Dual;
  Fail(ErrorKind::InvalidArgument, "engine must be analytic, oracle or dual");
}

std::vector<double> MakeGrid(double lo_mhz, double hi_mhz, int n, const std::string &scale)
{
  Require(n >= 1, "grid needs at least one point");
  if (scale == "log")
    return LogGrid(FromMHz(lo_mhz), FromMHz(hi_mhz), n);
  if (scale == "linear")
    return LinearGrid(FromMHz(lo_mhz), FromMHz(hi_mhz), n);
  Fail(ErrorKind::InvalidArgument, "grid-scale must be log or linear");
}

std::optional<std::string> Timestamp(bool wall_clock)
{
  std::time_t t = 0;
  if (const char *epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch)
  {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(epoch, epoch + std::char_traits<char>::length(epoch), v);
    Require(ec == std::errc() && *ptr == '\0', "SOURCE_DATE_EPOCH is not an integer");
    t = static_cast<std::time_t>(v);
  }
  else if (wall_clock)
  {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  else
  {
    return std::nullopt;
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

ExecutionPolicy MakePolicy(const RunConfig &c)
{
  Require(c.workers >= 0, "workers must be >= 0");
  return {.parallel = !c.serial, .workers = c.workers};
}

void WriteText(const std::string &path, const std::string &text, std::ostream &out)
{
  if (path.empty() || path == "-")
  {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text))
  {
    Fail(ErrorKind::Io, "cannot write " + path);
  }
}

// ---------------------------------------------------------------------------

int CmdReflection(const RunConfig &c, std::ostream &out)
{
  const AtomParams atom = MakeAtom(c);
  const double omega = FromMHz(c.omega_mhz.value_or(0.3));
  Require(std::isfinite(omega) && omega >= 0.0, "omega-mhz must be >= 0");
  const auto detunings = LinearGrid(FromMHz(c.det_min_mhz), FromMHz(c.det_max_mhz), c.det_points);
  std::vector<ReflectionPoint> curve;
  curve.reserve(detunings.size());
  for (double d : detunings)
  {
    curve.push_back(EvaluateReflection(atom, omega, d - *atom.omega01));
    curve.back().detuning = d;
  }
  const std::string fmt = OneFormat(c, "csv");
  if (fmt == "csv")
  {
    WriteText(c.out, FormatTransmissionCsv(curve), out);
    return kOk;
  }
  Require(fmt == "json", "reflection: format must be csv or json");
  json rows = json::array();
  for (const auto &p : curve)
  {
    rows.push_back({{"detuning_mhz", ToMHz(p.detuning)},
                    {"re_r", p.r.real()},
                    {"im_r", p.r.imag()},
                    {"re_t", p.t.real()},
                    {"im_t", p.t.imag()}});
  }
  json j = {{"gamma1_mhz", ToMHz(atom.gamma1)},
            {"gamma2_mhz", ToMHz(DephasingRate(atom))},
            {"omega_mhz", ToMHz(omega)},
            {"points", std::move(rows)}};
  WriteText(c.out, j.dump(1) + "\n", out);
  return kOk;
}

int CmdSpectrum(const RunConfig &c, std::ostream &out)
{
  const AtomParams atom = MakeAtom(c);
  const BichromaticDrive drive = MakeDrive(c, 1.1);
  Validate(drive);
  Require(c.pmax >= 0, "pmax must be >= 0");
  const MixingAngles angles = DeriveMixingAngles(atom, drive);
  const SidebandSpectrum spec = ScatteredSpectrum(angles, drive, c.pmax);
  const double g1sq = atom.gamma1 * atom.gamma1;
  const std::string fmt = OneFormat(c, "json");
  if (fmt == "csv")
  {
    std::ostringstream s;
    s << "index,p,side,re_mhz,im_mhz,abs_mhz,intensity\n";
    s.precision(17);
    for (const auto &e : spec.entries)
    {
      const int p = (std::abs(e.index) - 1) / 2;
      s << e.index << ',' << p << ',' << (e.index < 0 ? '-' : '+') << ',' << ToMHz(e.amplitude.real())
        << ',' << ToMHz(e.amplitude.imag()) << ',' << ToMHz(std::abs(e.amplitude)) << ','
        << std::norm(e.amplitude) / g1sq << '\n';
    }
    WriteText(c.out, s.str(), out);
    return kOk;
  }
  Require(fmt == "json", "spectrum: format must be json or csv");
  json entries = json::array();
  for (const auto &e : spec.entries)
  {
    entries.push_back({{"index", e.index},
                       {"p", (std::abs(e.index) - 1) / 2},
                       {"side", e.index < 0 ? "-" : "+"},
                       {"re_mhz", ToMHz(e.amplitude.real())},
                       {"im_mhz", ToMHz(e.amplitude.imag())},
                       {"abs_mhz", ToMHz(std::abs(e.amplitude))},
                       {"intensity", std::norm(e.amplitude) / g1sq}});
  }
  json j = {{"version", kFormatVersion},
            {"gamma1_mhz", ToMHz(atom.gamma1)},
            {"gamma2_mhz", ToMHz(DephasingRate(atom))},
            {"omega_minus_mhz", ToMHz(drive.omega_minus_amp)},
            {"omega_plus_mhz", ToMHz(drive.omega_plus_amp)},
            {"detuning_mhz", ToMHz(drive.central_detuning)},
            {"dsplit_khz", units::ToKHz(drive.half_splitting)},
            {"theta", angles.theta},
            {"y", angles.y},
            {"p_max", spec.p_max},
            {"tail_bound", spec.tail_bound},
            {"entries", std::move(entries)}};
  WriteText(c.out, j.dump(1) + "\n", out);
  return kOk;
}

SweepSpec BaseSweep(const RunConfig &c)
{
  SweepSpec s;
  s.atom = MakeAtom(c);
  s.drive = MakeDrive(c, 1.0);
  s.orders = OrdersOr(c, {1, 2, 3, 4});
  s.engine = ParseEngine(c.engine);
  s.oracle_stride = c.oracle_stride.value_or(4);
  s.normalize = !c.raw;
  s.output_path = c.out;
  s.grid = MakeGrid(c.grid_min_mhz.value_or(0.05), c.grid_max_mhz.value_or(12.0),
                    c.grid_points.value_or(96), c.grid_scale);
  return s;
}

OutputFormats ParseFormats(const std::vector<std::string> &list)
{
  OutputFormats f{.csv = false, .json = false, .svg = false};
  for (const auto &tok : list)
  {
    if (tok == "csv")
      f.csv = true;
    else if (tok == "json")
      f.json = true;
    else if (tok == "svg")
      f.svg = true;
    else
      Fail(ErrorKind::InvalidArgument, "format: unknown '" + tok + "'");
  }
  return f;
}

void ReportExtrema(const SweepTable &t, Axis axis, std::ostream &err)
{
  const ExtremaReport r = FindExtrema(t, axis);
  for (const auto &e : r.extrema)
  {
    err << "extremum p=" << e.p << " side=" << (e.side == Side::Minus ? '-' : '+');
    if (e.other)
      err << " at=" << *e.other;
    err << " location_mhz=" << e.location << " value=" << e.value << '\n';
  }
  for (const auto &b : r.boundary)
  {
    err << "boundary p=" << b.p << " side=" << (b.side == Side::Minus ? '-' : '+');
    if (b.other)
      err << " at=" << *b.other;
    err << " location_mhz=" << b.location << '\n';
  }
}

int EmitSweep(const RunConfig &c, const SweepTable &t, std::ostream &out, std::ostream &err)
{
  const auto ts = Timestamp(c.wall_clock);
  if (c.out.empty() || c.out == "-")
  {
    const std::string fmt = OneFormat(c, "csv");
    if (fmt == "csv")
      out << FormatCsv(t);
    else if (fmt == "json")
      out << FormatJson(t, ts);
    else if (fmt == "svg")
      out << FormatSvg(t);
    else
      Fail(ErrorKind::InvalidArgument, "format: stdout takes exactly one of csv, json, svg");
  }
  else
  {
    const auto written = EmitOutputs(t, c.out, ParseFormats(c.format.empty() ? std::vector<std::string>{"csv", "json"} : c.format), ts);
    if (c.verbose)
    {
      for (const auto &p : written)
        err << "wrote " << p.string() << '\n';
    }
  }
  if (c.verbose)
  {
    ReportExtrema(t, Axis::Grid, err);
  }
  return kOk;
}

int CmdSweepAmplitude(const RunConfig &c, std::ostream &out, std::ostream &err)
{
  SweepSpec s = BaseSweep(c);
  s.minus_scale = c.minus_scale;
  s.plus_scale = c.plus_scale;
  return EmitSweep(c, SweepAmplitude(std::move(s), MakePolicy(c)), out, err);
}

int CmdSweepAsymmetric(const RunConfig &c, std::ostream &out, std::ostream &err)
{
  double offset = c.offset_db;
  if (c.amplitude_ratio)
  {
    Require(*c.amplitude_ratio > 0.0, "amplitude-ratio must be positive");
    offset = 20.0 * std::log10(*c.amplitude_ratio);
  }
  const SweepTable t = SweepAsymmetric(BaseSweep(c), offset, MakePolicy(c));
  if (c.verbose)
  {
    for (const auto &a : AsymmetryRatios(t))
      err << "asymmetry grid_mhz=" << a.grid_value << " p=" << a.p << " ratio=" << a.ratio << '\n';
  }
  return EmitSweep(c, t, out, err);
}

int CmdSweepDetuning(const RunConfig &c, std::ostream &out, std::ostream &err)
{
  SweepSpec s = BaseSweep(c);
  s.grid = LinearGrid(FromMHz(c.det_min_mhz), FromMHz(c.det_max_mhz), c.det_points);
  s.grid2 = MakeGrid(c.grid_min_mhz.value_or(0.1), c.grid_max_mhz.value_or(8.0),
                     c.grid_points.value_or(24), c.grid_scale);
  return EmitSweep(c, SweepDetuningMap(std::move(s), MakePolicy(c)), out, err);
}

int CmdOracleCheck(const RunConfig &c, std::ostream &out)
{
  SweepSpec s;
  s.atom = MakeAtom(c);
  s.drive = MakeDrive(c, 1.0);
  s.engine = Engine::Dual;
  s.orders = OrdersOr(c, {0, 1, 2, 3, 4});
  s.oracle_stride = c.oracle_stride.value_or(1);
  s.grid = MakeGrid(c.grid_min_mhz.value_or(0.1), c.grid_max_mhz.value_or(8.0),
                    c.grid_points.value_or(12), c.grid_scale);
  const auto start = std::chrono::steady_clock::now();
  const SweepTable t = SweepAmplitude(std::move(s), MakePolicy(c));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json points = json::array();
  for (const auto &row : t.rows)
  {
    if (row.rel_dev)
    {
      points.push_back({{"omega_mhz", row.grid_value},
                        {"p", row.p},
                        {"side", row.side == Side::Minus ? "-" : "+"},
                        {"analytic", row.intensity},
                        {"oracle", *row.oracle_intensity},
                        {"rel_dev", *row.rel_dev}});
    }
  }
  double even = 0.0;
  for (const auto &d : t.diagnostics)
    even = std::max(even, d.even_to_odd_ratio);
  const double dev = MaxRelativeDeviation(t);
  json j = {{"version", kFormatVersion},
            {"dsplit_khz", units::ToKHz(t.spec.drive.half_splitting)},
            {"max_rel_dev", dev},
            {"tolerance", c.tolerance},
            {"within_tolerance", dev < c.tolerance},
            {"max_even_to_odd_ratio", even},
            {"points", std::move(points)}};
  if (c.verbose)
    j["seconds"] = seconds;
  WriteText(c.out, j.dump(1) + "\n", out);
  return kOk;
}

json FitToJson(const FitResult &r)
{
  return {{"gamma1_mhz", ToMHz(r.gamma1)},         {"gamma1_err_mhz", ToMHz(r.gamma1_err)},
          {"gamma2_mhz", ToMHz(r.gamma2)},         {"gamma2_err_mhz", ToMHz(r.gamma2_err)},
          {"omega_mhz", ToMHz(r.rabi_amp)},        {"omega_err_mhz", ToMHz(r.rabi_amp_err)},
          {"omega01_mhz", ToMHz(r.omega01)},       {"omega01_err_mhz", ToMHz(r.omega01_err)},
          {"residual_norm", r.residual_norm},      {"converged", r.converged},
          {"at_constraint", r.at_constraint},      {"iterations", r.iterations}};
}

json SharedToJson(const SharedFitResult &r)
{
  json omegas = json::array(), errs = json::array();
  for (std::size_t k = 0; k < r.rabi_amps.size(); ++k)
  {
    omegas.push_back(ToMHz(r.rabi_amps[k]));
    errs.push_back(ToMHz(r.rabi_amp_errs[k]));
  }
  return {{"gamma1_mhz", ToMHz(r.gamma1)},   {"gamma1_err_mhz", ToMHz(r.gamma1_err)},
          {"gamma2_mhz", ToMHz(r.gamma2)},   {"gamma2_err_mhz", ToMHz(r.gamma2_err)},
          {"omega01_mhz", ToMHz(r.omega01)}, {"omega01_err_mhz", ToMHz(r.omega01_err)},
          {"omega_mhz", std::move(omegas)},  {"omega_err_mhz", std::move(errs)},
          {"residual_norm", r.residual_norm}, {"converged", r.converged},
          {"at_constraint", r.at_constraint}, {"iterations", r.iterations}};
}

std::vector<std::vector<ReflectionPoint>> ReadCurves(const RunConfig &c)
{
  Require(!c.inputs.empty(), "--in is required");
  std::vector<std::vector<ReflectionPoint>> curves;
  for (const auto &path : c.inputs)
    curves.push_back(ReadTransmissionCsv(path));
  return curves;
}

int CmdFit(const RunConfig &c, std::ostream &out)
{
  const auto curves = ReadCurves(c);
  json j;
  j["version"] = kFormatVersion;
  if (curves.size() == 1 || c.mode == "per-curve")
  {
    json fits = json::array();
    for (std::size_t k = 0; k < curves.size(); ++k)
    {
      json f = FitToJson(FitReflection(curves[k]));
      f["input"] = c.inputs[k];
      fits.push_back(std::move(f));
    }
    j["mode"] = "per-curve";
    j["fits"] = std::move(fits);
  }
  else
  {
    Require(c.mode == "shared", "mode must be shared or per-curve");
    j["mode"] = "shared";
    j["inputs"] = c.inputs;
    j["fit"] = SharedToJson(FitReflectionShared(curves));
  }
  WriteText(c.out, j.dump(1) + "\n", out);
  return kOk;
}

std::vector<PowerSample> ReadLadder(const std::string &path)
{
  std::ifstream f(path);
  if (!f)
    Fail(ErrorKind::Io, "cannot open " + path);
  std::vector<PowerSample> samples;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(f, line))
  {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    if (!header)
    {
      Require(line == "power_db,omega_mhz", path + ": header must be power_db,omega_mhz");
      header = true;
      continue;
    }
    const auto parts = SplitList(line);
    double v[2] = {0, 0};
    bool ok = parts.size() == 2;
    for (std::size_t k = 0; ok && k < 2; ++k)
    {
      const auto [ptr, ec] = std::from_chars(parts[k].data(), parts[k].data() + parts[k].size(), v[k]);
      ok = ec == std::errc() && ptr == parts[k].data() + parts[k].size();
    }
    if (!ok)
      Fail(ErrorKind::Io, path + ":" + std::to_string(lineno) + ": malformed row");
    samples.push_back({v[0], FromMHz(v[1])});
  }
  return samples;
}

int CmdCalibrate(const RunConfig &c, std::ostream &out)
{
  std::vector<PowerSample> samples;
  json fits;
  if (!c.ladder.empty())
  {
    samples = ReadLadder(c.ladder);
  }
  else
  {
    Require(c.inputs.size() == c.powers_db.size(), "calibrate: give one --power-db per --in");
    const auto curves = ReadCurves(c);
    const SharedFitResult shared = FitReflectionShared(curves);
    fits = SharedToJson(shared);
    for (std::size_t k = 0; k < curves.size(); ++k)
      samples.push_back({c.powers_db[k], shared.rabi_amps[k]});
  }
  const PowerCalibration cal = CalibratePower(samples);
  json pts = json::array();
  for (const auto &s : cal.samples)
    pts.push_back({{"power_db", s.power_db}, {"omega_mhz", ToMHz(s.rabi_amp)}});
  json j = {{"version", kFormatVersion},
            {"model", "omega = slope * 10^(power_db/20) + offset"},
            {"slope_mhz", ToMHz(cal.slope)},
            {"offset_mhz", ToMHz(cal.offset)},
            {"samples", std::move(pts)}};
  if (!fits.is_null())
    j["fit"] = std::move(fits);
  WriteText(c.out, j.dump(1) + "\n", out);
  return kOk;
}

int CmdSynth(const RunConfig &c, std::ostream &out)
{
  const AtomParams atom = MakeAtom(c);
  SynthSettings s;
  s.rabi_amp = FromMHz(c.omega_mhz.value_or(0.3));
  s.omega01 = FromMHz(c.omega01_mhz);
  s.detunings = LinearGrid(FromMHz(c.det_min_mhz), FromMHz(c.det_max_mhz), c.det_points);
  s.relative_noise = c.noise;
  s.seed = c.seed;
  WriteText(c.out, FormatTransmissionCsv(SynthesizeReflection(atom, s)), out);
  return kOk;
}

void AddOptions(CLI::App &app, RunConfig &c)
{
  app.set_config("--config", "", "Flat key = value file; keys are flag names without dashes");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.allow_config_extras(CLI::config_extras_mode::error);

  const char *atom = "Atom";
  app.add_option("--gamma1-mhz", c.gamma1_mhz, "Radiative relaxation Gamma1/2pi")->group(atom);
  app.add_option("--gamma2-mhz", c.gamma2_mhz, "Dephasing Gamma2/2pi (default Gamma1/2)")->group(atom);
  app.add_option("--omega01-mhz", c.omega01_mhz, "Resonance offset on the detuning axis")->group(atom);

  const char *drive = "Drive";
  app.add_option("--omega-mhz", c.omega_mhz, "Drive amplitude Omega/2pi (both tones)")->group(drive);
  app.add_option("--omega-minus-mhz", c.omega_minus_mhz, "Amplitude of the lower tone")->group(drive);
  app.add_option("--omega-plus-mhz", c.omega_plus_mhz, "Amplitude of the upper tone")->group(drive);
  app.add_option("--detuning-mhz", c.detuning_mhz, "Central detuning/2pi")->group(drive);
  app.add_option("--dsplit-khz", c.dsplit_khz, "Half splitting of the tones/2pi")->group(drive);
  app.add_option("--pmax", c.pmax, "Highest order for spectrum")->group(drive);

  const char *sweep = "Sweep";
  app.add_option("--grid-min-mhz", c.grid_min_mhz, "First drive amplitude")->group(sweep);
  app.add_option("--grid-max-mhz", c.grid_max_mhz, "Last drive amplitude")->group(sweep);
  app.add_option("--grid-points", c.grid_points, "Number of drive amplitudes")->group(sweep);
  app.add_option("--grid-scale", c.grid_scale, "log or linear")->group(sweep);
  app.add_option("--det-min-mhz", c.det_min_mhz, "First detuning")->group(sweep);
  app.add_option("--det-max-mhz", c.det_max_mhz, "Last detuning")->group(sweep);
  app.add_option("--det-points", c.det_points, "Number of detunings")->group(sweep);
  app.add_option("--orders", c.orders, "Comma separated orders p")->group(sweep);
  app.add_option("--engine", c.engine, "analytic, oracle or dual")->group(sweep);
  app.add_option("--oracle-stride", c.oracle_stride, "Run the oracle at every n-th point")->group(sweep);
  app.add_option("--offset-db", c.offset_db, "Lower tone above upper tone, dB of amplitude")->group(sweep);
  app.add_option("--amplitude-ratio", c.amplitude_ratio, "Omega-/Omega+; overrides offset-db")->group(sweep);
  app.add_option("--minus-scale", c.minus_scale, "Omega- = scale * Omega in sweep-amplitude")->group(sweep);
  app.add_option("--plus-scale", c.plus_scale, "Omega+ = scale * Omega in sweep-amplitude")->group(sweep);
  app.add_flag("--raw", c.raw, "Report |Omega_sc|^2 in (rad/s)^2 instead of units of Gamma1^2")->group(sweep);
  app.add_option("--tolerance", c.tolerance, "oracle-check pass threshold")->group(sweep);

  const char *data = "Data";
  app.add_option("--in", c.inputs, "Transmission CSV (repeatable)")->group(data);
  app.add_option("--power-db", c.powers_db, "Generator power per --in (repeatable)")->group(data);
  app.add_option("--ladder", c.ladder, "CSV power_db,omega_mhz")->group(data);
  app.add_option("--mode", c.mode, "shared or per-curve")->group(data);
  app.add_option("--noise", c.noise, "Relative complex Gaussian noise")->group(data);
  app.add_option("--seed", c.seed, "Random seed")->group(data);

  const char *output = "Output";
  app.add_option("--out", c.out, "Output file, or base path for sweeps")->group(output);
  app.add_option("--format", c.format, "csv, json, svg (comma list for sweeps)")->group(output);
  app.add_flag("--wall-clock", c.wall_clock, "Stamp JSON with the current time")->group(output);
  app.add_option("--workers", c.workers, "Worker threads, 0 for all")
      ->envname("SIDEBAND_MIXER_WORKERS")
      ->group(output);
  app.add_flag("--serial", c.serial, "Use the serial reference path")->group(output);
  app.add_flag("-v,--verbose", c.verbose, "Diagnostics on stderr")->group(output);

  for (const char *name : {"--in", "--power-db", "--orders", "--format"})
    app.get_option(name)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->delimiter(',');

  const std::pair<const char *, const char *> commands[] = {
      {"reflection", "Single-tone reflection curve"},
      {"spectrum", "Sideband amplitudes for one drive setting"},
      {"sweep-amplitude", "Sideband intensities versus drive amplitude"},
      {"sweep-asymmetric", "Same with the lower tone offset in dB"},
      {"sweep-detuning", "Map over central detuning and amplitude"},
      {"oracle-check", "Compare closed form against the Bloch integration"},
      {"fit", "Fit transmission curves"},
      {"calibrate", "Map generator power to Rabi amplitude"},
      {"synth", "Generate a noisy transmission curve"},
  };
  for (const auto &[name, help] : commands)
  {
    auto *sub = app.add_subcommand(name, help)->fallthrough();
    sub->callback([&c, n = std::string(name)] { c.command = n; });
  }
  app.require_subcommand(1);
}

int Dispatch(const RunConfig &c, std::ostream &out, std::ostream &err)
{
  if (c.command == "reflection")
    return CmdReflection(c, out);
  if (c.command == "spectrum")
    return CmdSpectrum(c, out);
  if (c.command == "sweep-amplitude")
    return CmdSweepAmplitude(c, out, err);
  if (c.command == "sweep-asymmetric")
    return CmdSweepAsymmetric(c, out, err);
  if (c.command == "sweep-detuning")
    return CmdSweepDetuning(c, out, err);
  if (c.command == "oracle-check")
    return CmdOracleCheck(c, out);
  if (c.command == "fit")
    return CmdFit(c, out);
  if (c.command == "calibrate")
    return CmdCalibrate(c, out);
  if (c.command == "synth")
    return CmdSynth(c, out);
  Fail(ErrorKind::InvalidArgument, "no command");
}

int Report(std::ostream &err, const char *kind, int code, const std::string &message)
{
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "sideband-mixer: error kind=" << kind << " code=" << code << " message=" << json(flat).dump()
      << '\n';
  return code;
}

}  // namespace

int ExitCodeFor(ErrorKind kind)
{
  switch (kind)
  {
  case ErrorKind::InvalidArgument: return kInvalidArgument;
  case ErrorKind::DegenerateEvaluation: return kDegenerate;
  case ErrorKind::IntegrationFailure: return kIntegration;
  case ErrorKind::NonPeriodic: return kNonPeriodic;
  case ErrorKind::Aliasing: return kAliasing;
  case ErrorKind::FitFailure: return kFit;
  case ErrorKind::Io: return kIo;
  }
  return kInternal;
}

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
  RunConfig config;
  CLI::App app("Two-tone sideband mixing on a driven two-level scatterer", "sideband-mixer");
  AddOptions(app, config);
  try
  {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  }
  catch (const CLI::CallForHelp &)
  {
    out << app.help();
    return kOk;
  }
  catch (const CLI::CallForAllHelp &)
  {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  }
  catch (const CLI::ConfigError &e)
  {
    return Report(err, "config", kConfig, e.what());
  }
  catch (const CLI::FileError &e)
  {
    return Report(err, "config", kConfig, e.what());
  }
  catch (const CLI::ParseError &e)
  {
    return Report(err, "usage", kUsage, e.what());
  }

  try
  {
    return Dispatch(config, out, err);
  }
  catch (const Error &e)
  {
    return Report(err, ToString(e.kind()), ExitCodeFor(e.kind()), e.what());
  }
  catch (const std::exception &e)
  {
    return Report(err, "internal", kInternal, e.what());
  }
}

}  // namespace sbm::cli
