#include "sbm/experiment_runner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <tuple>

#include <omp.h>

#include "sbm/errors.hpp"
#include "sbm/units.hpp"

namespace sbm
{

namespace
{

struct PointResult
{
  std::vector<double> analytic;  ///< per (order, side), side-major inside order
  std::vector<double> oracle;
  bool has_oracle = false;
  OracleDiagnostics diag;
};

bool StrictlyMonotone(const std::vector<double> &g)
{
  if (g.size() < 2)
  {
    return true;
  }
  const bool up = g[1] > g[0];
  for (std::size_t k = 1; k < g.size(); ++k)
  {
    if (up ? !(g[k] > g[k - 1]) : !(g[k] < g[k - 1]))
    {
      return false;
    }
  }
  return true;
}

std::vector<int> SortedOrders(const SweepSpec &spec)
{
  std::vector<int> orders = spec.orders;
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  return orders;
}

BichromaticDrive DriveAt(const SweepSpec &spec, int i1, int i2)
{
  BichromaticDrive d = spec.drive;
  switch (spec.kind)
  {
    case SweepKind::Amplitude:
      d.omega_minus_amp = spec.minus_scale * spec.grid[i1];
      d.omega_plus_amp = spec.plus_scale * spec.grid[i1];
      break;
    case SweepKind::Asymmetric:
      d.omega_minus_amp = std::pow(10.0, spec.offset_db / 20.0) * spec.grid[i1];
      d.omega_plus_amp = spec.grid[i1];
      break;
    case SweepKind::Detuning:
      d.central_detuning = spec.grid[i1];
      d.omega_minus_amp = spec.grid2[i2];
      d.omega_plus_amp = spec.grid2[i2];
      break;
  }
  return d;
}

bool OracleSampled(const SweepSpec &spec, int i1, int i2)
{
  return spec.engine != Engine::Analytic && i1 % spec.oracle_stride == 0 &&
         i2 % spec.oracle_stride == 0;
}

PointResult EvaluatePoint(const SweepSpec &spec, const std::vector<int> &orders, int i1, int i2)
{
  const BichromaticDrive drive = DriveAt(spec, i1, i2);
  const double norm = spec.normalize ? spec.atom.gamma1 * spec.atom.gamma1 : 1.0;
  PointResult out;
  out.diag.grid_index = i1;
  out.diag.grid2_index = i2;

  const MixingAngles angles = DeriveMixingAngles(spec.atom, drive);
  for (int p : orders)
  {
    for (Side side : {Side::Minus, Side::Plus})
    {
      out.analytic.push_back(std::norm(SidebandAmplitude(angles, drive, p, side)) / norm);
    }
  }

  if (OracleSampled(spec, i1, i2))
  {
    const OracleSpectrum o = SteadyHarmonics(spec.atom, drive, orders.back(), spec.oracle_settings);
    for (int p : orders)
    {
      for (Side side : {Side::Minus, Side::Plus})
      {
        out.oracle.push_back(std::norm(o.spectrum.At(p, side)) / norm);
      }
    }
    out.has_oracle = true;
    out.diag.even_to_odd_ratio = o.even_to_odd_ratio;
    out.diag.steps = o.steps;
    out.diag.windows = o.windows_used;
  }
  return out;
}

std::vector<PointResult> EvaluateGrid(const SweepSpec &spec, const std::vector<int> &orders,
                                      const ExecutionPolicy &policy)
{
  const int n1 = static_cast<int>(spec.grid.size());
  const int n2 = spec.kind == SweepKind::Detuning ? static_cast<int>(spec.grid2.size()) : 1;
  const long total = static_cast<long>(n1) * n2;
  std::vector<PointResult> results(total);

  // Oracle-only runs skip the points it does not sample.
  auto wanted = [&](long k) {
    return spec.engine != Engine::Oracle ||
           OracleSampled(spec, static_cast<int>(k / n2), static_cast<int>(k % n2));
  };

  if (!policy.parallel)
  {
    for (long k = 0; k < total; ++k)
    {
      if (wanted(k))
      {
        results[k] = EvaluatePoint(spec, orders, static_cast<int>(k / n2),
                                   static_cast<int>(k % n2));
      }
    }
    return results;
  }

  const int workers = policy.workers > 0 ? policy.workers : omp_get_max_threads();
  std::vector<std::exception_ptr> errors(total);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long k = 0; k < total; ++k)
  {
    if (!wanted(k))
    {
      continue;
    }
    try
    {
      results[k] =
          EvaluatePoint(spec, orders, static_cast<int>(k / n2), static_cast<int>(k % n2));
    }
    catch (...)
    {
      errors[k] = std::current_exception();
    }
  }
  for (const auto &e : errors)
  {
    if (e)
    {
      std::rethrow_exception(e);
    }
  }
  return results;
}

}  // namespace

void Validate(const SweepSpec &spec)
{
  Validate(spec.atom);
  Require(!spec.grid.empty(), "sweep grid must be non-empty");
  Require(StrictlyMonotone(spec.grid), "sweep grid must be strictly monotone");
  for (double v : spec.grid)
  {
    Require(std::isfinite(v), "sweep grid values must be finite");
  }
  if (spec.kind == SweepKind::Detuning)
  {
    Require(!spec.grid2.empty(), "detuning map needs a non-empty amplitude grid");
    Require(StrictlyMonotone(spec.grid2), "amplitude grid must be strictly monotone");
    for (double v : spec.grid2)
    {
      Require(std::isfinite(v) && v > 0.0, "amplitude grid values must be positive");
    }
  }
  else
  {
    for (double v : spec.grid)
    {
      Require(v > 0.0, "amplitude grid values must be positive");
    }
    Require(spec.minus_scale >= 0.0 && spec.plus_scale >= 0.0 &&
                (spec.minus_scale > 0.0 || spec.plus_scale > 0.0),
            "amplitude scales must be non-negative and not both zero");
    Require(std::isfinite(spec.offset_db), "offset_db must be finite");
  }
  Require(!spec.orders.empty(), "at least one order is required");
  for (int p : spec.orders)
  {
    Require(p >= 0, "orders must be >= 0");
  }
  Require(spec.oracle_stride >= 1, "oracle_stride must be >= 1");
  Require(std::isfinite(spec.drive.half_splitting) && spec.drive.half_splitting > 0.0,
          "half_splitting must be positive");
  Require(std::isfinite(spec.drive.central_detuning), "detuning must be finite");
}

SweepTable RunSweep(const SweepSpec &spec, const ExecutionPolicy &policy)
{
  Validate(spec);
  const std::vector<int> orders = SortedOrders(spec);
  const std::vector<PointResult> results = EvaluateGrid(spec, orders, policy);

  SweepTable table;
  table.spec = spec;
  table.two_dimensional = spec.kind == SweepKind::Detuning;
  table.dual = spec.engine == Engine::Dual;

  const int n2 = table.two_dimensional ? static_cast<int>(spec.grid2.size()) : 1;
  for (std::size_t k = 0; k < results.size(); ++k)
  {
    const PointResult &pr = results[k];
    const int i1 = static_cast<int>(k) / n2;
    const int i2 = static_cast<int>(k) % n2;
    if (pr.has_oracle)
    {
      table.diagnostics.push_back(pr.diag);
    }
    if (pr.analytic.empty())
    {
      continue;
    }
    for (std::size_t j = 0; j < orders.size(); ++j)
    {
      for (int s = 0; s < 2; ++s)
      {
        const std::size_t slot = 2 * j + s;
        SweepRow row;
        row.grid_index = i1;
        row.grid2_index = i2;
        row.grid_value = units::ToMHz(spec.grid[i1]);
        if (table.two_dimensional)
        {
          row.grid_value2 = units::ToMHz(spec.grid2[i2]);
        }
        row.p = orders[j];
        row.side = s == 0 ? Side::Minus : Side::Plus;
        if (spec.engine == Engine::Oracle)
        {
          row.intensity = pr.oracle[slot];
        }
        else
        {
          row.intensity = pr.analytic[slot];
          if (table.dual && pr.has_oracle)
          {
            row.oracle_intensity = pr.oracle[slot];
            const double a = std::sqrt(pr.analytic[slot]);
            const double o = std::sqrt(pr.oracle[slot]);
            row.rel_dev = a > 0.0 ? std::abs(o - a) / a : std::abs(o - a);
          }
        }
        table.rows.push_back(row);
      }
    }
  }
  return table;
}

SweepTable SweepAmplitude(SweepSpec spec, const ExecutionPolicy &policy)
{
  spec.kind = SweepKind::Amplitude;
  return RunSweep(spec, policy);
}

SweepTable SweepAsymmetric(SweepSpec spec, double offset_db, const ExecutionPolicy &policy)
{
  spec.kind = SweepKind::Asymmetric;
  spec.offset_db = offset_db;
  return RunSweep(spec, policy);
}

SweepTable SweepDetuningMap(SweepSpec spec, const ExecutionPolicy &policy)
{
  spec.kind = SweepKind::Detuning;
  return RunSweep(spec, policy);
}

std::vector<AsymmetryEntry> AsymmetryRatios(const SweepTable &table)
{
  std::map<std::tuple<int, int, int>, std::pair<double, double>> pairs;
  std::map<std::tuple<int, int, int>, double> grid_values;
  for (const auto &row : table.rows)
  {
    const auto key = std::make_tuple(row.grid_index, row.grid2_index, row.p);
    auto &pr = pairs[key];
    (row.side == Side::Minus ? pr.first : pr.second) = row.intensity;
    grid_values[key] = row.grid_value;
  }
  std::vector<AsymmetryEntry> out;
  for (const auto &[key, pr] : pairs)
  {
    AsymmetryEntry e;
    e.grid_index = std::get<0>(key);
    e.grid_value = grid_values[key];
    e.p = std::get<2>(key);
    e.ratio = pr.second > 0.0 ? pr.first / pr.second : INFINITY;
    out.push_back(e);
  }
  return out;
}

double MaxRelativeDeviation(const SweepTable &table)
{
  double worst = 0.0;
  for (const auto &row : table.rows)
  {
    if (row.rel_dev)
    {
      worst = std::max(worst, *row.rel_dev);
    }
  }
  return worst;
}

ExtremaReport FindExtrema(const SweepTable &table, Axis axis)
{
  struct Sample
  {
    int index;
    double x;
    double y;
  };
  // key: (p, side, index on the other axis)
  std::map<std::tuple<int, int, int>, std::vector<Sample>> groups;
  std::map<std::tuple<int, int, int>, std::optional<double>> others;
  for (const auto &row : table.rows)
  {
    const bool along_grid = axis == Axis::Grid;
    Require(along_grid || row.grid_value2, "table has no second axis");
    const int other_index = along_grid ? row.grid2_index : row.grid_index;
    const auto key = std::make_tuple(row.p, static_cast<int>(row.side), other_index);
    groups[key].push_back({along_grid ? row.grid_index : row.grid2_index,
                           along_grid ? row.grid_value : *row.grid_value2, row.intensity});
    others[key] = along_grid ? row.grid_value2 : std::optional<double>(row.grid_value);
  }

  ExtremaReport report;
  for (auto &[key, samples] : groups)
  {
    std::sort(samples.begin(), samples.end(),
              [](const Sample &a, const Sample &b) { return a.index < b.index; });
    const int p = std::get<0>(key);
    const Side side = static_cast<Side>(std::get<1>(key));
    const auto &other = others[key];

    const auto top = std::max_element(samples.begin(), samples.end(),
                                      [](const Sample &a, const Sample &b) { return a.y < b.y; });
    if (top == samples.begin() || top == samples.end() - 1)
    {
      report.boundary.push_back({p, side, other, top->x});
    }
    for (std::size_t k = 1; k + 1 < samples.size(); ++k)
    {
      const Sample &a = samples[k - 1];
      const Sample &b = samples[k];
      const Sample &c = samples[k + 1];
      if (!(b.y > a.y && b.y >= c.y))
      {
        continue;
      }
      const double denom = (a.x - b.x) * (a.x - c.x) * (b.x - c.x);
      const double qa = (c.x * (b.y - a.y) + b.x * (a.y - c.y) + a.x * (c.y - b.y)) / denom;
      const double qb = (c.x * c.x * (a.y - b.y) + b.x * b.x * (c.y - a.y) +
                         a.x * a.x * (b.y - c.y)) /
                        denom;
      Extremum e{p, side, other, b.x, b.y};
      if (qa < 0.0)
      {
        const double xv = -qb / (2.0 * qa);
        // Lagrange form evaluated at the vertex.
        const double yv = a.y * (xv - b.x) * (xv - c.x) / ((a.x - b.x) * (a.x - c.x)) +
                          b.y * (xv - a.x) * (xv - c.x) / ((b.x - a.x) * (b.x - c.x)) +
                          c.y * (xv - a.x) * (xv - b.x) / ((c.x - a.x) * (c.x - b.x));
        e.location = xv;
        e.value = yv;
      }
      report.extrema.push_back(e);
    }
  }
  return report;
}

std::vector<double> LogGrid(double first, double last, int n)
{
  Require(n >= 1 && first > 0.0 && last > 0.0, "log grid needs n >= 1 and positive ends");
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k)
  {
    g[k] = n == 1 ? first : first * std::pow(last / first, static_cast<double>(k) / (n - 1));
  }
  return g;
}

std::vector<double> LinearGrid(double first, double last, int n)
{
  Require(n >= 1, "linear grid needs n >= 1");
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k)
  {
    g[k] = n == 1 ? first : first + (last - first) * static_cast<double>(k) / (n - 1);
  }
  return g;
}

const char *ToString(SweepKind kind)
{
  switch (kind)
  {
    case SweepKind::Amplitude:
      return "amplitude";
    case SweepKind::Asymmetric:
      return "asymmetric";
    case SweepKind::Detuning:
      return "detuning";
  }
  return "unknown";
}

const char *ToString(Engine engine)
{
  switch (engine)
  {
    case Engine::Analytic:
      return "analytic";
    case Engine::Oracle:
      return "oracle";
    case Engine::Dual:
      return "dual";
  }
  return "unknown";
}

}  // namespace sbm
