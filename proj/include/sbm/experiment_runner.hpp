#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sbm/analytic_mixing.hpp"
#include "sbm/bloch_oracle.hpp"

namespace sbm
{

enum class Engine
{
  Analytic,
  Oracle,
  Dual,
};

enum class SweepKind
{
  Amplitude,   ///< Om- = minus_scale * Omega, Om+ = plus_scale * Omega
  Asymmetric,  ///< Om+ = Omega, Om- = Omega * 10^(offset_db / 20)
  Detuning,    ///< 2-D map over central detuning (grid) x symmetric Omega (grid2)
};

struct SweepSpec
{
  SweepKind kind = SweepKind::Amplitude;
  std::vector<double> grid;   ///< Omega, or detuning for Detuning maps; rad/s
  std::vector<double> grid2;  ///< Omega for Detuning maps; rad/s
  AtomParams atom;
  BichromaticDrive drive;  ///< supplies half_splitting and the fixed detuning of 1-D sweeps
  std::vector<int> orders{1, 2, 3, 4};
  Engine engine = Engine::Analytic;
  int oracle_stride = 4;
  IntegrationSettings oracle_settings;
  double offset_db = 0.0;
  double minus_scale = 1.0;
  double plus_scale = 1.0;
  bool normalize = true;  ///< report |Omega_sc|^2 / Gamma1^2
  std::string output_path;
};

/// Grid values are reported as f = omega / 2pi in MHz.
struct SweepRow
{
  int grid_index = 0;
  int grid2_index = 0;
  double grid_value = 0.0;
  std::optional<double> grid_value2;
  int p = 0;
  Side side = Side::Plus;
  double intensity = 0.0;
  std::optional<double> oracle_intensity;
  std::optional<double> rel_dev;  ///< | |A_oracle| - |A_analytic| | / |A_analytic|
};

struct OracleDiagnostics
{
  int grid_index = 0;
  int grid2_index = 0;
  double even_to_odd_ratio = 0.0;
  std::size_t steps = 0;
  int windows = 0;
};

struct SweepTable
{
  SweepSpec spec;
  std::vector<SweepRow> rows;  ///< sorted by (grid_index, grid2_index, p, side)
  std::vector<OracleDiagnostics> diagnostics;
  bool two_dimensional = false;
  bool dual = false;
};

struct ExecutionPolicy
{
  bool parallel = true;
  int workers = 0;  ///< 0: OpenMP default
};

void Validate(const SweepSpec &spec);

/// Evaluates every grid point. The serial and parallel paths share the
/// per-point kernel and produce identical tables.
SweepTable RunSweep(const SweepSpec &spec, const ExecutionPolicy &policy = {});

SweepTable SweepAmplitude(SweepSpec spec, const ExecutionPolicy &policy = {});
SweepTable SweepAsymmetric(SweepSpec spec, double offset_db, const ExecutionPolicy &policy = {});
SweepTable SweepDetuningMap(SweepSpec spec, const ExecutionPolicy &policy = {});

struct AsymmetryEntry
{
  int grid_index = 0;
  double grid_value = 0.0;
  int p = 0;
  double ratio = 0.0;  ///< I(-(2p+1)) / I(+(2p+1))
};

std::vector<AsymmetryEntry> AsymmetryRatios(const SweepTable &table);

/// Largest rel_dev in a dual-engine table; 0 if none present.
double MaxRelativeDeviation(const SweepTable &table);

enum class Axis
{
  Grid,
  Grid2,
};

struct Extremum
{
  int p = 0;
  Side side = Side::Plus;
  std::optional<double> other;  ///< value on the orthogonal axis for 2-D tables
  double location = 0.0;        ///< refined position, same units as the table
  double value = 0.0;
};

struct BoundaryFlag
{
  int p = 0;
  Side side = Side::Plus;
  std::optional<double> other;
  double location = 0.0;
};

struct ExtremaReport
{
  std::vector<Extremum> extrema;
  std::vector<BoundaryFlag> boundary;  ///< groups whose largest value sits on the grid edge
};

/// Interior local maxima of `intensity` along `axis`, refined by a parabola
/// through the three bracketing samples.
ExtremaReport FindExtrema(const SweepTable &table, Axis axis = Axis::Grid);

std::vector<double> LogGrid(double first, double last, int n);
std::vector<double> LinearGrid(double first, double last, int n);

// ---------------------------------------------------------------------------
// Output. CSV starts with `# sideband-mixer v1` and carries the columns
// grid_value[,grid_value2],p,side,intensity[,oracle_intensity,rel_dev].

inline constexpr const char *kFormatVersion = "sideband-mixer v1";

std::string FormatCsv(const SweepTable &table);
std::vector<SweepRow> ParseCsv(const std::string &text);

/// One object {spec, rows, meta{version, timestamp}}; `timestamp` null if unset.
std::string FormatJson(const SweepTable &table, const std::optional<std::string> &timestamp);

/// Line plot for 1-D sweeps, one heatmap panel per order for 2-D maps.
std::string FormatSvg(const SweepTable &table);

struct OutputFormats
{
  bool csv = true;
  bool json = true;
  bool svg = false;
};

/// Writes <base>.csv / <base>.json / <base>.svg; returns the paths written.
std::vector<std::filesystem::path> EmitOutputs(const SweepTable &table,
                                               const std::filesystem::path &base,
                                               const OutputFormats &formats,
                                               const std::optional<std::string> &timestamp);

const char *ToString(SweepKind kind);
const char *ToString(Engine engine);

}  // namespace sbm
