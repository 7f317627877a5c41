#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sbm/errors.hpp"
#include "sbm/experiment_runner.hpp"
#include "sbm/units.hpp"

namespace sbm
{

namespace
{

using nlohmann::json;

void AppendNumber(std::string &out, double v)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

const char *SideLabel(Side s) { return s == Side::Minus ? "-" : "+"; }

std::vector<std::string_view> SplitFields(std::string_view line)
{
  std::vector<std::string_view> fields;
  while (true)
  {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos)
    {
      return fields;
    }
    line.remove_prefix(comma + 1);
  }
}

double ParseNumber(std::string_view s, int lineno)
{
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
  {
    Fail(ErrorKind::Io, "line " + std::to_string(lineno) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

json Optional(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

json ToMHzArray(const std::vector<double> &g)
{
  json a = json::array();
  for (double v : g)
  {
    a.push_back(units::ToMHz(v));
  }
  return a;
}

json SpecToJson(const SweepSpec &s)
{
  json j;
  j["kind"] = ToString(s.kind);
  j["grid_mhz"] = ToMHzArray(s.grid);
  if (s.kind == SweepKind::Detuning)
  {
    j["grid2_mhz"] = ToMHzArray(s.grid2);
  }
  j["atom"] = {{"gamma1_mhz", units::ToMHz(s.atom.gamma1)},
               {"gamma1_nr_mhz", units::ToMHz(s.atom.gamma1_nr)},
               {"gamma_phi_mhz", units::ToMHz(s.atom.gamma_phi)},
               {"gamma2_mhz", units::ToMHz(DephasingRate(s.atom))}};
  j["drive"] = {{"detuning_mhz", units::ToMHz(s.drive.central_detuning)},
                {"dsplit_khz", units::ToKHz(s.drive.half_splitting)}};
  j["orders"] = s.orders;
  j["engine"] = ToString(s.engine);
  j["oracle_stride"] = s.oracle_stride;
  j["oracle"] = {{"rel_tol", s.oracle_settings.rel_tol},
                 {"abs_tol", s.oracle_settings.abs_tol},
                 {"n_periods", s.oracle_settings.n_periods},
                 {"samples_per_period", s.oracle_settings.samples_per_period}};
  j["offset_db"] = s.offset_db;
  j["minus_scale"] = s.minus_scale;
  j["plus_scale"] = s.plus_scale;
  j["normalize"] = s.normalize;
  j["output_path"] = s.output_path;
  return j;
}

// Minimal SVG helpers ------------------------------------------------------

std::string Colour(double u)
{
  // Two-segment ramp: dark blue -> teal -> yellow.
  u = std::clamp(u, 0.0, 1.0);
  const double r = u < 0.5 ? 0.27 * (1 - 2 * u) + 0.13 * 2 * u : 0.13 + (0.99 - 0.13) * (2 * u - 1);
  const double g = u < 0.5 ? 0.0 + 0.57 * 2 * u : 0.57 + (0.91 - 0.57) * (2 * u - 1);
  const double b = u < 0.5 ? 0.33 + (0.55 - 0.33) * 2 * u : 0.55 - (0.55 - 0.14) * (2 * u - 1);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(r * 255),
                static_cast<int>(g * 255), static_cast<int>(b * 255));
  return buf;
}

const char *kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string LinePlot(const SweepTable &t)
{
  constexpr double W = 800, H = 500, L = 70, R = 20, T = 20, B = 50;
  std::map<std::pair<int, int>, std::vector<std::pair<double, double>>> curves;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto &row : t.rows)
  {
    if (!(row.intensity > 0.0))
    {
      continue;
    }
    const double ly = std::log10(row.intensity);
    curves[{row.p, static_cast<int>(row.side)}].push_back({row.grid_value, ly});
    xmin = std::min(xmin, row.grid_value);
    xmax = std::max(xmax, row.grid_value);
    ymin = std::min(ymin, ly);
    ymax = std::max(ymax, ly);
  }
  if (curves.empty())
  {
    xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  }
  const bool logx = xmin > 0.0 && xmax / xmin > 20.0;
  auto fx = [&](double x) {
    const double a = logx ? std::log10(xmin) : xmin;
    const double b = logx ? std::log10(xmax) : xmax;
    const double v = logx ? std::log10(x) : x;
    return L + (b > a ? (v - a) / (b - a) : 0.5) * (W - L - R);
  };
  auto fy = [&](double y) { return H - B - (ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.5) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << (logx ? "drive amplitude / 2pi (MHz, log)" : "grid value / 2pi (MHz)") << "</text>\n";
  s << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\">log10 intensity</text>\n";
  for (const auto &[key, pts] : curves)
  {
    s << "<polyline fill=\"none\" stroke=\"" << kPalette[key.first % 10] << "\""
      << (key.second < 0 ? " stroke-dasharray=\"6 3\"" : "") << " points=\"";
    for (const auto &[x, y] : pts)
    {
      s << fx(x) << ',' << fy(y) << ' ';
    }
    s << "\"/>\n";
  }
  int k = 0;
  for (const auto &[key, pts] : curves)
  {
    s << "<text x=\"" << W - R - 60 << "\" y=\"" << T + 16 * (++k) << "\" fill=\""
      << kPalette[key.first % 10] << "\">p=" << key.first << (key.second < 0 ? " -" : " +")
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string HeatMap(const SweepTable &t)
{
  std::map<int, std::vector<const SweepRow *>> panels;
  for (const auto &row : t.rows)
  {
    if (row.side == Side::Plus)
    {
      panels[row.p].push_back(&row);
    }
  }
  const int n1 = static_cast<int>(t.spec.grid.size());
  const int n2 = static_cast<int>(t.spec.grid2.size());
  constexpr double PW = 300, PH = 300, M = 40;
  const double W = M + panels.size() * (PW + M);
  const double H = PH + 2 * M;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  int panel = 0;
  for (const auto &[p, rows] : panels)
  {
    double lo = INFINITY, hi = -INFINITY;
    for (const SweepRow *r : rows)
    {
      if (r->intensity > 0.0)
      {
        lo = std::min(lo, std::log10(r->intensity));
        hi = std::max(hi, std::log10(r->intensity));
      }
    }
    const double x0 = M + panel * (PW + M);
    s << "<g class=\"heatmap\">\n";
    const double cw = PW / std::max(1, n1);
    const double ch = PH / std::max(1, n2);
    for (const SweepRow *r : rows)
    {
      const double v = r->intensity > 0.0 ? std::log10(r->intensity) : lo;
      const double u = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      s << "<rect x=\"" << x0 + r->grid_index * cw << "\" y=\"" << M + PH - (r->grid2_index + 1) * ch
        << "\" width=\"" << cw + 0.05 << "\" height=\"" << ch + 0.05 << "\" fill=\"" << Colour(u)
        << "\"/>\n";
    }
    s << "</g>\n";
    s << "<text x=\"" << x0 + PW / 2 << "\" y=\"" << M - 10 << "\" text-anchor=\"middle\">p=" << p
      << " (+ side)</text>\n";
    s << "<text x=\"" << x0 + PW / 2 << "\" y=\"" << M + PH + 25
      << "\" text-anchor=\"middle\">detuning / 2pi (MHz)</text>\n";
    ++panel;
  }
  s << "</svg>\n";
  return s.str();
}

void WriteFile(const std::filesystem::path &path, const std::string &content)
{
  if (path.has_parent_path())
  {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f)
  {
    Fail(ErrorKind::Io, "cannot write " + path.string());
  }
  f << content;
  if (!f)
  {
    Fail(ErrorKind::Io, "write failed for " + path.string());
  }
}

}  // namespace

std::string FormatCsv(const SweepTable &table)
{
  std::string out = "# ";
  out += kFormatVersion;
  out += '\n';
  out += table.two_dimensional ? "grid_value,grid_value2,p,side,intensity"
                               : "grid_value,p,side,intensity";
  if (table.dual)
  {
    out += ",oracle_intensity,rel_dev";
  }
  out += '\n';
  for (const auto &row : table.rows)
  {
    AppendNumber(out, row.grid_value);
    out += ',';
    if (table.two_dimensional)
    {
      AppendNumber(out, row.grid_value2.value_or(NAN));
      out += ',';
    }
    out += std::to_string(row.p);
    out += ',';
    out += SideLabel(row.side);
    out += ',';
    AppendNumber(out, row.intensity);
    if (table.dual)
    {
      out += ',';
      if (row.oracle_intensity)
      {
        AppendNumber(out, *row.oracle_intensity);
      }
      out += ',';
      if (row.rel_dev)
      {
        AppendNumber(out, *row.rel_dev);
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> ParseCsv(const std::string &text)
{
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> columns;
  std::vector<SweepRow> rows;
  std::map<double, int> index1, index2;
  bool saw_version = false;
  while (std::getline(in, line))
  {
    ++lineno;
    if (line.empty())
    {
      continue;
    }
    if (line.front() == '#')
    {
      saw_version = saw_version || line.find(kFormatVersion) != std::string::npos;
      continue;
    }
    const auto fields = SplitFields(line);
    if (columns.empty())
    {
      for (auto f : fields)
      {
        columns.emplace_back(f);
      }
      continue;
    }
    if (fields.size() != columns.size())
    {
      Fail(ErrorKind::Io, "line " + std::to_string(lineno) + ": column count mismatch");
    }
    SweepRow row;
    for (std::size_t k = 0; k < fields.size(); ++k)
    {
      const std::string &c = columns[k];
      const std::string_view f = fields[k];
      if (c == "grid_value")
        row.grid_value = ParseNumber(f, lineno);
      else if (c == "grid_value2")
        row.grid_value2 = ParseNumber(f, lineno);
      else if (c == "p")
        row.p = static_cast<int>(ParseNumber(f, lineno));
      else if (c == "side")
      {
        if (f != "+" && f != "-")
          Fail(ErrorKind::Io, "line " + std::to_string(lineno) + ": side must be + or -");
        row.side = f == "-" ? Side::Minus : Side::Plus;
      }
      else if (c == "intensity")
        row.intensity = ParseNumber(f, lineno);
      else if (c == "oracle_intensity" && !f.empty())
        row.oracle_intensity = ParseNumber(f, lineno);
      else if (c == "rel_dev" && !f.empty())
        row.rel_dev = ParseNumber(f, lineno);
    }
    // Rows are written in index order, so first appearance gives the index.
    row.grid_index = index1.try_emplace(row.grid_value, static_cast<int>(index1.size())).first->second;
    if (row.grid_value2)
    {
      row.grid2_index =
          index2.try_emplace(*row.grid_value2, static_cast<int>(index2.size())).first->second;
    }
    rows.push_back(row);
  }
  if (!saw_version)
  {
    Fail(ErrorKind::Io, std::string("missing '# ") + kFormatVersion + "' header");
  }
  return rows;
}

std::string FormatJson(const SweepTable &table, const std::optional<std::string> &timestamp)
{
  json j;
  j["spec"] = SpecToJson(table.spec);
  json rows = json::array();
  for (const auto &row : table.rows)
  {
    json r;
    r["grid_value"] = row.grid_value;
    if (table.two_dimensional)
    {
      r["grid_value2"] = Optional(row.grid_value2);
    }
    r["p"] = row.p;
    r["side"] = SideLabel(row.side);
    r["intensity"] = row.intensity;
    if (table.dual)
    {
      r["oracle_intensity"] = Optional(row.oracle_intensity);
      r["rel_dev"] = Optional(row.rel_dev);
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);

  json meta;
  meta["version"] = kFormatVersion;
  meta["timestamp"] = timestamp ? json(*timestamp) : json(nullptr);
  meta["grid_units"] = "MHz (omega / 2pi)";
  meta["intensity_units"] = table.spec.normalize ? "|Omega_sc|^2 / Gamma1^2" : "|Omega_sc|^2 (rad/s)^2";
  if (!table.diagnostics.empty())
  {
    json diag = json::array();
    double worst_even = 0.0;
    for (const auto &d : table.diagnostics)
    {
      diag.push_back({{"grid_index", d.grid_index},
                      {"grid2_index", d.grid2_index},
                      {"even_to_odd_ratio", d.even_to_odd_ratio},
                      {"steps", d.steps},
                      {"windows", d.windows}});
      worst_even = std::max(worst_even, d.even_to_odd_ratio);
    }
    meta["oracle"] = std::move(diag);
    meta["max_even_to_odd_ratio"] = worst_even;
  }
  if (table.dual)
  {
    meta["max_rel_dev"] = MaxRelativeDeviation(table);
  }
  j["meta"] = std::move(meta);
  return j.dump(1) + "\n";
}

std::string FormatSvg(const SweepTable &table)
{
  return table.two_dimensional ? HeatMap(table) : LinePlot(table);
}

std::vector<std::filesystem::path> EmitOutputs(const SweepTable &table,
                                               const std::filesystem::path &base,
                                               const OutputFormats &formats,
                                               const std::optional<std::string> &timestamp)
{
  std::vector<std::filesystem::path> written;
  auto with_ext = [&](const char *ext) {
    std::filesystem::path p = base;
    p += ext;
    return p;
  };
  if (formats.csv)
  {
    written.push_back(with_ext(".csv"));
    WriteFile(written.back(), FormatCsv(table));
  }
  if (formats.json)
  {
    written.push_back(with_ext(".json"));
    WriteFile(written.back(), FormatJson(table, timestamp));
  }
  if (formats.svg)
  {
    written.push_back(with_ext(".svg"));
    WriteFile(written.back(), FormatSvg(table));
  }
  return written;
}

}  // namespace sbm
