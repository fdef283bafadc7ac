#pragma once

// Artifact formats.
//
// Series CSV
//   # format = vpsim-1
//   # config: <canonical config line>          (one comment line per line)
//   t,M0,M2,Mn,sup_E,pe,ke,R_max,rho_sup,escaped_frac,scatter_resid
//   rows, %.17g
//
// Snapshot (little-endian)
//   char[8] "VPSNAP\0\0", u32 version, u32 d, u64 N, f64 t, f64 alpha,
//   then f64 w[N], x[N*d], v[N*d]. The producing config travels in a
//   sibling <file>.json written by write_snapshot_file.
//
// Grid (little-endian)
//   char[8] "VPGRID\0\0", u32 version, u32 d, u32 cells, u32 components,
//   f64 lo[d], f64 width, f64 deposited, f64 escaped, then f64 values
//   (cell-major, first axis fastest, component fastest). A CSV index lists
//   name,file,d,cells,components,lo,width per exported grid.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "diagnostics.hpp"
#include "simulation.hpp"

namespace vlasov {

static_assert(std::endian::native == std::endian::little, "artifact writers assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

inline const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> cols{"t",  "M0",    "M2",      "Mn",           "sup_E",        "pe",
                                             "ke", "R_max", "rho_sup", "escaped_frac", "scatter_resid"};
  return cols;
}

inline std::vector<double> record_row(const DiagnosticsRecord& r) {
  return {r.t, r.m0, r.m2, r.mn, r.sup_e, r.pe, r.ke, r.r_max, r.rho_sup, r.escaped_frac, r.scatter_resid};
}

inline void write_comment_block(std::ostream& out, const std::string& config_text) {
  out << "# format = " << kFormatVersion << "\n";
  std::istringstream in(config_text);
  std::string line;
  while (std::getline(in, line)) out << "# config: " << line << "\n";
}

inline void write_series_csv(std::ostream& out, const std::vector<DiagnosticsRecord>& records,
                             const std::string& config_text) {
  write_comment_block(out, config_text);
  const auto& cols = series_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << "\n";
  for (const auto& r : records) {
    const auto row = record_row(r);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << detail::fmt_double(row[k]);
    out << "\n";
  }
}

/// Parsed CSV: named columns plus the file line of each row and the embedded
/// config text.
struct SeriesTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  std::vector<int> row_lines;
  std::string config_text;
  std::string format;

  std::size_t rows() const { return row_lines.size(); }

  const std::vector<double>& column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("series: no column '" + name + "'");
    return columns[static_cast<std::size_t>(it - header.begin())];
  }

  bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }
};

inline SeriesTable read_series_csv(std::istream& in) {
  SeriesTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# config: ", 0) == 0) t.config_text += line.substr(10) + "\n";
      else if (line.rfind("# format = ", 0) == 0) t.format = line.substr(11);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
    if (t.header.empty()) {
      t.header = cells;
      t.columns.assign(cells.size(), {});
      continue;
    }
    if (cells.size() != t.header.size())
      throw FormatError("series line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) {
      try {
        t.columns[k].push_back(detail::parse_double(cells[k]));
      } catch (const std::exception&) {
        throw FormatError("series line " + std::to_string(line_no) + ": bad number '" + cells[k] + "'");
      }
    }
    t.row_lines.push_back(line_no);
  }
  if (t.header.empty()) throw FormatError("series: missing header row");
  return t;
}

inline SeriesTable read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read '" + path + "'");
  return read_series_csv(in);
}

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("binary artifact truncated");
  return v;
}

inline void put_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> get_doubles(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("binary artifact truncated");
  return v;
}

inline constexpr char kSnapMagic[8] = {'V', 'P', 'S', 'N', 'A', 'P', 0, 0};
inline constexpr char kGridMagic[8] = {'V', 'P', 'G', 'R', 'I', 'D', 0, 0};
inline constexpr std::uint32_t kBinaryVersion = 1;

}  // namespace detail

inline void write_snapshot(std::ostream& out, const Ensemble& ens) {
  out.write(detail::kSnapMagic, 8);
  detail::put<std::uint32_t>(out, detail::kBinaryVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ens.dim()));
  detail::put<std::uint64_t>(out, ens.size());
  detail::put<double>(out, ens.time());
  detail::put<double>(out, ens.alpha());
  detail::put_doubles(out, ens.weights());
  detail::put_doubles(out, ens.positions());
  detail::put_doubles(out, ens.velocities());
}

/// The translated coordinates are rebuilt from x and v.
inline Ensemble read_snapshot(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kSnapMagic, 8) != 0) throw FormatError("snapshot: bad magic");
  if (detail::get<std::uint32_t>(in) != detail::kBinaryVersion) throw FormatError("snapshot: unsupported version");
  const auto d = detail::get<std::uint32_t>(in);
  const auto n = detail::get<std::uint64_t>(in);
  const double t = detail::get<double>(in);
  const double alpha = detail::get<double>(in);
  auto w = detail::get_doubles(in, n);
  auto x = detail::get_doubles(in, n * d);
  auto v = detail::get_doubles(in, n * d);
  return Ensemble(static_cast<int>(d), alpha, t, std::move(x), std::move(v), std::move(w));
}

inline void write_grid(std::ostream& out, const DepositGrid& g) {
  out.write(detail::kGridMagic, 8);
  detail::put<std::uint32_t>(out, detail::kBinaryVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dim));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.cells));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.components));
  detail::put_doubles(out, g.lo);
  detail::put<double>(out, g.width);
  detail::put<double>(out, g.deposited);
  detail::put<double>(out, g.escaped);
  detail::put_doubles(out, g.values);
}

inline DepositGrid read_grid(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kGridMagic, 8) != 0) throw FormatError("grid: bad magic");
  if (detail::get<std::uint32_t>(in) != detail::kBinaryVersion) throw FormatError("grid: unsupported version");
  DepositGrid g;
  g.dim = static_cast<int>(detail::get<std::uint32_t>(in));
  g.cells = static_cast<int>(detail::get<std::uint32_t>(in));
  g.components = static_cast<int>(detail::get<std::uint32_t>(in));
  g.lo = detail::get_doubles(in, g.dim);
  g.width = detail::get<double>(in);
  g.deposited = detail::get<double>(in);
  g.escaped = detail::get<double>(in);
  g.total = g.deposited + g.escaped;
  g.cell_volume = std::pow(g.width, g.dim);
  std::size_t cells = 1;
  for (int a = 0; a < g.dim; ++a) cells *= static_cast<std::size_t>(g.cells);
  g.values = detail::get_doubles(in, cells * static_cast<std::size_t>(g.components));
  return g;
}

/// Writes `<dir>/<name>.grid` for each grid and `<dir>/grids.csv`.
inline void export_grids(const std::filesystem::path& dir, const std::vector<std::pair<std::string, DepositGrid>>& grids,
                         const std::string& config_text) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "grids.csv");
  write_comment_block(index, config_text);
  index << "name,file,d,cells,components,lo,width\n";
  for (const auto& [name, g] : grids) {
    const std::string file = name + ".grid";
    std::ofstream out(dir / file, std::ios::binary);
    write_grid(out, g);
    index << name << "," << file << "," << g.dim << "," << g.cells << "," << g.components << ","
          << detail::fmt_double(g.lo.empty() ? 0.0 : g.lo[0]) << "," << detail::fmt_double(g.width) << "\n";
  }
}

// ---------------------------------------------------------------------------
// JSON

using Json = nlohmann::ordered_json;

inline Json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline Json json_array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

inline Json to_json(const RateFit& f) {
  return Json{{"exponent", json_number(f.exponent)}, {"log_intercept", json_number(f.log_intercept)},
              {"t_lo", json_number(f.t_lo)},         {"t_hi", json_number(f.t_hi)},
              {"r_squared", json_number(f.r_squared)}, {"samples", f.samples}};
}

inline Json to_json(const std::optional<RateFit>& f) { return f ? to_json(*f) : Json(nullptr); }

inline Json to_json(const InequalityReport& r) {
  return Json{{"id", r.id}, {"left", json_number(r.left)}, {"right", json_number(r.right)},
              {"ratio", json_number(r.ratio)}, {"pass", r.pass}};
}

inline Json to_json(const ExponentCheck& c) {
  return Json{{"id", c.id}, {"fit", to_json(c.fit)}, {"lo", json_number(c.lo)}, {"hi", json_number(c.hi)},
              {"note", c.note}, {"pass", c.pass}};
}

/// Wraps a report body with the format version and producing config.
inline Json envelope(const std::string& kind, Json body, const std::string& config_text) {
  Json j;
  j["format"] = kFormatVersion;
  j["kind"] = kind;
  j["config"] = config_text;
  j["report"] = std::move(body);
  return j;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

/// `path` plus `path`.json carrying the header fields and the config.
inline void write_snapshot_file(const std::filesystem::path& path, const Ensemble& ens, const std::string& config_text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    write_snapshot(out, ens);
  }
  Json body{{"file", path.filename().string()}, {"version", detail::kBinaryVersion}, {"d", ens.dim()},
            {"n", ens.size()}, {"t", json_number(ens.time())}, {"alpha", json_number(ens.alpha())}};
  write_json(std::filesystem::path(path.string() + ".json"), envelope("snapshot", body, config_text));
}

// ---------------------------------------------------------------------------
// SVG log-log plots

struct PlotSeries {
  std::string name;
  std::vector<double> x;  ///< t + alpha
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "t + alpha";
  std::vector<double> guide_slopes;
  int width = 640;
  int height = 440;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Log-log line plot. Points with x <= 0 or y <= 0 are masked and reported
/// in a warning line inside the image.
inline std::string render_loglog_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  if (series.empty()) throw DomainError("plot: empty selection");
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  std::size_t masked = 0;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!(s.x[k] > 0.0) || !(s.y[k] > 0.0) || !std::isfinite(s.y[k])) {
        ++masked;
        continue;
      }
      x0 = std::min(x0, std::log10(s.x[k]));
      x1 = std::max(x1, std::log10(s.x[k]));
      y0 = std::min(y0, std::log10(s.y[k]));
      y1 = std::max(y1, std::log10(s.y[k]));
    }
  const bool any = std::isfinite(x0);
  if (!any) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double ml = 70, mr = 130, mt = 40, mb = 50;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double lx) { return ml + (lx - x0) / (x1 - x0) * pw; };
  auto py = [&](double ly) { return mt + (y1 - ly) / (y1 - y0) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<defs><clipPath id=\"plot\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\""
      << ph << "\"/></clipPath></defs>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << ml << "\" y=\"24\" font-size=\"14\">" << detail::xml_escape(opt.title) << "</text>\n";
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(std::ceil(x0)); e <= static_cast<int>(std::floor(x1)); ++e)
    svg << "<line x1=\"" << detail::num(px(e)) << "\" y1=\"" << mt + ph << "\" x2=\"" << detail::num(px(e))
        << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/><text x=\"" << detail::num(px(e)) << "\" y=\""
        << mt + ph + 18 << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  for (int e = static_cast<int>(std::ceil(y0)); e <= static_cast<int>(std::floor(y1)); ++e)
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::num(py(e)) << "\" x2=\"" << ml << "\" y2=\""
        << detail::num(py(e)) << "\" stroke=\"black\"/><text x=\"" << ml - 8 << "\" y=\"" << detail::num(py(e) + 4)
        << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\">"
      << detail::xml_escape(opt.x_label) << "</text>\n";

  // Guides pass through the first valid point of the first series.
  double gx = x0, gy = y1;
  for (std::size_t k = 0; k < series[0].x.size(); ++k)
    if (series[0].x[k] > 0.0 && series[0].y[k] > 0.0 && std::isfinite(series[0].y[k])) {
      gx = std::log10(series[0].x[k]);
      gy = std::log10(series[0].y[k]);
      break;
    }
  int legend = 0;
  for (double slope : opt.guide_slopes) {
    const double ya = gy + slope * (x0 - gx), yb = gy + slope * (x1 - gx);
    svg << "<line class=\"guide\" clip-path=\"url(#plot)\" x1=\"" << detail::num(px(x0)) << "\" y1=\""
        << detail::num(py(ya)) << "\" x2=\"" << detail::num(px(x1)) << "\" y2=\"" << detail::num(py(yb))
        << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    svg << "<text x=\"" << ml + pw + 10 << "\" y=\"" << mt + 16 * (++legend) << "\" fill=\"gray\">slope "
        << detail::fmt_double(slope) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    svg << "<polyline class=\"data\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) {
      if (!(series[s].x[k] > 0.0) || !(series[s].y[k] > 0.0) || !std::isfinite(series[s].y[k])) continue;
      svg << detail::num(px(std::log10(series[s].x[k]))) << "," << detail::num(py(std::log10(series[s].y[k]))) << " ";
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << ml + pw + 10 << "\" y=\"" << mt + 16 * (++legend) << "\" fill=\"" << color << "\">"
        << detail::xml_escape(series[s].name) << "</text>\n";
  }
  if (masked > 0)
    svg << "<text class=\"warning\" x=\"" << ml + 6 << "\" y=\"" << mt + 16 << "\" fill=\"#b00000\">warning: "
        << masked << " nonpositive point(s) masked</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vlasov
