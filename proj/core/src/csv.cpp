#include "degenheat/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "degenheat/error.hpp"

namespace degenheat::csv {

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field(std::ostream& os, const numerics::SampledField& f) {
  os << "x,value\n";
  for (std::size_t i = 0; i < f.grid.size(); ++i) os << format(f.grid[i]) << ',' << format(f.values[i]) << '\n';
}

void write_measure(std::ostream& os, const wf::SolutionMeasure& m) {
  write_field(os, m.density);
  os << "atom0," << format(m.atom0) << '\n';
  os << "atom1," << format(m.atom1) << '\n';
}

void write_histogram(std::ostream& os, const oracles::Histogram& h) {
  os << "bin_left,bin_right,mass\n";
  for (std::size_t i = 0; i < h.mass.size(); ++i)
    os << format(h.edges[i]) << ',' << format(h.edges[i + 1]) << ',' << format(h.mass[i]) << '\n';
  os << "atom0," << format(h.atom0) << '\n';
  os << "atom1," << format(h.atom1) << '\n';
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

}  // namespace

numerics::SampledField read_field(std::istream& is, const std::string& source) {
  std::vector<double> xs, vs;
  std::string line;
  int lineno = 0;
  bool header_allowed = true;
  auto error = [&](const std::string& what) {
    fail(ErrorKind::input, source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      error("expected two comma-separated columns");
    double x, v;
    const bool ok = parse_double(t.substr(0, comma), x) && parse_double(t.substr(comma + 1), v);
    if (!ok) {
      if (header_allowed && trim(t.substr(0, comma)) == "x") {
        header_allowed = false;
        continue;
      }
      error("cannot parse a number in '" + t + "'");
    }
    header_allowed = false;
    if (!std::isfinite(x) || !std::isfinite(v)) error("value is not finite");
    if (!xs.empty() && !(x > xs.back())) error("x values must increase strictly");
    xs.push_back(x);
    vs.push_back(v);
  }
  if (xs.size() < 8) {
    lineno = std::max(lineno, 1);
    error("need at least eight data rows");
  }
  return numerics::SampledField(numerics::Grid(xs, numerics::Domain::unit()), vs);
}

numerics::SampledField read_field_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, path + ": cannot open file");
  return read_field(in, path);
}

}  // namespace degenheat::csv
