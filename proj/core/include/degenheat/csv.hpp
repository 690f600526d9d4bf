#pragma once

#include <iosfwd>
#include <string>

#include "degenheat/numerics.hpp"
#include "degenheat/oracles.hpp"
#include "degenheat/wf_solver.hpp"

namespace degenheat::csv {

/// Shortest text that round-trips: 17 significant digits.
std::string format(double v);

/// Header `x,value`, one row per node.
void write_field(std::ostream& os, const numerics::SampledField& f);
/// Density rows followed by `atom0,<w>` and `atom1,<w>`.
void write_measure(std::ostream& os, const wf::SolutionMeasure& m);
/// Header `bin_left,bin_right,mass` followed by atom footers.
void write_histogram(std::ostream& os, const oracles::Histogram& h);

/// Reads an `x,value` file. Blank lines and lines starting with '#' are skipped; the header is
/// optional. Errors carry the line number and ErrorKind::input.
numerics::SampledField read_field(std::istream& is, const std::string& source = "<input>");
numerics::SampledField read_field_file(const std::string& path);

}  // namespace degenheat::csv
