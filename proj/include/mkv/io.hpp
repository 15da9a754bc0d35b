#pragma once

#include <iosfwd>
#include <string>

#include "mkv/path_measure.hpp"

namespace mkv {

// Text layout:
//   # mkvlab-pathmeasure v1
//   d N M T
//   then N blocks of M+1 rows, each row the d values at one grid point.
// Numbers are printed with %.17g so reading back is exact.
void write_path_measure(std::ostream& os, const PathMeasure& mu);
PathMeasure read_path_measure(std::istream& is);

void save_path_measure(const std::string& file, const PathMeasure& mu);
PathMeasure load_path_measure(const std::string& file);

}  // namespace mkv
