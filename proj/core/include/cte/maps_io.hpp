#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cte/grid.hpp"

namespace cte {

/// One serialized frame: output maps plus an optional feature map (zero
/// channels when absent).
struct MapsFrame {
  int frame = 1;
  OutputMaps maps;
  DenseMap features;
};

/// Little-endian container, layout documented in docs/formats.md:
/// magic "CTEMAPS1", u32 frame count, u32 grid height, u32 grid width,
/// u32 feature channels, then per frame a u32 frame index followed by the
/// row-major doubles of C (1 plane), S (2), T (2) and features.
void write_maps_stream(std::ostream& out, const std::vector<MapsFrame>& frames);
void write_maps_file(const std::string& path, const std::vector<MapsFrame>& frames);

std::vector<MapsFrame> read_maps_stream(std::istream& in);
std::vector<MapsFrame> read_maps_file(const std::string& path);

}  // namespace cte
