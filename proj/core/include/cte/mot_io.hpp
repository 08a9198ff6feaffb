#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cte/box.hpp"
#include "cte/metrics.hpp"

namespace cte {

/// One MOTChallenge CSV record:
/// frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z
struct MotRecord {
  int frame = 1;
  long id = -1;  // -1 for plain detections
  double bb_left = 0.0;
  double bb_top = 0.0;
  double bb_width = 0.0;
  double bb_height = 0.0;
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;

  Box box() const { return Box::from_tlwh(bb_left, bb_top, bb_width, bb_height); }
  static MotRecord from_box(int frame, long id, const Box& b, double conf = 1.0);
};

using MotFile = std::map<int, std::vector<MotRecord>>;

/// Groups records by frame, preserving in-frame order. Malformed lines
/// raise with "<source>:<line>:" in the message.
MotFile parse_mot_stream(std::istream& in, std::string_view source_name = "<stream>");
MotFile parse_mot_file(const std::string& path);

/// One CSV line per record, sorted by frame then id; confidence printed
/// with 6 significant digits, box fields with shortest round-trip format.
void write_mot_stream(std::ostream& out, std::vector<MotRecord> records);
void write_mot_file(const std::string& path, std::vector<MotRecord> records);

std::vector<FrameAnnotations> annotations_from_mot(const MotFile& file);

}  // namespace cte
