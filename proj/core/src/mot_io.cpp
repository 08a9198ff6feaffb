#include "cte/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cte {

namespace {

// shortest round-trip formatting for the geometry fields
std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("write_mot: formatting failed");
  return std::string(buf, ptr);
}

std::string format_conf(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

double parse_field(const std::string& field, std::string_view source, std::size_t line_no,
                   const char* what) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(std::string(source) + ":" + std::to_string(line_no) +
                             ": malformed numeric field '" + field + "' (" + what + ")");
  }
  return value;
}

}  // namespace

MotRecord MotRecord::from_box(int frame, long id, const Box& b, double conf) {
  MotRecord r;
  r.frame = frame;
  r.id = id;
  r.bb_left = b.left();
  r.bb_top = b.top();
  r.bb_width = b.w;
  r.bb_height = b.h;
  r.conf = conf;
  return r;
}

MotFile parse_mot_stream(std::istream& in, std::string_view source_name) {
  MotFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 7) {
      throw std::runtime_error(std::string(source_name) + ":" + std::to_string(line_no) +
                               ": expected at least 7 comma-separated fields, got " +
                               std::to_string(fields.size()));
    }

    MotRecord r;
    r.frame = static_cast<int>(parse_field(fields[0], source_name, line_no, "frame"));
    r.id = static_cast<long>(parse_field(fields[1], source_name, line_no, "id"));
    r.bb_left = parse_field(fields[2], source_name, line_no, "bb_left");
    r.bb_top = parse_field(fields[3], source_name, line_no, "bb_top");
    r.bb_width = parse_field(fields[4], source_name, line_no, "bb_width");
    r.bb_height = parse_field(fields[5], source_name, line_no, "bb_height");
    r.conf = parse_field(fields[6], source_name, line_no, "conf");
    if (fields.size() > 7) r.x = parse_field(fields[7], source_name, line_no, "x");
    if (fields.size() > 8) r.y = parse_field(fields[8], source_name, line_no, "y");
    if (fields.size() > 9) r.z = parse_field(fields[9], source_name, line_no, "z");

    if (r.frame < 1) {
      throw std::runtime_error(std::string(source_name) + ":" + std::to_string(line_no) +
                               ": frame index must be >= 1");
    }
    out[r.frame].push_back(r);
  }
  return out;
}

MotFile parse_mot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return parse_mot_stream(in, path);
}

void write_mot_stream(std::ostream& out, std::vector<MotRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const MotRecord& a, const MotRecord& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.id < b.id;
  });
  for (const MotRecord& r : records) {
    out << r.frame << ',' << r.id << ',' << format_double(r.bb_left) << ','
        << format_double(r.bb_top) << ',' << format_double(r.bb_width) << ','
        << format_double(r.bb_height) << ',' << format_conf(r.conf) << ','
        << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.z) << '\n';
  }
  if (!out) throw std::runtime_error("write_mot: stream failure");
}

void write_mot_file(const std::string& path, std::vector<MotRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_mot_stream(out, std::move(records));
}

std::vector<FrameAnnotations> annotations_from_mot(const MotFile& file) {
  std::vector<FrameAnnotations> out;
  for (const auto& [frame, records] : file) {
    FrameAnnotations f;
    f.frame = frame;
    for (const MotRecord& r : records) f.boxes.emplace_back(r.id, r.box());
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace cte
