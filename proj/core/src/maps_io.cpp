#include "cte/maps_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cte {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'E', 'M', 'A', 'P', 'S', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("maps container: truncated header field");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("maps container: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_plane(std::ostream& out, const DenseMap& m) {
  for (double v : m.values) put_f64(out, v);
}

DenseMap get_plane(std::istream& in, int h, int w, int channels) {
  DenseMap m(h, w, channels);
  for (double& v : m.values) v = get_f64(in);
  return m;
}

}  // namespace

void write_maps_stream(std::ostream& out, const std::vector<MapsFrame>& frames) {
  if (frames.empty()) throw std::invalid_argument("write_maps: no frames");
  const int gh = frames.front().maps.center.height;
  const int gw = frames.front().maps.center.width;
  const int fc = frames.front().features.empty() ? 0 : frames.front().features.channels;
  for (const MapsFrame& f : frames) {
    if (f.maps.center.height != gh || f.maps.center.width != gw ||
        f.maps.center.channels != 1 || f.maps.size.channels != 2 ||
        f.maps.displacement.channels != 2 || f.maps.size.height != gh ||
        f.maps.displacement.height != gh) {
      throw std::invalid_argument("write_maps: inconsistent frame geometry");
    }
    const int this_fc = f.features.empty() ? 0 : f.features.channels;
    if (this_fc != fc) throw std::invalid_argument("write_maps: inconsistent feature channels");
  }

  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  put_u32(out, static_cast<std::uint32_t>(gh));
  put_u32(out, static_cast<std::uint32_t>(gw));
  put_u32(out, static_cast<std::uint32_t>(fc));
  for (const MapsFrame& f : frames) {
    put_u32(out, static_cast<std::uint32_t>(f.frame));
    put_plane(out, f.maps.center);
    put_plane(out, f.maps.size);
    put_plane(out, f.maps.displacement);
    if (fc > 0) put_plane(out, f.features);
  }
  if (!out) throw std::runtime_error("write_maps: stream failure");
}

void write_maps_file(const std::string& path, const std::vector<MapsFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_maps_stream(out, frames);
}

std::vector<MapsFrame> read_maps_stream(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("maps container: bad magic");
  }
  const std::uint32_t count = get_u32(in);
  const int gh = static_cast<int>(get_u32(in));
  const int gw = static_cast<int>(get_u32(in));
  const int fc = static_cast<int>(get_u32(in));
  if (count == 0 || gh <= 0 || gw <= 0 || fc < 0) {
    throw std::runtime_error("maps container: invalid header");
  }

  std::vector<MapsFrame> frames;
  frames.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    MapsFrame f;
    f.frame = static_cast<int>(get_u32(in));
    f.maps.center = get_plane(in, gh, gw, 1);
    f.maps.size = get_plane(in, gh, gw, 2);
    f.maps.displacement = get_plane(in, gh, gw, 2);
    if (fc > 0) f.features = get_plane(in, gh, gw, fc);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<MapsFrame> read_maps_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_maps_stream(in);
}

}  // namespace cte
