#include "cte/params_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cte {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'E', 'P', 'A', 'R', 'M', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("param bundle: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("param bundle: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void write_param_bundle(std::ostream& out, const ParamBundle& bundle) {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(bundle.size()));
  for (const auto& [name, tensor] : bundle) {
    std::uint64_t expect = 1;
    for (std::uint64_t d : tensor.shape) expect *= d;
    if (expect != tensor.data.size()) {
      throw std::invalid_argument("param bundle: '" + name + "' shape/data size mismatch");
    }
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (std::uint64_t d : tensor.shape) put_u64(out, d);
    for (double v : tensor.data) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("param bundle: stream failure");
}

void write_param_bundle_file(const std::string& path, const ParamBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_param_bundle(out, bundle);
}

ParamBundle read_param_bundle(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("param bundle: bad magic");
  }
  const std::uint32_t count = get_u32(in);
  ParamBundle bundle;
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("param bundle: truncated name");
    Tensor t;
    const std::uint32_t rank = get_u32(in);
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(get_u64(in));
      total *= t.shape.back();
    }
    t.data.resize(total);
    for (double& v : t.data) v = get_f64(in);
    bundle.emplace(std::move(name), std::move(t));
  }
  return bundle;
}

ParamBundle read_param_bundle_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_param_bundle(in);
}

Tensor tensor_from_matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(m(i, j));
  return t;
}

Eigen::MatrixXd matrix_from_tensor(const Tensor& t) {
  if (t.shape.size() != 2) throw std::invalid_argument("matrix_from_tensor: rank != 2");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[idx++];
  return m;
}

Tensor tensor_from_vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

Eigen::VectorXd vector_from_tensor(const Tensor& t) {
  if (t.shape.size() != 1) throw std::invalid_argument("vector_from_tensor: rank != 1");
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

}  // namespace cte
