#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cte {

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;  // row-major
};

/// Flat named-tensor container for externally supplied network weights.
using ParamBundle = std::map<std::string, Tensor>;

/// Little-endian container, layout documented in docs/formats.md:
/// magic "CTEPARM1", u32 entry count, then per entry u32 name length, name
/// bytes, u32 rank, u64 dims, f64 row-major data.
void write_param_bundle(std::ostream& out, const ParamBundle& bundle);
void write_param_bundle_file(const std::string& path, const ParamBundle& bundle);

ParamBundle read_param_bundle(std::istream& in);
ParamBundle read_param_bundle_file(const std::string& path);

Tensor tensor_from_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_tensor(const Tensor& t);
Tensor tensor_from_vector(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_tensor(const Tensor& t);

}  // namespace cte
