#include "cte/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cte {

GridGeometry::GridGeometry(int height, int width)
    : input_height(height), input_width(width), down_ratio(4) {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0) {
    throw std::invalid_argument("GridGeometry: input size must be positive and divisible by 32, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

DenseMap::DenseMap(int height_, int width_, int channels_, double fill)
    : height(height_), width(width_), channels(channels_) {
  if (height_ <= 0 || width_ <= 0 || channels_ <= 0) {
    throw std::invalid_argument("DenseMap: non-positive shape");
  }
  values.assign(static_cast<std::size_t>(height_) * width_ * channels_, fill);
}

FeaturePyramid make_pyramid(const GridGeometry& geom, int hidden_dim, double fill) {
  if (hidden_dim <= 0) throw std::invalid_argument("make_pyramid: hidden_dim must be positive");
  FeaturePyramid p;
  p.hidden_dim = hidden_dim;
  for (int level = 0; level < 4; ++level) {
    const int stride = 32 >> level;  // 32, 16, 8, 4
    p.levels.emplace_back(geom.input_height / stride, geom.input_width / stride, hidden_dim, fill);
  }
  return p;
}

void validate_pyramid(const FeaturePyramid& pyramid, const GridGeometry& geom) {
  if (pyramid.levels.size() != 4) {
    throw std::invalid_argument("FeaturePyramid: expected 4 levels, got " +
                                std::to_string(pyramid.levels.size()));
  }
  for (int level = 0; level < 4; ++level) {
    const int stride = 32 >> level;
    const DenseMap& m = pyramid.levels[level];
    if (m.height != geom.input_height / stride || m.width != geom.input_width / stride) {
      throw std::invalid_argument("FeaturePyramid: level " + std::to_string(level) + " shape mismatch");
    }
    if (m.channels != pyramid.hidden_dim) {
      throw std::invalid_argument("FeaturePyramid: level channel count != hidden_dim");
    }
  }
}

Point grid_from_pixel(const Point& pixel, int down_ratio) {
  return Point{pixel.x / down_ratio + 0.5, pixel.y / down_ratio + 0.5};
}

std::vector<double> bilinear_sample(const DenseMap& map, const Point& p) {
  if (map.empty()) throw std::invalid_argument("bilinear_sample: empty map");
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw std::invalid_argument("bilinear_sample: non-finite coordinates");
  }

  // Shift to cell-index space (cell centers at integers), clamp to border.
  const double gx = std::clamp(p.x - 0.5, 0.0, static_cast<double>(map.width - 1));
  const double gy = std::clamp(p.y - 0.5, 0.0, static_cast<double>(map.height - 1));

  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const int x1 = std::min(x0 + 1, map.width - 1);
  const int y1 = std::min(y0 + 1, map.height - 1);
  const double fx = gx - x0;
  const double fy = gy - y0;

  std::vector<double> out(map.channels);
  for (int c = 0; c < map.channels; ++c) {
    const double top = (1.0 - fx) * map.at(y0, x0, c) + fx * map.at(y0, x1, c);
    const double bottom = (1.0 - fx) * map.at(y1, x0, c) + fx * map.at(y1, x1, c);
    out[c] = (1.0 - fy) * top + fy * bottom;
  }
  return out;
}

DenseMap max_pool_3x3(const DenseMap& map) {
  if (map.empty()) throw std::invalid_argument("max_pool_3x3: empty map");
  if (map.channels != 1) {
    throw std::invalid_argument("max_pool_3x3: expected single channel, got " +
                                std::to_string(map.channels));
  }
  DenseMap out(map.height, map.width, 1);
  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      double m = map.at(i, j);
      for (int di = std::max(0, i - 1); di <= std::min(map.height - 1, i + 1); ++di) {
        for (int dj = std::max(0, j - 1); dj <= std::min(map.width - 1, j + 1); ++dj) {
          m = std::max(m, map.at(di, dj));
        }
      }
      out.at(i, j) = m;
    }
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("softmax: empty input");
  if (!v.allFinite()) throw std::invalid_argument("softmax: non-finite input");
  const double m = v.maxCoeff();
  Eigen::VectorXd e = (v.array() - m).exp();
  return e / e.sum();
}

std::vector<double> softmax(const std::vector<double>& v) {
  Eigen::VectorXd mapped = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::VectorXd s = softmax(mapped);
  return std::vector<double>(s.data(), s.data() + s.size());
}

DenseMap upscale_bilinear(const DenseMap& map, int factor) {
  if (map.empty()) throw std::invalid_argument("upscale_bilinear: empty map");
  if (factor != 2 && factor != 4 && factor != 8) {
    throw std::invalid_argument("upscale_bilinear: factor must be 2, 4 or 8, got " +
                                std::to_string(factor));
  }
  DenseMap out(map.height * factor, map.width * factor, map.channels);
  for (int i = 0; i < out.height; ++i) {
    for (int j = 0; j < out.width; ++j) {
      const Point src{static_cast<double>(j) / factor + 0.5, static_cast<double>(i) / factor + 0.5};
      const std::vector<double> v = bilinear_sample(map, src);
      for (int c = 0; c < map.channels; ++c) out.at(i, j, c) = v[c];
    }
  }
  return out;
}

Eigen::VectorXd ffn_forward(const Eigen::VectorXd& x, const FfnWeights& layers) {
  if (layers.empty()) throw std::invalid_argument("ffn_forward: no layers");
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const AffineLayer& layer = layers[l];
    if (layer.weight.cols() != h.size() || layer.weight.rows() != layer.bias.size()) {
      throw std::invalid_argument("ffn_forward: dimension mismatch at layer " + std::to_string(l));
    }
    h = layer.weight * h + layer.bias;
    if (l + 1 < layers.size()) h = h.cwiseMax(0.0);  // rectifier between layers only
  }
  return h;
}

FfnWeights identity_ffn(int dim) {
  FfnWeights w;
  w.push_back({Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)});
  return w;
}

}  // namespace cte
