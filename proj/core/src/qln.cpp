#include "cte/qln.hpp"

#include <stdexcept>
#include <string>

#include "cte/random.hpp"

namespace cte {

QLNVariant qln_variant_from_tag(std::string_view tag) {
  if (tag == "S-") return QLNVariant::kSparsePrev;
  if (tag == "SE-") return QLNVariant::kSparsePrevEmbed;
  if (tag == "D-") return QLNVariant::kDensePrev;
  if (tag == "Mt") return QLNVariant::kDenseMt;
  if (tag == "DQ") return QLNVariant::kDenseDq;
  if (tag == "E") return QLNVariant::kDenseEmbed;
  throw std::invalid_argument("unknown QLN variant tag: " + std::string(tag));
}

std::string_view qln_variant_tag(QLNVariant variant) {
  switch (variant) {
    case QLNVariant::kSparsePrev: return "S-";
    case QLNVariant::kSparsePrevEmbed: return "SE-";
    case QLNVariant::kDensePrev: return "D-";
    case QLNVariant::kDenseMt: return "Mt";
    case QLNVariant::kDenseDq: return "DQ";
    case QLNVariant::kDenseEmbed: return "E";
  }
  throw std::invalid_argument("unknown QLN variant");
}

QLNParams make_identity_qln_params(int hidden_dim) {
  QLNParams p;
  p.dq_ffn = identity_ffn(hidden_dim);
  p.tq_ffn = identity_ffn(hidden_dim);
  p.tm_ffn = identity_ffn(hidden_dim);
  return p;
}

QLNParams make_seeded_qln_params(int hidden_dim, std::uint64_t seed) {
  Rng rng(seed);
  auto two_layer = [&] {
    FfnWeights w;
    w.push_back({rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3), rng.vector(hidden_dim, -0.1, 0.1)});
    w.push_back({rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3), rng.vector(hidden_dim, -0.1, 0.1)});
    return w;
  };
  QLNParams p;
  p.dq_ffn = two_layer();
  p.tq_ffn = two_layer();
  p.tm_ffn = two_layer();
  p.embed_seed = seed ^ 0x5eedu;
  return p;
}

namespace {

FeaturePyramid apply_ffn(const FeaturePyramid& pyramid, const FfnWeights& ffn) {
  FeaturePyramid out;
  out.hidden_dim = pyramid.hidden_dim;
  for (const DenseMap& level : pyramid.levels) {
    DenseMap m(level.height, level.width, level.channels);
    Eigen::VectorXd cell(level.channels);
    for (int i = 0; i < level.height; ++i) {
      for (int j = 0; j < level.width; ++j) {
        for (int c = 0; c < level.channels; ++c) cell[c] = level.at(i, j, c);
        const Eigen::VectorXd y = ffn_forward(cell, ffn);
        for (int c = 0; c < level.channels; ++c) m.at(i, j, c) = y[c];
      }
    }
    out.levels.push_back(std::move(m));
  }
  return out;
}

FeaturePyramid noise_pyramid(const FeaturePyramid& shape_like, std::uint64_t seed) {
  Rng rng(seed);
  FeaturePyramid out;
  out.hidden_dim = shape_like.hidden_dim;
  for (const DenseMap& level : shape_like.levels) {
    DenseMap m(level.height, level.width, level.channels);
    for (double& v : m.values) v = rng.normal();
    out.levels.push_back(std::move(m));
  }
  return out;
}

Eigen::MatrixXd apply_ffn_rows(const Eigen::MatrixXd& rows, const FfnWeights& ffn) {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = ffn_forward(Eigen::VectorXd(rows.row(r)), ffn);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd feature_sample_tracks(const FeaturePyramid& memory,
                                      const std::vector<Point>& positions_px,
                                      int input_width, int input_height) {
  if (memory.levels.empty()) throw std::invalid_argument("feature_sample_tracks: empty memory");
  if (input_width <= 0 || input_height <= 0) {
    throw std::invalid_argument("feature_sample_tracks: non-positive input size");
  }
  const int h = memory.hidden_dim;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(positions_px.size()), h);
  for (std::size_t n = 0; n < positions_px.size(); ++n) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(h);
    for (const DenseMap& level : memory.levels) {
      // pixel -> level-local coordinate, centers anchored at pixel multiples
      // of the level stride
      const Point pos{positions_px[n].x * level.width / input_width + 0.5,
                      positions_px[n].y * level.height / input_height + 0.5};
      const std::vector<double> sample = bilinear_sample(level, pos);
      for (int c = 0; c < h; ++c) acc[c] += sample[c];
    }
    out.row(n) = acc / static_cast<double>(memory.levels.size());
  }
  return out;
}

QueryBundle build_queries(const FeaturePyramid& m_t, const FeaturePyramid& m_prev,
                          const std::vector<Point>& prev_positions_px,
                          int input_width, int input_height,
                          QLNVariant variant, const QLNParams& params) {
  if (m_t.levels.size() != m_prev.levels.size() || m_t.hidden_dim != m_prev.hidden_dim) {
    throw std::invalid_argument("build_queries: memory geometry mismatch");
  }
  for (std::size_t l = 0; l < m_t.levels.size(); ++l) {
    if (m_t.levels[l].height != m_prev.levels[l].height ||
        m_t.levels[l].width != m_prev.levels[l].width) {
      throw std::invalid_argument("build_queries: memory geometry mismatch at level " + std::to_string(l));
    }
  }

  QueryBundle bundle;
  bundle.dm = m_t;
  bundle.dm_source = QuerySource::kMemoryT;

  if (variant == QLNVariant::kSparsePrevEmbed) {
    bundle.dq = noise_pyramid(m_t, params.embed_seed ^ 0xD0u);
    bundle.dq_source = QuerySource::kEmbeddings;
  } else {
    bundle.dq = apply_ffn(m_t, params.dq_ffn);
    bundle.dq_source = QuerySource::kMemoryT;
  }

  switch (variant) {
    case QLNVariant::kSparsePrev:
    case QLNVariant::kSparsePrevEmbed: {
      bundle.tq_is_sparse = true;
      const Eigen::MatrixXd sampled =
          feature_sample_tracks(m_prev, prev_positions_px, input_width, input_height);
      bundle.tq = apply_ffn_rows(sampled, params.tq_ffn);
      bundle.tq_source = QuerySource::kMemoryPrev;
      bundle.tm = apply_ffn(m_t, params.tm_ffn);
      bundle.tm_source = QuerySource::kMemoryT;
      break;
    }
    case QLNVariant::kDensePrev:
      bundle.tq_is_sparse = false;
      bundle.tq_dense = apply_ffn(m_prev, params.tq_ffn);
      bundle.tq_source = QuerySource::kMemoryPrev;
      bundle.tm = apply_ffn(m_t, params.tm_ffn);
      bundle.tm_source = QuerySource::kMemoryT;
      break;
    case QLNVariant::kDenseMt:
      bundle.tq_is_sparse = false;
      bundle.tq_dense = apply_ffn(m_t, params.tq_ffn);
      bundle.tq_source = QuerySource::kMemoryT;
      bundle.tm = apply_ffn(m_prev, params.tm_ffn);
      bundle.tm_source = QuerySource::kMemoryPrev;
      break;
    case QLNVariant::kDenseDq:
      bundle.tq_is_sparse = false;
      bundle.tq_dense = apply_ffn(bundle.dq, params.tq_ffn);
      bundle.tq_source = QuerySource::kDetectionQueries;
      bundle.tm = apply_ffn(m_prev, params.tm_ffn);
      bundle.tm_source = QuerySource::kMemoryPrev;
      break;
    case QLNVariant::kDenseEmbed:
      bundle.tq_is_sparse = false;
      bundle.tq_dense = noise_pyramid(m_t, params.embed_seed ^ 0xE0u);
      bundle.tq_source = QuerySource::kEmbeddings;
      bundle.tm = apply_ffn(m_prev, params.tm_ffn);
      bundle.tm_source = QuerySource::kMemoryPrev;
      break;
  }
  return bundle;
}

}  // namespace cte
