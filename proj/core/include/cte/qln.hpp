#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cte/grid.hpp"

namespace cte {

/// The six query learning network wirings: S- (sparse TQ sampled from the
/// previous memory), SE- (S- with noise-initialized detection queries),
/// D- (dense TQ from the previous memory), Mt (dense TQ from the current
/// memory), DQ (dense TQ from the detection queries), E (dense TQ from
/// noise-initialized embeddings).
enum class QLNVariant { kSparsePrev, kSparsePrevEmbed, kDensePrev, kDenseMt, kDenseDq, kDenseEmbed };

QLNVariant qln_variant_from_tag(std::string_view tag);
std::string_view qln_variant_tag(QLNVariant variant);
inline constexpr std::array<QLNVariant, 6> kAllQlnVariants = {
    QLNVariant::kSparsePrev, QLNVariant::kSparsePrevEmbed, QLNVariant::kDensePrev,
    QLNVariant::kDenseMt,    QLNVariant::kDenseDq,         QLNVariant::kDenseEmbed};

enum class QuerySource { kMemoryT, kMemoryPrev, kDetectionQueries, kEmbeddings };

struct QueryBundle {
  FeaturePyramid dq;
  FeaturePyramid dm;
  bool tq_is_sparse = true;
  Eigen::MatrixXd tq;        // n_tracks x h when sparse
  FeaturePyramid tq_dense;   // populated for dense variants
  FeaturePyramid tm;

  QuerySource dq_source = QuerySource::kMemoryT;
  QuerySource dm_source = QuerySource::kMemoryT;
  QuerySource tq_source = QuerySource::kMemoryPrev;
  QuerySource tm_source = QuerySource::kMemoryT;
};

struct QLNParams {
  FfnWeights dq_ffn;
  FfnWeights tq_ffn;
  FfnWeights tm_ffn;
  std::uint64_t embed_seed = 0;
};

QLNParams make_identity_qln_params(int hidden_dim);
QLNParams make_seeded_qln_params(int hidden_dim, std::uint64_t seed);

/// One row per position: bilinear samples of every pyramid level at the
/// (input-pixel) position, averaged across levels.
Eigen::MatrixXd feature_sample_tracks(const FeaturePyramid& memory,
                                      const std::vector<Point>& positions_px,
                                      int input_width, int input_height);

QueryBundle build_queries(const FeaturePyramid& m_t, const FeaturePyramid& m_prev,
                          const std::vector<Point>& prev_positions_px,
                          int input_width, int input_height,
                          QLNVariant variant, const QLNParams& params);

}  // namespace cte
