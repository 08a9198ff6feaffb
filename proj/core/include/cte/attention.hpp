#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cte/grid.hpp"

namespace cte {

struct AttentionInputs {
  Eigen::MatrixXd q;  // n_q x h
  Eigen::MatrixXd k;  // n_k x h
  Eigen::MatrixXd v;  // n_k x h
};

/// Softmax(Q K^T / sqrt(h)) V, row-wise softmax.
Eigen::MatrixXd scaled_dot_attention(const AttentionInputs& inp);

struct SRAConfig {
  int reduction = 1;
};

/// Spatial-reduction attention: K and V rows are group-averaged in blocks
/// of `reduction` consecutive rows (trailing partial block shrinks) before
/// the standard attention. reduction = 1 is the unreduced path.
Eigen::MatrixXd sra_attention(const AttentionInputs& inp, const SRAConfig& cfg);

struct DeformAttnParams {
  int num_heads = 8;
  int num_points = 4;
  FfnWeights offset_net;            // h -> heads*levels*points*2
  FfnWeights weight_net;            // h -> heads*levels*points
  Eigen::MatrixXd out_proj_weight;  // h x heads*h
  Eigen::VectorXd out_proj_bias;    // h
};

DeformAttnParams make_deform_attn_params(int hidden_dim, int num_levels, std::uint64_t seed,
                                         int num_heads = 8, int num_points = 4);
/// Zero offset/weight nets and, for a single head, identity projection.
DeformAttnParams make_degenerate_deform_attn_params(int hidden_dim, int num_levels,
                                                    int num_heads = 1, int num_points = 4);

struct DeformAttnResult {
  Eigen::MatrixXd pre_projection;  // n_q x heads*h, convex combinations of samples
  Eigen::MatrixXd output;          // n_q x h
};

/// Deformable cross-attention: each query emits per-head/level/point
/// sampling offsets (added to its reference point in normalized [0,1]
/// coordinates, then scaled to each level) and attention logits softmaxed
/// over levels x points per head. Samples are merged convexly, heads
/// concatenated, then projected.
DeformAttnResult deformable_cross_attention(const Eigen::MatrixXd& queries,
                                            const std::vector<Point>& reference_points,
                                            const FeaturePyramid& memory,
                                            const DeformAttnParams& params);

struct TqsaParams {
  int num_heads = 8;
  Eigen::MatrixXd wq;  // h x h
  Eigen::MatrixXd wk;
  Eigen::MatrixXd wv;
  Eigen::MatrixXd wo;
};

TqsaParams make_tqsa_params(int hidden_dim, std::uint64_t seed, int num_heads = 8);

/// Multi-head self-attention over the sparse track queries, residual-added.
Eigen::MatrixXd tqsa(const Eigen::MatrixXd& tracking_queries, const TqsaParams& params);

enum class DecoderMode { kSingle, kDual, kTqsaSingle, kTqsaDual };

struct DecoderConfig {
  int n_dec = 6;  // valid range [3, 6]
  DecoderMode mode = DecoderMode::kTqsaSingle;
};

struct DecoderParams {
  DeformAttnParams ddca;
  DeformAttnParams tdca;
  TqsaParams tqsa;
};

struct FlattenedPyramid {
  Eigen::MatrixXd features;             // N x h, level-major, cells row-major
  std::vector<Point> reference_points;  // normalized per-cell positions
};

FlattenedPyramid flatten_pyramid(const FeaturePyramid& pyramid);
FeaturePyramid unflatten_pyramid(const Eigen::MatrixXd& features, const FeaturePyramid& shape_like);

/// One detection cross-attention layer: every pyramid cell is a query with
/// its own normalized position as reference point; outputs replace the
/// queries.
FeaturePyramid ddca_layer(const FeaturePyramid& queries, const FeaturePyramid& memory,
                          const DeformAttnParams& params);

struct DecoderResult {
  FeaturePyramid detection_features;
  Eigen::MatrixXd tracking_features;
};

/// Single modes pass DQ through untouched; Dual modes stack n_dec DDCA
/// layers over (DQ, DM). The tracking side stacks n_dec layers of
/// (optional TQSA, then TDCA) over (TQ, TM).
DecoderResult decoder_forward(const FeaturePyramid& dq, const FeaturePyramid& dm,
                              const Eigen::MatrixXd& tq,
                              const std::vector<Point>& tq_reference_points,
                              const FeaturePyramid& tm, const DecoderConfig& cfg,
                              const DecoderParams& params);

struct DeformConvParams {
  int kernel = 3;
  std::vector<Eigen::MatrixXd> weights;  // per output channel: c_in x kernel^2
  Eigen::VectorXd bias;                  // c_out
  std::vector<Point> offsets;            // kernel^2 learned tap offsets, cell units
};

DeformConvParams make_deform_conv_params(int in_channels, int out_channels, std::uint64_t seed,
                                         int kernel = 3, double offset_scale = 0.5);

/// k x k taps sampled bilinearly at base position + learned offset, weighted
/// sum plus bias, rectified. Zero offsets reduce to an ordinary convolution
/// with clamped borders.
DenseMap deform_conv_forward(const DenseMap& input, const DeformConvParams& params);

/// Coarse-to-fine merge: deformable convolution on the running map, bilinear
/// x2 upscale, add the next finer level. Returns the finest-scale map.
DenseMap deform_conv_merge(const std::vector<DenseMap>& levels,
                           const std::vector<DeformConvParams>& stages);

}  // namespace cte

#include "cte/params_io.hpp"

namespace cte {

/// Loaders for externally supplied weights (see docs/formats.md for the
/// container layout and expected tensor names under the given prefix).
TqsaParams tqsa_params_from_bundle(const ParamBundle& bundle, const std::string& prefix,
                                   int num_heads);
DeformAttnParams deform_attn_params_from_bundle(const ParamBundle& bundle,
                                                const std::string& prefix, int num_heads,
                                                int num_points);
ParamBundle bundle_from_tqsa_params(const TqsaParams& params, const std::string& prefix);
ParamBundle bundle_from_deform_attn_params(const DeformAttnParams& params,
                                           const std::string& prefix);

}  // namespace cte
