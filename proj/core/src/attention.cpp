#include "cte/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cte/random.hpp"

namespace cte {

namespace {

void check_attention_dims(const AttentionInputs& inp) {
  if (inp.q.rows() == 0 || inp.k.rows() == 0 || inp.q.cols() == 0) {
    throw std::invalid_argument("attention: empty inputs");
  }
  if (inp.q.cols() != inp.k.cols() || inp.k.rows() != inp.v.rows() || inp.k.cols() != inp.v.cols()) {
    throw std::invalid_argument("attention: dimension mismatch");
  }
}

FfnWeights seeded_two_layer(int in_dim, int out_dim, Rng& rng, double scale) {
  FfnWeights w;
  const int hidden = in_dim;
  w.push_back({rng.matrix(hidden, in_dim, -scale, scale), rng.vector(hidden, -scale, scale)});
  w.push_back({rng.matrix(out_dim, hidden, -scale, scale), rng.vector(out_dim, -scale, scale)});
  return w;
}

FfnWeights zero_single_layer(int in_dim, int out_dim) {
  FfnWeights w;
  w.push_back({Eigen::MatrixXd::Zero(out_dim, in_dim), Eigen::VectorXd::Zero(out_dim)});
  return w;
}

}  // namespace

Eigen::MatrixXd scaled_dot_attention(const AttentionInputs& inp) {
  check_attention_dims(inp);
  const double scale = 1.0 / std::sqrt(static_cast<double>(inp.q.cols()));
  Eigen::MatrixXd logits = inp.q * inp.k.transpose() * scale;  // n_q x n_k
  Eigen::MatrixXd out(inp.q.rows(), inp.v.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::VectorXd w = softmax(Eigen::VectorXd(logits.row(r)));
    out.row(r) = w.transpose() * inp.v;
  }
  return out;
}

Eigen::MatrixXd sra_attention(const AttentionInputs& inp, const SRAConfig& cfg) {
  if (cfg.reduction <= 0) throw std::invalid_argument("sra_attention: reduction must be positive");
  check_attention_dims(inp);

  const Eigen::Index n_k = inp.k.rows();
  const Eigen::Index reduced = (n_k + cfg.reduction - 1) / cfg.reduction;
  Eigen::MatrixXd rk(reduced, inp.k.cols());
  Eigen::MatrixXd rv(reduced, inp.v.cols());
  for (Eigen::Index g = 0; g < reduced; ++g) {
    const Eigen::Index begin = g * cfg.reduction;
    const Eigen::Index len = std::min<Eigen::Index>(cfg.reduction, n_k - begin);
    rk.row(g) = inp.k.middleRows(begin, len).colwise().sum() / static_cast<double>(len);
    rv.row(g) = inp.v.middleRows(begin, len).colwise().sum() / static_cast<double>(len);
  }
  return scaled_dot_attention({inp.q, rk, rv});
}

DeformAttnParams make_deform_attn_params(int hidden_dim, int num_levels, std::uint64_t seed,
                                         int num_heads, int num_points) {
  Rng rng(seed);
  DeformAttnParams p;
  p.num_heads = num_heads;
  p.num_points = num_points;
  const int n_samples = num_heads * num_levels * num_points;
  p.offset_net = seeded_two_layer(hidden_dim, n_samples * 2, rng, 0.1);
  p.weight_net = seeded_two_layer(hidden_dim, n_samples, rng, 0.5);
  p.out_proj_weight = rng.matrix(hidden_dim, num_heads * hidden_dim, -0.3, 0.3);
  p.out_proj_bias = rng.vector(hidden_dim, -0.1, 0.1);
  return p;
}

DeformAttnParams make_degenerate_deform_attn_params(int hidden_dim, int num_levels,
                                                    int num_heads, int num_points) {
  DeformAttnParams p;
  p.num_heads = num_heads;
  p.num_points = num_points;
  const int n_samples = num_heads * num_levels * num_points;
  p.offset_net = zero_single_layer(hidden_dim, n_samples * 2);
  p.weight_net = zero_single_layer(hidden_dim, n_samples);
  p.out_proj_weight = Eigen::MatrixXd::Zero(hidden_dim, num_heads * hidden_dim);
  for (int m = 0; m < num_heads; ++m) {
    p.out_proj_weight.block(0, m * hidden_dim, hidden_dim, hidden_dim) =
        Eigen::MatrixXd::Identity(hidden_dim, hidden_dim) / num_heads;
  }
  p.out_proj_bias = Eigen::VectorXd::Zero(hidden_dim);
  return p;
}

DeformAttnResult deformable_cross_attention(const Eigen::MatrixXd& queries,
                                            const std::vector<Point>& reference_points,
                                            const FeaturePyramid& memory,
                                            const DeformAttnParams& params) {
  if (static_cast<std::size_t>(queries.rows()) != reference_points.size()) {
    throw std::invalid_argument("deformable_cross_attention: one reference point per query required");
  }
  if (memory.levels.empty()) throw std::invalid_argument("deformable_cross_attention: empty memory");
  const int h = static_cast<int>(queries.cols());
  const int heads = params.num_heads;
  const int levels = static_cast<int>(memory.levels.size());
  const int points = params.num_points;
  const int per_head = levels * points;

  DeformAttnResult result;
  result.pre_projection = Eigen::MatrixXd::Zero(queries.rows(), heads * h);
  result.output = Eigen::MatrixXd::Zero(queries.rows(), h);

  for (Eigen::Index qi = 0; qi < queries.rows(); ++qi) {
    const Eigen::VectorXd query = queries.row(qi);
    const Eigen::VectorXd offsets = ffn_forward(query, params.offset_net);
    const Eigen::VectorXd logits = ffn_forward(query, params.weight_net);
    if (offsets.size() != heads * per_head * 2 || logits.size() != heads * per_head) {
      throw std::invalid_argument("deformable_cross_attention: net output size mismatch");
    }
    const Point ref = reference_points[qi];

    for (int m = 0; m < heads; ++m) {
      const Eigen::VectorXd w = softmax(Eigen::VectorXd(logits.segment(m * per_head, per_head)));
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(h);
      for (int l = 0; l < levels; ++l) {
        const DenseMap& level = memory.levels[l];
        for (int p = 0; p < points; ++p) {
          const int s = (m * levels + l) * points + p;
          const double ox = offsets[2 * s];
          const double oy = offsets[2 * s + 1];
          // normalized position scaled to level-local cell coordinates
          const Point pos{(ref.x + ox) * level.width, (ref.y + oy) * level.height};
          const std::vector<double> sample = bilinear_sample(level, pos);
          const double weight = w[l * points + p];
          for (int c = 0; c < h; ++c) acc[c] += weight * sample[c];
        }
      }
      result.pre_projection.row(qi).segment(m * h, h) = acc;
    }
    result.output.row(qi) =
        params.out_proj_weight * Eigen::VectorXd(result.pre_projection.row(qi)) + params.out_proj_bias;
  }
  return result;
}

TqsaParams make_tqsa_params(int hidden_dim, std::uint64_t seed, int num_heads) {
  Rng rng(seed);
  TqsaParams p;
  p.num_heads = num_heads;
  p.wq = rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3);
  p.wk = rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3);
  p.wv = rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3);
  p.wo = rng.matrix(hidden_dim, hidden_dim, -0.3, 0.3);
  return p;
}

Eigen::MatrixXd tqsa(const Eigen::MatrixXd& tracking_queries, const TqsaParams& params) {
  if (tracking_queries.rows() == 0) throw std::invalid_argument("tqsa: at least one query required");
  const int h = static_cast<int>(tracking_queries.cols());
  if (params.num_heads <= 0 || h % params.num_heads != 0) {
    throw std::invalid_argument("tqsa: hidden dim must divide evenly across heads");
  }
  if (params.wq.rows() != h || params.wk.rows() != h || params.wv.rows() != h || params.wo.rows() != h) {
    throw std::invalid_argument("tqsa: projection dimension mismatch");
  }
  const int dh = h / params.num_heads;

  const Eigen::MatrixXd q = tracking_queries * params.wq.transpose();
  const Eigen::MatrixXd k = tracking_queries * params.wk.transpose();
  const Eigen::MatrixXd v = tracking_queries * params.wv.transpose();

  Eigen::MatrixXd concat(tracking_queries.rows(), h);
  for (int m = 0; m < params.num_heads; ++m) {
    AttentionInputs head{q.middleCols(m * dh, dh), k.middleCols(m * dh, dh), v.middleCols(m * dh, dh)};
    concat.middleCols(m * dh, dh) = scaled_dot_attention(head);
  }
  return tracking_queries + concat * params.wo.transpose();
}

FlattenedPyramid flatten_pyramid(const FeaturePyramid& pyramid) {
  Eigen::Index total = 0;
  for (const DenseMap& level : pyramid.levels) total += static_cast<Eigen::Index>(level.height) * level.width;

  FlattenedPyramid flat;
  flat.features.resize(total, pyramid.hidden_dim);
  flat.reference_points.reserve(total);
  Eigen::Index row = 0;
  for (const DenseMap& level : pyramid.levels) {
    for (int i = 0; i < level.height; ++i) {
      for (int j = 0; j < level.width; ++j) {
        for (int c = 0; c < level.channels; ++c) flat.features(row, c) = level.at(i, j, c);
        flat.reference_points.push_back(Point{(j + 0.5) / level.width, (i + 0.5) / level.height});
        ++row;
      }
    }
  }
  return flat;
}

FeaturePyramid unflatten_pyramid(const Eigen::MatrixXd& features, const FeaturePyramid& shape_like) {
  FeaturePyramid out;
  out.hidden_dim = static_cast<int>(features.cols());
  Eigen::Index row = 0;
  for (const DenseMap& level : shape_like.levels) {
    DenseMap m(level.height, level.width, out.hidden_dim);
    for (int i = 0; i < level.height; ++i) {
      for (int j = 0; j < level.width; ++j) {
        for (int c = 0; c < out.hidden_dim; ++c) m.at(i, j, c) = features(row, c);
        ++row;
      }
    }
    out.levels.push_back(std::move(m));
  }
  if (row != features.rows()) {
    throw std::invalid_argument("unflatten_pyramid: cell count mismatch");
  }
  return out;
}

FeaturePyramid ddca_layer(const FeaturePyramid& queries, const FeaturePyramid& memory,
                          const DeformAttnParams& params) {
  const FlattenedPyramid flat = flatten_pyramid(queries);
  const DeformAttnResult r = deformable_cross_attention(flat.features, flat.reference_points, memory, params);
  return unflatten_pyramid(r.output, queries);
}

DecoderResult decoder_forward(const FeaturePyramid& dq, const FeaturePyramid& dm,
                              const Eigen::MatrixXd& tq,
                              const std::vector<Point>& tq_reference_points,
                              const FeaturePyramid& tm, const DecoderConfig& cfg,
                              const DecoderParams& params) {
  if (cfg.n_dec < 3 || cfg.n_dec > 6) {
    throw std::invalid_argument("decoder_forward: n_dec must be in [3, 6], got " +
                                std::to_string(cfg.n_dec));
  }
  const bool dual = cfg.mode == DecoderMode::kDual || cfg.mode == DecoderMode::kTqsaDual;
  const bool with_tqsa = cfg.mode == DecoderMode::kTqsaSingle || cfg.mode == DecoderMode::kTqsaDual;

  DecoderResult result;
  if (dual) {
    FeaturePyramid df = dq;
    for (int layer = 0; layer < cfg.n_dec; ++layer) df = ddca_layer(df, dm, params.ddca);
    result.detection_features = std::move(df);
  } else {
    result.detection_features = dq;  // Single: DQ passes straight to the branches
  }

  Eigen::MatrixXd tf = tq;
  if (tf.rows() > 0) {
    for (int layer = 0; layer < cfg.n_dec; ++layer) {
      if (with_tqsa) tf = tqsa(tf, params.tqsa);
      tf = deformable_cross_attention(tf, tq_reference_points, tm, params.tdca).output;
    }
  }
  result.tracking_features = std::move(tf);
  return result;
}

DeformConvParams make_deform_conv_params(int in_channels, int out_channels, std::uint64_t seed,
                                         int kernel, double offset_scale) {
  Rng rng(seed);
  DeformConvParams p;
  p.kernel = kernel;
  for (int co = 0; co < out_channels; ++co) {
    p.weights.push_back(rng.matrix(in_channels, kernel * kernel, -0.5, 0.5));
  }
  p.bias = rng.vector(out_channels, -0.1, 0.1);
  for (int t = 0; t < kernel * kernel; ++t) {
    p.offsets.push_back(Point{rng.uniform(-offset_scale, offset_scale),
                              rng.uniform(-offset_scale, offset_scale)});
  }
  return p;
}

DenseMap deform_conv_forward(const DenseMap& input, const DeformConvParams& params) {
  if (input.empty()) throw std::invalid_argument("deform_conv_forward: empty input");
  const int k = params.kernel;
  if (k <= 0 || k % 2 == 0) throw std::invalid_argument("deform_conv_forward: kernel must be odd");
  if (params.offsets.size() != static_cast<std::size_t>(k * k)) {
    throw std::invalid_argument("deform_conv_forward: offset count mismatch");
  }
  const int c_out = static_cast<int>(params.weights.size());
  if (c_out == 0 || params.bias.size() != c_out) {
    throw std::invalid_argument("deform_conv_forward: weight/bias mismatch");
  }
  for (const Eigen::MatrixXd& w : params.weights) {
    if (w.rows() != input.channels || w.cols() != k * k) {
      throw std::invalid_argument("deform_conv_forward: weight shape mismatch");
    }
  }

  const int half = k / 2;
  DenseMap out(input.height, input.width, c_out);
  for (int i = 0; i < input.height; ++i) {
    for (int j = 0; j < input.width; ++j) {
      std::vector<std::vector<double>> taps(static_cast<std::size_t>(k) * k);
      for (int du = -half; du <= half; ++du) {
        for (int dv = -half; dv <= half; ++dv) {
          const int t = (du + half) * k + (dv + half);
          const Point pos{j + 0.5 + dv + params.offsets[t].x, i + 0.5 + du + params.offsets[t].y};
          taps[t] = bilinear_sample(input, pos);
        }
      }
      for (int co = 0; co < c_out; ++co) {
        double acc = params.bias[co];
        for (int ci = 0; ci < input.channels; ++ci) {
          for (int t = 0; t < k * k; ++t) acc += params.weights[co](ci, t) * taps[t][ci];
        }
        out.at(i, j, co) = std::max(acc, 0.0);
      }
    }
  }
  return out;
}

namespace {

const Tensor& require_tensor(const ParamBundle& bundle, const std::string& name) {
  const auto it = bundle.find(name);
  if (it == bundle.end()) {
    throw std::invalid_argument("param bundle: missing tensor '" + name + "'");
  }
  return it->second;
}

FfnWeights ffn_from_bundle(const ParamBundle& bundle, const std::string& prefix) {
  FfnWeights out;
  for (int layer = 0;; ++layer) {
    const std::string w_name = prefix + "." + std::to_string(layer) + ".weight";
    if (bundle.find(w_name) == bundle.end()) break;
    out.push_back({matrix_from_tensor(require_tensor(bundle, w_name)),
                   vector_from_tensor(
                       require_tensor(bundle, prefix + "." + std::to_string(layer) + ".bias"))});
  }
  if (out.empty()) throw std::invalid_argument("param bundle: no layers under '" + prefix + "'");
  return out;
}

void ffn_to_bundle(ParamBundle& bundle, const std::string& prefix, const FfnWeights& ffn) {
  for (std::size_t layer = 0; layer < ffn.size(); ++layer) {
    bundle[prefix + "." + std::to_string(layer) + ".weight"] = tensor_from_matrix(ffn[layer].weight);
    bundle[prefix + "." + std::to_string(layer) + ".bias"] = tensor_from_vector(ffn[layer].bias);
  }
}

}  // namespace

TqsaParams tqsa_params_from_bundle(const ParamBundle& bundle, const std::string& prefix,
                                   int num_heads) {
  TqsaParams p;
  p.num_heads = num_heads;
  p.wq = matrix_from_tensor(require_tensor(bundle, prefix + ".wq"));
  p.wk = matrix_from_tensor(require_tensor(bundle, prefix + ".wk"));
  p.wv = matrix_from_tensor(require_tensor(bundle, prefix + ".wv"));
  p.wo = matrix_from_tensor(require_tensor(bundle, prefix + ".wo"));
  return p;
}

DeformAttnParams deform_attn_params_from_bundle(const ParamBundle& bundle,
                                                const std::string& prefix, int num_heads,
                                                int num_points) {
  DeformAttnParams p;
  p.num_heads = num_heads;
  p.num_points = num_points;
  p.offset_net = ffn_from_bundle(bundle, prefix + ".offset_net");
  p.weight_net = ffn_from_bundle(bundle, prefix + ".weight_net");
  p.out_proj_weight = matrix_from_tensor(require_tensor(bundle, prefix + ".out_proj.weight"));
  p.out_proj_bias = vector_from_tensor(require_tensor(bundle, prefix + ".out_proj.bias"));
  return p;
}

ParamBundle bundle_from_tqsa_params(const TqsaParams& params, const std::string& prefix) {
  ParamBundle bundle;
  bundle[prefix + ".wq"] = tensor_from_matrix(params.wq);
  bundle[prefix + ".wk"] = tensor_from_matrix(params.wk);
  bundle[prefix + ".wv"] = tensor_from_matrix(params.wv);
  bundle[prefix + ".wo"] = tensor_from_matrix(params.wo);
  return bundle;
}

ParamBundle bundle_from_deform_attn_params(const DeformAttnParams& params,
                                           const std::string& prefix) {
  ParamBundle bundle;
  ffn_to_bundle(bundle, prefix + ".offset_net", params.offset_net);
  ffn_to_bundle(bundle, prefix + ".weight_net", params.weight_net);
  bundle[prefix + ".out_proj.weight"] = tensor_from_matrix(params.out_proj_weight);
  bundle[prefix + ".out_proj.bias"] = tensor_from_vector(params.out_proj_bias);
  return bundle;
}

DenseMap deform_conv_merge(const std::vector<DenseMap>& levels,
                           const std::vector<DeformConvParams>& stages) {
  if (levels.empty()) throw std::invalid_argument("deform_conv_merge: no levels");
  if (stages.size() + 1 != levels.size()) {
    throw std::invalid_argument("deform_conv_merge: need one stage per merge step");
  }
  DenseMap acc = levels.front();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const DenseMap& next = levels[s + 1];
    if (next.height != acc.height * 2 || next.width != acc.width * 2) {
      throw std::invalid_argument("deform_conv_merge: level shapes must chain by factor 2");
    }
    DenseMap conv = deform_conv_forward(acc, stages[s]);
    if (conv.channels != next.channels) {
      throw std::invalid_argument("deform_conv_merge: stage output channels mismatch");
    }
    DenseMap up = upscale_bilinear(conv, 2);
    acc = next;
    for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += up.values[i];
  }
  return acc;
}

}  // namespace cte
