#include "smoothsinger/network/model.hpp"

#include <cmath>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/numerics/ops.hpp"

namespace smoothsinger::network {

namespace ops = numerics;
using numerics::Shape;

Tensor step_features(double step, std::size_t dim) {
  Tensor out({1, dim});
  const std::size_t half = dim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    out[k] = std::sin(step * freq);
    out[half + k] = std::cos(step * freq);
  }
  return out;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  validate(config_);
  Rng rng(config_.init_seed);
  const auto& ch = config_.channels;
  const std::size_t n = config_.stages();
  auto prev_channels = [&](std::size_t i) { return i == 0 ? config_.top_channels : ch[i - 1]; };

  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "main.down" + std::to_string(i);
    const std::size_t in = i == 0 ? 1 : ch[i - 1];
    main_down_.push_back({add_conv(rng, p + ".down", ch[i], in, 2 * config_.strides[i]),
                          add_conv(rng, p + ".refine", ch[i], ch[i], 3)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "ref.down" + std::to_string(i);
    const std::size_t in = i == 0 ? 1 : ch[i - 1];
    ref_down_.push_back({add_conv(rng, p + ".down", ch[i], in, 2 * config_.strides[i]),
                         add_conv(rng, p + ".refine", ch[i], ch[i], 3)});
  }
  for (std::size_t i = 0; i < n; ++i)
    fuse_.push_back(add_conv(rng, "fuse" + std::to_string(i), ch[i], 2 * ch[i], 1, Init::IdentityLeft));

  const std::size_t E = config_.embed_dim;
  phoneme_table_ = add(rng, "cond.phoneme", {config_.phoneme_vocab, E}, Init::Uniform, E);
  pitch_table_ = add(rng, "cond.pitch", {config_.pitch_bins, E}, Init::Uniform, E);
  speaker_table_ = add(rng, "cond.speaker", {config_.speakers, E}, Init::Uniform, E);
  frame_conv_ = add_conv(rng, "cond.frame", E, E, 3);
  step_w1_ = add(rng, "cond.step.w1", {config_.step_hidden, config_.step_embed_dim}, Init::Uniform, config_.step_embed_dim);
  step_b1_ = add(rng, "cond.step.b1", {config_.step_hidden}, Init::Zero, 1);
  step_w2_ = add(rng, "cond.step.w2", {config_.step_hidden, config_.step_hidden}, Init::Uniform, config_.step_hidden);
  step_b2_ = add(rng, "cond.step.b2", {config_.step_hidden}, Init::Zero, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "cond.stage" + std::to_string(i);
    cond_proj_.push_back(add_conv(rng, p + ".proj", ch[i], E, 1));
    step_proj_w_.push_back(add(rng, p + ".step.weight", {ch[i], config_.step_hidden}, Init::Uniform, config_.step_hidden));
    step_proj_b_.push_back(add(rng, p + ".step.bias", {ch[i]}, Init::Zero, 1));
  }

  const std::size_t K = config_.lvc_kernel;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "lvc" + std::to_string(i);
    const std::size_t out = prev_channels(i);
    lvc_.push_back({add_conv(rng, p + ".in", out, ch[i], 1), add_conv(rng, p + ".kp_hidden", ch[i], ch[i], 3),
                    add_conv(rng, p + ".kp_out", 2 * out * K, ch[i], 1), add_conv(rng, p + ".out", out, out, 1)});
  }

  const std::size_t D = config_.lowf_channels;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "lowf" + std::to_string(i);
    LowFBlock block{add_conv(rng, p + ".in", D, ch[i], 1), {}};
    for (std::size_t j = i + 1; j-- > 0;) {
      const std::string q = p + ".up" + std::to_string(j);
      const bool last = j == 0;
      const std::size_t s = config_.strides[j];
      LowFStage stage;
      stage.conv = add_conv(rng, q + ".conv", D, D, 3);
      stage.attention = add_attention(rng, q + ".attn", D);
      stage.expand = add_conv(rng, q + ".expand", s * (last ? 1 : D), D, 1, last ? Init::Zero : Init::Uniform);
      stage.stride = s;
      block.stages.push_back(stage);
    }
    lowf_.push_back(std::move(block));
  }
  stem_ = add_conv(rng, "stem", config_.top_channels, 1, 3);
  head_ = add_conv(rng, "head", 1, config_.top_channels, 1, Init::Zero);

  clone_reference_branch();
}

Parameter* Model::add(Rng& rng, const std::string& name, Shape shape, Init init, std::size_t fan_in) {
  Tensor value(shape);
  if (init == Init::Uniform) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = uniform(rng, -bound, bound);
  } else if (init == Init::IdentityLeft) {
    // [out, 2 * out, 1]: identity on the first `out` inputs.
    for (std::size_t o = 0; o < shape[0]; ++o) value[o * shape[1] * shape[2] + o * shape[2]] = 1.0;
  }
  params_.emplace_back(name, std::move(value));
  return &params_.back();
}

Model::Conv Model::add_conv(Rng& rng, const std::string& name, std::size_t out, std::size_t in, std::size_t kernel,
                            Init init) {
  Conv c;
  c.weight = add(rng, name + ".weight", {out, in, kernel}, init, in * kernel);
  c.bias = add(rng, name + ".bias", {out}, Init::Zero, 1);
  return c;
}

Model::Attention Model::add_attention(Rng& rng, const std::string& name, std::size_t dim) {
  Attention a;
  a.wq = add(rng, name + ".wq", {dim, dim}, Init::Uniform, dim);
  a.bq = add(rng, name + ".bq", {dim}, Init::Zero, 1);
  a.wk = add(rng, name + ".wk", {dim, dim}, Init::Uniform, dim);
  a.wv = add(rng, name + ".wv", {dim, dim}, Init::Uniform, dim);
  a.bv = add(rng, name + ".bv", {dim}, Init::Zero, 1);
  a.wo = add(rng, name + ".wo", {dim, dim}, Init::Uniform, dim);
  a.bo = add(rng, name + ".bo", {dim}, Init::Zero, 1);
  return a;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Parameter& Model::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ValidationError("no parameter named '" + name + "'");
}

std::size_t Model::parameter_count() const { return parameter_count(""); }

std::size_t Model::parameter_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.name.compare(0, prefix.size(), prefix) == 0) n += p.value.size();
  return n;
}

void Model::clone_reference_branch() {
  for (std::size_t i = 0; i < main_down_.size(); ++i) {
    for (auto [src, dst] : {std::pair{main_down_[i].down, ref_down_[i].down}, std::pair{main_down_[i].refine, ref_down_[i].refine}}) {
      dst.weight->value = src.weight->value;
      dst.bias->value = src.bias->value;
    }
  }
}

void Model::check_stage(std::size_t stage) const {
  if (stage >= config_.stages())
    throw ValidationError("stage " + std::to_string(stage) + " outside [0, " + std::to_string(config_.stages()) + ")");
}

Var Model::apply(const Conv& conv, const Var& x, const numerics::ConvOptions& opt) const {
  return ops::conv1d(x, ops::param(*conv.weight), ops::param(*conv.bias), opt);
}

Var Model::down_block(Branch branch, std::size_t stage, const Var& x) const {
  check_stage(stage);
  const std::size_t s = config_.strides[stage];
  const std::size_t in = stage == 0 ? 1 : config_.channels[stage - 1];
  if (x.value().rank() != 2 || x.dim(0) != in)
    throw ShapeError("down block " + std::to_string(stage) + ": expected [" + std::to_string(in) + ", L], got " +
                     numerics::to_string(x.shape()));
  if (x.dim(1) % s != 0)
    throw ShapeError("down block " + std::to_string(stage) + ": length " + std::to_string(x.dim(1)) +
                     " not divisible by stride " + std::to_string(s));
  const auto& block = (branch == Branch::Main ? main_down_ : ref_down_)[stage];
  Var h = ops::silu(apply(block.down, x, {s, numerics::same_coverage_padding(2 * s, s), 1}));
  return ops::add(h, ops::silu(apply(block.refine, h, {1, 1, 1})));
}

Var Model::fuse(std::size_t stage, const Var& x, const Var& y) const {
  check_stage(stage);
  if (x.shape() != y.shape())
    throw ShapeError("fuse " + std::to_string(stage) + ": main " + numerics::to_string(x.shape()) + " vs reference " +
                     numerics::to_string(y.shape()));
  return apply(fuse_[stage], ops::concat_channels(x, y));
}

ConditionEmbedding Model::encode_condition(const ConditionFeatures& c, double step, std::size_t length) const {
  validate(c, config_);
  if (length % config_.length_multiple() != 0)
    throw ShapeError("target length " + std::to_string(length) + " is not a multiple of " +
                     std::to_string(config_.length_multiple()));
  const std::size_t frames = length / config_.frame_hop;
  if (c.frames() != frames)
    throw ShapeError("condition has " + std::to_string(c.frames()) + " frames, length " + std::to_string(length) +
                     " needs " + std::to_string(frames));
  std::vector<int> bins(frames), speakers(frames, c.speaker_id);
  for (std::size_t f = 0; f < frames; ++f) bins[f] = pitch_bin(c.pitch_hz[f], config_);
  Var base = ops::add(ops::add(ops::embedding(ops::param(*phoneme_table_), c.phoneme_ids),
                               ops::embedding(ops::param(*pitch_table_), bins)),
                      ops::embedding(ops::param(*speaker_table_), speakers));
  base = ops::silu(apply(frame_conv_, base, {1, 1, 1}));

  ConditionEmbedding out;
  Var s = ops::constant(step_features(step, config_.step_embed_dim));
  s = ops::silu(ops::linear(s, ops::param(*step_w1_), ops::param(*step_b1_)));
  s = ops::silu(ops::linear(s, ops::param(*step_w2_), ops::param(*step_b2_)));
  out.step = s;
  for (std::size_t i = 0; i < config_.stages(); ++i) {
    const std::size_t stride = config_.cumulative_stride(i);
    Var r = stride <= config_.frame_hop ? ops::repeat_time(base, config_.frame_hop / stride)
                                        : ops::average_pool_time(base, stride / config_.frame_hop);
    r = apply(cond_proj_[i], r);
    Var t = ops::linear(s, ops::param(*step_proj_w_[i]), ops::param(*step_proj_b_[i]));
    out.stages.push_back(ops::add_channel_bias(r, ops::reshape(t, {config_.channels[i]})));
  }
  return out;
}

Var Model::hidden_input(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                        const ConditionEmbedding& cond) const {
  check_stage(stage);
  if (cond.stages.size() != config_.stages()) throw ShapeError("condition embedding has the wrong stage count");
  const Shape expect{config_.channels[stage], fused.dim(1)};
  if (fused.shape() != expect || cond.stages[stage].shape() != expect)
    throw ShapeError("stage " + std::to_string(stage) + ": fused " + numerics::to_string(fused.shape()) +
                     " and condition " + numerics::to_string(cond.stages[stage].shape()) + " must match");
  Var h = ops::add(fused, cond.stages[stage]);
  if (z_next) {
    if (z_next->shape() != expect)
      throw ShapeError("stage " + std::to_string(stage) + ": upsampled input " + numerics::to_string(z_next->shape()) +
                       " expected " + numerics::to_string(expect));
    h = ops::add(h, *z_next);
  }
  return h;
}

Var Model::lvc_kernels(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                       const ConditionEmbedding& cond) const {
  const Var h = hidden_input(stage, z_next, fused, cond);
  const auto& b = lvc_[stage];
  return apply(b.kp_out, ops::silu(apply(b.kp_hidden, h, {1, 1, 1})));
}

Var Model::lvc_up_block(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                        const ConditionEmbedding& cond, const std::optional<Var>& skip) const {
  const Var h = hidden_input(stage, z_next, fused, cond);
  const auto& b = lvc_[stage];
  const std::size_t s = config_.strides[stage], K = config_.lvc_kernel;
  Var u = ops::repeat_time(apply(b.in_proj, h), s);
  if (skip) {
    if (skip->shape() != u.shape())
      throw ShapeError("stage " + std::to_string(stage) + ": skip " + numerics::to_string(skip->shape()) +
                       " expected " + numerics::to_string(u.shape()));
    u = ops::add(u, *skip);
  }
  Var kernels = apply(b.kp_out, ops::silu(apply(b.kp_hidden, h, {1, 1, 1})));
  Var lvc = ops::location_variable_conv(u, kernels, s, K);
  const std::size_t C = u.dim(0);
  Var gated = ops::mul(ops::tanh(ops::slice_channels(lvc, 0, C)), ops::sigmoid(ops::slice_channels(lvc, C, C)));
  return ops::add(u, apply(b.out_proj, gated));
}

Var Model::lowf_block(std::size_t stage, const Var& fused, const ConditionEmbedding& cond) const {
  Var h = apply(lowf_[stage].in_proj, hidden_input(stage, std::nullopt, fused, cond));
  for (const auto& st : lowf_[stage].stages) {
    h = ops::silu(apply(st.conv, h, {1, 1, 1}));
    const numerics::AttentionWeights w{ops::param(*st.attention.wq), ops::param(*st.attention.bq),
                                       ops::param(*st.attention.wk), ops::param(*st.attention.wv),
                                       ops::param(*st.attention.bv), ops::param(*st.attention.wo),
                                       ops::param(*st.attention.bo)};
    Var seq = ops::transpose(h);
    seq = ops::add(seq, numerics::local_self_attention(seq, w, config_.attention_window, config_.attention_heads));
    h = ops::fold_channels_into_time(apply(st.expand, ops::transpose(seq)), st.stride);
  }
  return h;
}

FeaturePyramid Model::forward(const Var& x_t, const Var& reference, const ConditionFeatures& c, double step) const {
  if (x_t.value().rank() != 2 || x_t.dim(0) != 1)
    throw ShapeError("x_t must be [1, L], got " + numerics::to_string(x_t.shape()));
  if (reference.shape() != x_t.shape())
    throw ShapeError("reference " + numerics::to_string(reference.shape()) + " does not match x_t " +
                     numerics::to_string(x_t.shape()));
  const std::size_t L = x_t.dim(1);
  if (L % config_.length_multiple() != 0)
    throw ShapeError("input length " + std::to_string(L) + " is not a multiple of " +
                     std::to_string(config_.length_multiple()));
  const ConditionEmbedding cond = encode_condition(c, step, L);
  const std::size_t n = config_.stages();
  FeaturePyramid pyr;
  Var x = x_t, y = reference;
  for (std::size_t i = 0; i < n; ++i) {
    pyr.X.push_back(down_block(Branch::Main, i, x));
    pyr.Y.push_back(down_block(Branch::Reference, i, y));
    pyr.fused.push_back(fuse(i, pyr.X[i], pyr.Y[i]));
    x = pyr.fused[i];
    y = pyr.Y[i];
  }
  pyr.Z.resize(n);
  std::optional<Var> z;
  const Var stem = apply(stem_, x_t, {1, 1, 1});
  for (std::size_t i = n; i-- > 0;) {
    pyr.Z[i] = lvc_up_block(i, z, pyr.fused[i], cond, i == 0 ? std::optional<Var>(stem) : std::nullopt);
    z = pyr.Z[i];
  }
  Var out = apply(head_, pyr.Z[0]);
  for (std::size_t i = 0; i < n; ++i) {
    pyr.K.push_back(lowf_block(i, pyr.fused[i], cond));
    if (pyr.K[i].shape() != out.shape())
      throw ShapeError("low-frequency block " + std::to_string(i) + " produced " + numerics::to_string(pyr.K[i].shape()));
    out = ops::add(out, pyr.K[i]);
  }
  pyr.output = out;
  return pyr;
}

FeaturePyramid Model::forward(const Tensor& x_t, const Tensor& reference, const ConditionFeatures& c,
                              double step) const {
  return forward(ops::constant(x_t), ops::constant(reference), c, step);
}

}  // namespace smoothsinger::network
