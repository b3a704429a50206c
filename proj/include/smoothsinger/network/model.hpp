#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "smoothsinger/network/condition.hpp"
#include "smoothsinger/network/config.hpp"
#include "smoothsinger/numerics/attention.hpp"
#include "smoothsinger/numerics/autograd.hpp"
#include "smoothsinger/numerics/ops.hpp"
#include "smoothsinger/random.hpp"

namespace smoothsinger::network {

using numerics::Parameter;
using numerics::Tensor;
using numerics::Var;

enum class Branch { Main, Reference };

// Condition(c, t) at every stage: stages[i] is [channels[i], L / cumulative_stride(i)].
struct ConditionEmbedding {
  std::vector<Var> stages;
  Var step;  // [1, step_hidden] output of the step MLP
};

// Stage-indexed intermediate values of one forward pass (index 0 is the
// finest stage).
struct FeaturePyramid {
  std::vector<Var> X, Y, fused, Z, K;
  Var output;  // [1, L]
};

// Fixed sinusoidal features of a (possibly fractional) diffusion step.
Tensor step_features(double step, std::size_t dim);

class Model {
 public:
  // Initializes every weight from config.init_seed, then clones the main
  // down-sampling branch into the reference branch.
  explicit Model(ModelConfig config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  const ModelConfig& config() const { return config_; }

  // Stable order: registration order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(const std::string& name);
  std::size_t parameter_count() const;
  std::size_t parameter_count(const std::string& prefix) const;

  // Overwrites the reference down-sampling weights with copies of the main ones.
  void clone_reference_branch();

  Var down_block(Branch branch, std::size_t stage, const Var& x) const;
  Var fuse(std::size_t stage, const Var& x, const Var& y) const;
  ConditionEmbedding encode_condition(const ConditionFeatures& c, double step, std::size_t length) const;
  // z_next is the output of the block below; the bottom block takes none.
  // skip is added to the upsampled signal; forward() passes stem(x_t) to the
  // top block, the only full-resolution view of the noisy input.
  Var lvc_up_block(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                   const ConditionEmbedding& cond, const std::optional<Var>& skip = std::nullopt) const;
  // Predicted per-segment kernels of the block, exposed for inspection.
  Var lvc_kernels(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                  const ConditionEmbedding& cond) const;
  Var lowf_block(std::size_t stage, const Var& fused, const ConditionEmbedding& cond) const;

  // x_t and reference: [1, L] with L a multiple of config().length_multiple().
  FeaturePyramid forward(const Var& x_t, const Var& reference, const ConditionFeatures& c, double step) const;
  FeaturePyramid forward(const Tensor& x_t, const Tensor& reference, const ConditionFeatures& c, double step) const;

 private:
  struct Conv {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
  };
  struct Attention {
    Parameter *wq, *bq, *wk, *wv, *bv, *wo, *bo;
  };
  struct DownBlock {
    Conv down, refine;
  };
  struct LvcBlock {
    Conv in_proj, kp_hidden, kp_out, out_proj;
  };
  struct LowFStage {
    Conv conv;
    Attention attention;
    Conv expand;
    std::size_t stride = 1;
  };
  struct LowFBlock {
    Conv in_proj;
    std::vector<LowFStage> stages;
  };

  enum class Init { Uniform, Zero, IdentityLeft };

  Parameter* add(Rng& rng, const std::string& name, numerics::Shape shape, Init init, std::size_t fan_in);
  Conv add_conv(Rng& rng, const std::string& name, std::size_t out, std::size_t in, std::size_t kernel,
                Init init = Init::Uniform);
  Attention add_attention(Rng& rng, const std::string& name, std::size_t dim);
  void check_stage(std::size_t stage) const;
  Var apply(const Conv& conv, const Var& x, const numerics::ConvOptions& opt = {}) const;
  Var hidden_input(std::size_t stage, const std::optional<Var>& z_next, const Var& fused,
                   const ConditionEmbedding& cond) const;

  ModelConfig config_;
  mutable std::deque<Parameter> params_;

  std::vector<DownBlock> main_down_, ref_down_;
  std::vector<Conv> fuse_;
  std::vector<LvcBlock> lvc_;
  std::vector<LowFBlock> lowf_;
  Conv stem_, head_;
  Parameter *phoneme_table_ = nullptr, *pitch_table_ = nullptr, *speaker_table_ = nullptr;
  Conv frame_conv_;
  std::vector<Conv> cond_proj_;
  Parameter *step_w1_ = nullptr, *step_b1_ = nullptr, *step_w2_ = nullptr, *step_b2_ = nullptr;
  std::vector<Parameter*> step_proj_w_, step_proj_b_;
};

}  // namespace smoothsinger::network
