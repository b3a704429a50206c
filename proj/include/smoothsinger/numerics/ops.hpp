#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smoothsinger/numerics/autograd.hpp"

namespace smoothsinger::numerics {

// Elementwise arithmetic (operands must share a shape).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// x: [C, L], bias: [C]; adds bias[c] along row c.
Var add_channel_bias(const Var& x, const Var& bias);

Var silu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const ConvOptions& opt);
// Zero padding that makes a strided convolution cover the input exactly:
// output length is length/stride whenever the stride divides the length.
std::size_t same_coverage_padding(std::size_t kernel, std::size_t stride);

// Cross-correlation. input: [C_in, L], kernel: [C_out, C_in, K], bias: [C_out].
Var conv1d(const Var& input, const Var& kernel, const std::optional<Var>& bias, const ConvOptions& opt = {});

// Affine map along the trailing axis. weight: [D_out, D_in], bias: [D_out].
Var linear(const Var& input, const Var& weight, const std::optional<Var>& bias);

Var transpose(const Var& x);
Var reshape(const Var& x, Shape shape);
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, std::size_t begin, std::size_t count);

// Nearest-neighbour repetition along time: [C, L] -> [C, L * factor].
Var repeat_time(const Var& x, std::size_t factor);
// Mean over non-overlapping windows: [C, L] -> [C, L / factor].
Var average_pool_time(const Var& x, std::size_t factor);
// [C * factor, L] -> [C, L * factor]; channel c * factor + j of position p
// becomes position p * factor + j of channel c.
Var fold_channels_into_time(const Var& x, std::size_t factor);

// table: [V, E]; returns [E, ids.size()].
Var embedding(const Var& table, const std::vector<int>& ids);

// Location-variable depthwise convolution. input: [C, N]; kernels:
// [groups * C * K, N / hop] holds one K-tap kernel per output channel and
// segment of `hop` samples. Output channel g * C + c filters input channel c.
Var location_variable_conv(const Var& input, const Var& kernels, std::size_t hop, std::size_t kernel_size);

Var sum(const Var& x);
Var mean(const Var& x);
Var mean_squared_error(const Var& prediction, const Var& target);
// sum_i x_i * weights_i with constant weights.
Var weighted_sum(const Var& x, const Tensor& weights);

}  // namespace smoothsinger::numerics
