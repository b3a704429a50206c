#pragma once

#include <cstdint>

#include "smoothsinger/numerics/autograd.hpp"

namespace smoothsinger::numerics {

// Multi-head scaled dot-product attention restricted to a band of
// `window` positions on each side. q, k, v: [L, D] with D divisible by heads.
// Cost is O(L * window * D).
Var windowed_attention(const Var& q, const Var& k, const Var& v, std::size_t window, std::size_t heads);

struct AttentionWeights {
  Var query_weight, query_bias;
  Var key_weight;  // a key bias would shift every score of a row equally
  Var value_weight, value_bias;
  Var output_weight, output_bias;
};

// Projects x: [L, D] to queries, keys and values, applies windowed_attention
// and the output projection.
Var local_self_attention(const Var& x, const AttentionWeights& weights, std::size_t window, std::size_t heads);

// Multiply-accumulate operations performed by windowed_attention on this
// thread (forward and backward) since the last reset.
std::uint64_t attention_mac_count();
void reset_attention_mac_count();

}  // namespace smoothsinger::numerics
