#include "smoothsinger/numerics/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/numerics/ops.hpp"

namespace smoothsinger::numerics {

namespace {
thread_local std::uint64_t tls_macs = 0;
}

std::uint64_t attention_mac_count() { return tls_macs; }
void reset_attention_mac_count() { tls_macs = 0; }

Var windowed_attention(const Var& q, const Var& k, const Var& v, std::size_t window, std::size_t heads) {
  if (window < 1) throw ConfigError("windowed_attention: window must be >= 1");
  if (heads < 1) throw ConfigError("windowed_attention: heads must be >= 1");
  if (q.value().rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape())
    throw ShapeError("windowed_attention: q, k, v must share a [L, D] shape");
  const std::size_t length = q.dim(0), width = q.dim(1);
  if (width % heads != 0)
    throw ConfigError("windowed_attention: width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  const std::size_t head_dim = width / heads;
  const std::size_t band = 2 * window + 1;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  // probs[(i * heads + h) * band + (j - i + window)], kept only when a
  // backward pass can follow.
  const bool keep = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  auto probs = std::make_shared<std::vector<double>>(keep ? heads * length * band : 0, 0.0);
  Tensor out({length, width});
  const double* qv = q.value().data();
  const double* kv = k.value().data();
  const double* vv = v.value().data();
  std::uint64_t macs = 0;
  std::vector<double> scores(band);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(length - 1, i + window);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * head_dim;
      double peak = -INFINITY;
      for (std::size_t j = lo; j <= hi; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < head_dim; ++d) s += qv[i * width + off + d] * kv[j * width + off + d];
        s *= inv_sqrt;
        scores[j - lo] = s;
        peak = std::max(peak, s);
      }
      macs += (hi - lo + 1) * head_dim * 2;
      double total = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        scores[j - lo] = std::exp(scores[j - lo] - peak);
        total += scores[j - lo];
      }
      double* p = keep ? probs->data() + (i * heads + h) * band : nullptr;
      double* o = out.data() + i * width + off;
      for (std::size_t j = lo; j <= hi; ++j) {
        const double w = scores[j - lo] / total;
        if (p) p[j + window - i] = w;
        for (std::size_t d = 0; d < head_dim; ++d) o[d] += w * vv[j * width + off + d];
      }
    }
  }
  tls_macs += macs;

  return make_result(std::move(out), {q, k, v}, [=](Node& self) {
    Node& pq = *self.parents[0];
    Node& pk = *self.parents[1];
    Node& pv = *self.parents[2];
    const double* qd = pq.value.data();
    const double* kd = pk.value.data();
    const double* vd = pv.value.data();
    double* dq = pq.requires_grad ? pq.grad_buffer().data() : nullptr;
    double* dk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
    double* dv = pv.requires_grad ? pv.grad_buffer().data() : nullptr;
    const double* dout = self.grad.data();
    std::vector<double> dprob(band);
    std::uint64_t back_macs = 0;
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t lo = i > window ? i - window : 0;
      const std::size_t hi = std::min(length - 1, i + window);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * head_dim;
        const double* p = probs->data() + (i * heads + h) * band;
        const double* go = dout + i * width + off;
        double weighted = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
          const double w = p[j + window - i];
          double dp = 0.0;
          for (std::size_t d = 0; d < head_dim; ++d) {
            dp += go[d] * vd[j * width + off + d];
            if (dv) dv[j * width + off + d] += w * go[d];
          }
          dprob[j - lo] = dp;
          weighted += w * dp;
        }
        for (std::size_t j = lo; j <= hi; ++j) {
          const double ds = p[j + window - i] * (dprob[j - lo] - weighted) * inv_sqrt;
          for (std::size_t d = 0; d < head_dim; ++d) {
            if (dq) dq[i * width + off + d] += ds * kd[j * width + off + d];
            if (dk) dk[j * width + off + d] += ds * qd[i * width + off + d];
          }
        }
        back_macs += (hi - lo + 1) * head_dim * 4;
      }
    }
    tls_macs += back_macs;
  });
}

Var local_self_attention(const Var& x, const AttentionWeights& w, std::size_t window, std::size_t heads) {
  if (x.value().rank() != 2) throw ShapeError("local_self_attention: expected [L, D], got " + to_string(x.shape()));
  if (window < 1) throw ConfigError("local_self_attention: window must be >= 1");
  if (heads < 1 || x.dim(1) % heads != 0)
    throw ConfigError("local_self_attention: width " + std::to_string(x.dim(1)) + " not divisible by " +
                      std::to_string(heads) + " heads");
  Var q = linear(x, w.query_weight, w.query_bias);
  Var k = linear(x, w.key_weight, std::nullopt);
  Var v = linear(x, w.value_weight, w.value_bias);
  return linear(windowed_attention(q, k, v, window, heads), w.output_weight, w.output_bias);
}

}  // namespace smoothsinger::numerics
