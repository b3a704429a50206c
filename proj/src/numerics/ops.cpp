#include "smoothsinger/numerics/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
}

// Accumulates `g` into the parent gradient when that parent needs one.
void accumulate(Node& parent, const Tensor& g, double factor = 1.0) {
  if (!parent.requires_grad) return;
  Tensor& dst = parent.grad_buffer();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
}

template <typename F, typename D>
Var unary(const Var& x, F f, D df) {
  Tensor out(x.shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return make_result(std::move(out), {a},
                     [factor](Node& self) { accumulate(*self.parents[0], self.grad, factor); });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  require_rank(x, 2, "add_channel_bias");
  const std::size_t channels = x.dim(0), length = x.dim(1);
  if (bias.value().size() != channels)
    throw ShapeError("add_channel_bias: bias has " + std::to_string(bias.value().size()) +
                     " entries for " + std::to_string(channels) + " channels");
  Tensor out = x.value();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < length; ++t) out[c * length + t] += bias.value()[c];
  return make_result(std::move(out), {x, bias}, [channels, length](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    Tensor& g = pb.grad_buffer();
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < length; ++t) s += self.grad[c * length + t];
      g[c] += s;
    }
  });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v * logistic(v); },
      [](double v, double) {
        double s = logistic(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Var sigmoid(const Var& x) {
  return unary(x, logistic, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const ConvOptions& opt) {
  if (kernel < 1 || opt.stride < 1 || opt.dilation < 1)
    throw ConfigError("conv1d: kernel, stride and dilation must be >= 1");
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  const std::size_t padded = length + 2 * opt.padding;
  if (padded < span)
    throw ShapeError("conv1d: padded length " + std::to_string(padded) + " shorter than kernel span " +
                     std::to_string(span));
  return (padded - span) / opt.stride + 1;
}

std::size_t same_coverage_padding(std::size_t kernel, std::size_t stride) {
  return kernel > stride ? (kernel - stride + 1) / 2 : 0;
}

Var conv1d(const Var& input, const Var& kernel, const std::optional<Var>& bias, const ConvOptions& opt) {
  require_rank(input, 2, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  const std::size_t c_in = input.dim(0), length = input.dim(1);
  const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != c_in)
    throw ShapeError("conv1d: input has " + std::to_string(c_in) + " channels but kernel " +
                     to_string(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  if (bias && bias->value().size() != c_out)
    throw ShapeError("conv1d: bias size " + std::to_string(bias->value().size()) + " != " +
                     std::to_string(c_out));
  const std::size_t out_len = conv1d_output_length(length, k, opt);
  const std::size_t rows = c_in * k;
  const bool pointwise = k == 1 && opt.stride == 1 && opt.padding == 0;

  // im2col: column p of row (c, j) holds input[c, p*stride + j*dilation - padding].
  auto columns = std::make_shared<Tensor>();
  if (!pointwise) {
    *columns = Tensor({rows, out_len});
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* src = input.value().data() + c * length;
      for (std::size_t j = 0; j < k; ++j) {
        double* dst = columns->data() + (c * k + j) * out_len;
        const long offset = static_cast<long>(j * opt.dilation) - static_cast<long>(opt.padding);
        for (std::size_t p = 0; p < out_len; ++p) {
          const long idx = static_cast<long>(p * opt.stride) + offset;
          dst[p] = (idx >= 0 && idx < static_cast<long>(length)) ? src[idx] : 0.0;
        }
      }
    }
  }
  const double* col_data = pointwise ? input.value().data() : columns->data();

  Tensor out({c_out, out_len});
  MatMap out_m(out.data(), c_out, out_len);
  out_m.noalias() = ConstMatMap(kernel.value().data(), c_out, rows) * ConstMatMap(col_data, rows, out_len);
  if (bias)
    for (std::size_t o = 0; o < c_out; ++o) out_m.row(o).array() += bias->value()[o];

  std::vector<Var> parents{input, kernel};
  if (bias) parents.push_back(*bias);
  return make_result(std::move(out), std::move(parents),
                     [=](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pk = *self.parents[1];
                       ConstMatMap dout(self.grad.data(), c_out, out_len);
                       const double* cols = pointwise ? px.value.data() : columns->data();
                       if (pk.requires_grad) {
                         MatMap dk(pk.grad_buffer().data(), c_out, rows);
                         dk.noalias() += dout * ConstMatMap(cols, rows, out_len).transpose();
                       }
                       if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                         Tensor& db = self.parents[2]->grad_buffer();
                         for (std::size_t o = 0; o < c_out; ++o) db[o] += dout.row(o).sum();
                       }
                       if (!px.requires_grad) return;
                       Tensor& dx = px.grad_buffer();
                       ConstMatMap kmat(pk.value.data(), c_out, rows);
                       if (pointwise) {
                         MatMap(dx.data(), rows, out_len).noalias() += kmat.transpose() * dout;
                         return;
                       }
                       RowMat dcol = kmat.transpose() * dout;
                       for (std::size_t c = 0; c < c_in; ++c) {
                         double* dst = dx.data() + c * length;
                         for (std::size_t j = 0; j < k; ++j) {
                           const double* src = dcol.data() + (c * k + j) * out_len;
                           const long offset =
                               static_cast<long>(j * opt.dilation) - static_cast<long>(opt.padding);
                           for (std::size_t p = 0; p < out_len; ++p) {
                             const long idx = static_cast<long>(p * opt.stride) + offset;
                             if (idx >= 0 && idx < static_cast<long>(length)) dst[idx] += src[p];
                           }
                         }
                       }
                     });
}

Var linear(const Var& input, const Var& weight, const std::optional<Var>& bias) {
  require_rank(weight, 2, "linear weight");
  const std::size_t d_out = weight.dim(0), d_in = weight.dim(1);
  const Shape& in_shape = input.shape();
  if (in_shape.empty() || in_shape.back() != d_in)
    throw ShapeError("linear: input " + to_string(in_shape) + " trailing dim != " + std::to_string(d_in));
  if (bias && bias->value().size() != d_out)
    throw ShapeError("linear: bias size " + std::to_string(bias->value().size()) + " != " +
                     std::to_string(d_out));
  const std::size_t rows = input.value().size() / d_in;
  Shape out_shape = in_shape;
  out_shape.back() = d_out;
  Tensor out(out_shape);
  MatMap out_m(out.data(), rows, d_out);
  out_m.noalias() = ConstMatMap(input.value().data(), rows, d_in) *
                    ConstMatMap(weight.value().data(), d_out, d_in).transpose();
  if (bias)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < d_out; ++o) out_m(r, o) += bias->value()[o];

  std::vector<Var> parents{input, weight};
  if (bias) parents.push_back(*bias);
  return make_result(std::move(out), std::move(parents), [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMatMap dout(self.grad.data(), rows, d_out);
    if (px.requires_grad)
      MatMap(px.grad_buffer().data(), rows, d_in).noalias() +=
          dout * ConstMatMap(pw.value.data(), d_out, d_in);
    if (pw.requires_grad)
      MatMap(pw.grad_buffer().data(), d_out, d_in).noalias() +=
          dout.transpose() * ConstMatMap(px.value.data(), rows, d_in);
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& db = self.parents[2]->grad_buffer();
      for (std::size_t o = 0; o < d_out; ++o) db[o] += dout.col(o).sum();
    }
  });
}

Var transpose(const Var& x) {
  require_rank(x, 2, "transpose");
  const std::size_t a = x.dim(0), b = x.dim(1);
  Tensor out({b, a});
  MatMap(out.data(), b, a) = ConstMatMap(x.value().data(), a, b).transpose();
  return make_result(std::move(out), {x}, [a, b](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    MatMap(p.grad_buffer().data(), a, b) += ConstMatMap(self.grad.data(), b, a).transpose();
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Var concat_channels(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_channels");
  require_rank(b, 2, "concat_channels");
  if (a.dim(1) != b.dim(1))
    throw ShapeError("concat_channels: lengths differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t na = a.value().size();
  Tensor out({a.dim(0) + b.dim(0), a.dim(1)});
  std::copy(a.value().values().begin(), a.value().values().end(), out.data());
  std::copy(b.value().values().begin(), b.value().values().end(), out.data() + na);
  return make_result(std::move(out), {a, b}, [na](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
    }
  });
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "slice_channels");
  if (count == 0 || begin + count > x.dim(0))
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + to_string(x.shape()));
  const std::size_t length = x.dim(1);
  Tensor out({count, length});
  const double* src = x.value().data() + begin * length;
  std::copy(src, src + count * length, out.data());
  return make_result(std::move(out), {x}, [begin, length](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    double* dst = p.grad_buffer().data() + begin * length;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

Var repeat_time(const Var& x, std::size_t factor) {
  require_rank(x, 2, "repeat_time");
  if (factor < 1) throw ConfigError("repeat_time: factor must be >= 1");
  const std::size_t channels = x.dim(0), length = x.dim(1);
  Tensor out({channels, length * factor});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < length; ++t) {
      const double v = x.value()[c * length + t];
      double* dst = out.data() + c * length * factor + t * factor;
      for (std::size_t j = 0; j < factor; ++j) dst[j] = v;
    }
  return make_result(std::move(out), {x}, [channels, length, factor](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < length; ++t) {
        const double* src = self.grad.data() + c * length * factor + t * factor;
        double s = 0.0;
        for (std::size_t j = 0; j < factor; ++j) s += src[j];
        g[c * length + t] += s;
      }
  });
}

Var average_pool_time(const Var& x, std::size_t factor) {
  require_rank(x, 2, "average_pool_time");
  const std::size_t channels = x.dim(0), length = x.dim(1);
  if (factor < 1 || length % factor != 0)
    throw ShapeError("average_pool_time: factor " + std::to_string(factor) + " does not divide length " +
                     std::to_string(length));
  const std::size_t out_len = length / factor;
  const double inv = 1.0 / static_cast<double>(factor);
  Tensor out({channels, out_len});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < out_len; ++t) {
      const double* src = x.value().data() + c * length + t * factor;
      double s = 0.0;
      for (std::size_t j = 0; j < factor; ++j) s += src[j];
      out[c * out_len + t] = s * inv;
    }
  return make_result(std::move(out), {x}, [channels, length, factor, out_len, inv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < out_len; ++t) {
        const double v = self.grad[c * out_len + t] * inv;
        double* dst = g.data() + c * length + t * factor;
        for (std::size_t j = 0; j < factor; ++j) dst[j] += v;
      }
  });
}

Var fold_channels_into_time(const Var& x, std::size_t factor) {
  require_rank(x, 2, "fold_channels_into_time");
  const std::size_t wide = x.dim(0), length = x.dim(1);
  if (factor < 1 || wide % factor != 0)
    throw ShapeError("fold_channels_into_time: " + std::to_string(wide) + " channels not divisible by " +
                     std::to_string(factor));
  const std::size_t channels = wide / factor;
  Tensor out({channels, length * factor});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t j = 0; j < factor; ++j) {
      const double* src = x.value().data() + (c * factor + j) * length;
      double* dst = out.data() + c * length * factor + j;
      for (std::size_t p = 0; p < length; ++p) dst[p * factor] = src[p];
    }
  return make_result(std::move(out), {x}, [channels, factor, length](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& g = px.grad_buffer();
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < factor; ++j) {
        double* dst = g.data() + (c * factor + j) * length;
        const double* src = self.grad.data() + c * length * factor + j;
        for (std::size_t p = 0; p < length; ++p) dst[p] += src[p * factor];
      }
  });
}

Var embedding(const Var& table, const std::vector<int>& ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), width = table.dim(1), frames = ids.size();
  if (frames == 0) throw ShapeError("embedding: empty id sequence");
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw ShapeError("embedding: id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
  Tensor out({width, frames});
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t e = 0; e < width; ++e) out[e * frames + f] = table.value()[ids[f] * width + e];
  return make_result(std::move(out), {table}, [ids, width, frames](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t e = 0; e < width; ++e) g[ids[f] * width + e] += self.grad[e * frames + f];
  });
}

Var location_variable_conv(const Var& input, const Var& kernels, std::size_t hop, std::size_t kernel_size) {
  require_rank(input, 2, "location_variable_conv input");
  require_rank(kernels, 2, "location_variable_conv kernels");
  const std::size_t channels = input.dim(0), length = input.dim(1);
  const std::size_t segments = kernels.dim(1);
  if (hop < 1 || kernel_size < 1) throw ConfigError("location_variable_conv: hop and kernel size must be >= 1");
  if (segments * hop != length)
    throw ShapeError("location_variable_conv: " + std::to_string(segments) + " segments of hop " +
                     std::to_string(hop) + " do not cover length " + std::to_string(length));
  if (kernels.dim(0) % (channels * kernel_size) != 0)
    throw ShapeError("location_variable_conv: kernel rows " + std::to_string(kernels.dim(0)) +
                     " not a multiple of channels * kernel_size");
  const std::size_t groups = kernels.dim(0) / (channels * kernel_size);
  const long half = static_cast<long>(kernel_size / 2);
  const long n = static_cast<long>(length);

  Tensor out({groups * channels, length});
  const double* u = input.value().data();
  const double* kv = kernels.value().data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t oc = g * channels + c;
      const double* row = u + c * length;
      double* dst = out.data() + oc * length;
      for (std::size_t k = 0; k < kernel_size; ++k) {
        const double* taps = kv + (oc * kernel_size + k) * segments;
        const long shift = static_cast<long>(k) - half;
        for (long p = 0; p < n; ++p) {
          const long idx = p + shift;
          if (idx >= 0 && idx < n) dst[p] += taps[p / static_cast<long>(hop)] * row[idx];
        }
      }
    }

  return make_result(std::move(out), {input, kernels},
                     [=](Node& self) {
                       Node& pu = *self.parents[0];
                       Node& pk = *self.parents[1];
                       const double* uval = pu.value.data();
                       const double* kval = pk.value.data();
                       double* du = pu.requires_grad ? pu.grad_buffer().data() : nullptr;
                       double* dk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
                       for (std::size_t g = 0; g < groups; ++g)
                         for (std::size_t c = 0; c < channels; ++c) {
                           const std::size_t oc = g * channels + c;
                           const double* gout = self.grad.data() + oc * length;
                           for (std::size_t k = 0; k < kernel_size; ++k) {
                             const std::size_t krow = (oc * kernel_size + k) * segments;
                             const long shift = static_cast<long>(k) - half;
                             for (long p = 0; p < n; ++p) {
                               const long idx = p + shift;
                               if (idx < 0 || idx >= n) continue;
                               const std::size_t seg = static_cast<std::size_t>(p) / hop;
                               if (du) du[c * length + idx] += kval[krow + seg] * gout[p];
                               if (dk) dk[krow + seg] += uval[c * length + idx] * gout[p];
                             }
                           }
                         }
                     });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mean_squared_error(const Var& prediction, const Var& target) {
  require_same_shape(prediction, target, "mean_squared_error");
  const std::size_t n = prediction.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = prediction.value()[i] - target.value()[i];
    s += d * d;
  }
  return make_result(Tensor::scalar(s / static_cast<double>(n)), {prediction, target}, [n](Node& self) {
    Node& pp = *self.parents[0];
    Node& pt = *self.parents[1];
    const double f = 2.0 * self.grad[0] / static_cast<double>(n);
    if (pp.requires_grad) {
      Tensor& g = pp.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] += f * (pp.value[i] - pt.value[i]);
    }
    if (pt.requires_grad) {
      Tensor& g = pt.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) g[i] -= f * (pp.value[i] - pt.value[i]);
    }
  });
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  if (weights.size() != x.value().size())
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(x.value().size()) + " values");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  return make_result(Tensor::scalar(s), {x}, [weights](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * weights[i];
  });
}

}  // namespace smoothsinger::numerics
