#include "sdmtl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sdmtl {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": operand dims " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Copies one batch item of src into dst with a zero border of `pad` cells on
// the (j, d) plane. dst must hold c * (j + 2p) * (d + 2p) floats.
void pad_plane(const Tensor& src, int b, int pad, float* dst) {
  const Shape4 s = src.shape();
  const int pj = s.j + 2 * pad;
  const int pd = s.d + 2 * pad;
  std::fill(dst, dst + static_cast<std::size_t>(s.c) * pj * pd, 0.0f);
  for (int c = 0; c < s.c; ++c) {
    for (int j = 0; j < s.j; ++j) {
      const float* row = src.data() + src.index(b, c, j, 0);
      float* out = dst + (static_cast<std::size_t>(c) * pj + (j + pad)) * pd + pad;
      std::copy(row, row + s.d, out);
    }
  }
}

// Gathers the padded plane into kernel-position rows: cols[(ic,dy,dx)][y*d+x]
// = padded[ic][y+dy][x+dx]. Turns the convolution into a small matrix
// product whose inner loop runs contiguously over the spatial plane.
void im2col(const float* padded, int in_c, int j, int d, int k, std::vector<float>& cols) {
  const int pd = d + 2 * ((k - 1) / 2);
  const int plane = j * d;
  float* out = cols.data();
  for (int ic = 0; ic < in_c; ++ic) {
    const float* base = padded + static_cast<std::size_t>(ic) * (j + k - 1) * pd;
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        for (int y = 0; y < j; ++y) {
          const float* src = base + (static_cast<std::size_t>(y) + dy) * pd + dx;
          std::copy(src, src + d, out + static_cast<std::size_t>(y) * d);
        }
        out += plane;
      }
    }
  }
}

}  // namespace

Value conv2d(Tape& tape, Value input, Value weight, Value bias) {
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  const Shape4 xs = x.shape();
  const Shape4 ws = w.shape();

  if (ws.j != ws.d || ws.j % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " + shape_str(ws));
  }
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input channels " + shape_str(xs) + " do not match weight " +
                     shape_str(ws));
  }
  if (bv.shape() != Shape4{ws.b, 1, 1, 1}) {
    throw ShapeError("conv2d: bias dims " + shape_str(bv.shape()) + " do not match weight " +
                     shape_str(ws));
  }

  const int k = ws.j;
  const int pad = (k - 1) / 2;
  const int out_c = ws.b;
  const int in_c = xs.c;
  const int pj = xs.j + 2 * pad;
  const int pd = xs.d + 2 * pad;

  const int plane = xs.j * xs.d;
  const int kk = in_c * k * k;
  Tensor out({xs.b, out_c, xs.j, xs.d});
  std::vector<float> padded(static_cast<std::size_t>(in_c) * pj * pd);
  std::vector<float> cols(static_cast<std::size_t>(kk) * plane);
  for (int b = 0; b < xs.b; ++b) {
    pad_plane(x, b, pad, padded.data());
    im2col(padded.data(), in_c, xs.j, xs.d, k, cols);
    for (int oc = 0; oc < out_c; ++oc) {
      float* dst = out.data() + out.index(b, oc, 0, 0);
      std::fill(dst, dst + plane, bv[oc]);
      const float* wrow = w.data() + w.index(oc, 0, 0, 0);
      for (int r = 0; r < kk; ++r) {
        const float wv2 = wrow[r];
        if (wv2 == 0.0f) continue;
        const float* src = cols.data() + static_cast<std::size_t>(r) * plane;
        for (int p = 0; p < plane; ++p) dst[p] += wv2 * src[p];
      }
    }
  }

  return tape.emit(std::move(out), {input.id, weight.id, bias.id},
                   [input, weight, bias, k, pad](Tape& t, int self) {
                     const Tensor& g = t.node_grad(self);
                     const Tensor& xv = t.value(input);
                     const Tensor& wv = t.value(weight);
                     const Shape4 gs = g.shape();
                     const Shape4 xsb = xv.shape();
                     const int pj = xsb.j + 2 * pad;
                     const int pd = xsb.d + 2 * pad;
                     const int plane = xsb.j * xsb.d;
                     const int kk = xsb.c * k * k;

                     Tensor& gb = t.grad_slot(bias.id);
                     Tensor& gw = t.grad_slot(weight.id);
                     Tensor& gx = t.grad_slot(input.id);
                     std::vector<float> padded(static_cast<std::size_t>(xsb.c) * pj * pd);
                     std::vector<float> cols(static_cast<std::size_t>(kk) * plane);
                     std::vector<float> gcols(static_cast<std::size_t>(kk) * plane);
                     for (int b = 0; b < gs.b; ++b) {
                       pad_plane(xv, b, pad, padded.data());
                       im2col(padded.data(), xsb.c, xsb.j, xsb.d, k, cols);
                       std::fill(gcols.begin(), gcols.end(), 0.0f);
                       for (int oc = 0; oc < gs.c; ++oc) {
                         const float* grow = g.data() + g.index(b, oc, 0, 0);
                         float bacc = 0.0f;
                         for (int p = 0; p < plane; ++p) bacc += grow[p];
                         gb[oc] += bacc;
                         const float* wrow = wv.data() + wv.index(oc, 0, 0, 0);
                         float* gwrow = gw.data() + gw.index(oc, 0, 0, 0);
                         for (int r = 0; r < kk; ++r) {
                           const float* src = cols.data() + static_cast<std::size_t>(r) * plane;
                           float* gsrc = gcols.data() + static_cast<std::size_t>(r) * plane;
                           const float wv2 = wrow[r];
                           float acc = 0.0f;
                           for (int p = 0; p < plane; ++p) {
                             acc += grow[p] * src[p];
                             gsrc[p] += grow[p] * wv2;
                           }
                           gwrow[r] += acc;
                         }
                       }
                       // col2im: scatter the column gradients back through the padding
                       for (int ic = 0; ic < xsb.c; ++ic) {
                         for (int dy = 0; dy < k; ++dy) {
                           for (int dx = 0; dx < k; ++dx) {
                             const float* gsrc = gcols.data() +
                                                 (static_cast<std::size_t>(ic) * k * k +
                                                  static_cast<std::size_t>(dy) * k + dx) *
                                                     plane;
                             for (int y = 0; y < xsb.j; ++y) {
                               const int sy = y + dy - pad;
                               if (sy < 0 || sy >= xsb.j) continue;
                               float* dst = gx.data() + gx.index(b, ic, sy, 0);
                               const float* row = gsrc + static_cast<std::size_t>(y) * xsb.d;
                               for (int d = 0; d < xsb.d; ++d) {
                                 const int sx = d + dx - pad;
                                 if (sx < 0 || sx >= xsb.d) continue;
                                 dst[sx] += row[d];
                               }
                             }
                           }
                         }
                       }
                     }
                   });
}

Value leaky_relu(Tape& tape, Value x, float slope) {
  if (!(slope > 0.0f && slope < 1.0f)) {
    throw ConfigError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
  }
  const Tensor& xv = tape.value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    const float v = xv[i];
    out[i] = v > 0.0f ? v : slope * v;
  }
  return tape.emit(std::move(out), {x.id}, [x, slope](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_slot(x.id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * (xv[i] > 0.0f ? 1.0f : slope);
    }
  });
}

Value sigmoid(Tape& tape, Value x) {
  const Tensor& xv = tape.value(x);
  Tensor out(xv.shape());
  constexpr float lo = 1.0e-12f;
  const float hi = std::nextafter(1.0f, 0.0f);
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    const float s = 1.0f / (1.0f + std::exp(-xv[i]));
    out[i] = std::clamp(s, lo, hi);
  }
  return tape.emit(std::move(out), {x.id}, [x](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& s = t.node_value(self);
    Tensor& gx = t.grad_slot(x.id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * s[i] * (1.0f - s[i]);
    }
  });
}

Value add(Tape& tape, Value a, Value b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape("add", av, bv);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return tape.emit(std::move(out), {a.id, b.id}, [a, b](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    Tensor& ga = t.grad_slot(a.id);
    Tensor& gb = t.grad_slot(b.id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Value sub(Tape& tape, Value a, Value b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape("sub", av, bv);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return tape.emit(std::move(out), {a.id, b.id}, [a, b](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    Tensor& ga = t.grad_slot(a.id);
    Tensor& gb = t.grad_slot(b.id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Value mul(Tape& tape, Value a, Value b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape("mul", av, bv);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return tape.emit(std::move(out), {a.id, b.id}, [a, b](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    Tensor& ga = t.grad_slot(a.id);
    Tensor& gb = t.grad_slot(b.id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Value scale(Tape& tape, Value x, float s) {
  const Tensor& xv = tape.value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * s;
  return tape.emit(std::move(out), {x.id}, [x, s](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    Tensor& gx = t.grad_slot(x.id);
    for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
  });
}

Value concat_channels(Tape& tape, std::span<const Value> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no operands");
  const Shape4 first = tape.value(parts[0]).shape();
  int total_c = 0;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (Value p : parts) {
    const Shape4 s = tape.value(p).shape();
    if (s.b != first.b || s.j != first.j || s.d != first.d) {
      throw ShapeError("concat_channels: operand dims " + shape_str(s) +
                       " disagree with " + shape_str(first) + " outside the channel axis");
    }
    total_c += s.c;
    ids.push_back(p.id);
  }
  Tensor out({first.b, total_c, first.j, first.d});
  const std::int64_t plane = static_cast<std::int64_t>(first.j) * first.d;
  for (int b = 0; b < first.b; ++b) {
    std::int64_t coff = 0;
    for (Value p : parts) {
      const Tensor& pv = tape.value(p);
      const std::int64_t n = static_cast<std::int64_t>(pv.shape().c) * plane;
      std::copy(pv.data() + pv.index(b, 0, 0, 0), pv.data() + pv.index(b, 0, 0, 0) + n,
                out.data() + out.index(b, static_cast<int>(coff), 0, 0));
      coff += pv.shape().c;
    }
  }
  std::vector<Value> captured(parts.begin(), parts.end());
  return tape.emit(std::move(out), std::move(ids), [captured, plane](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    const Shape4 gs = g.shape();
    for (int b = 0; b < gs.b; ++b) {
      int coff = 0;
      for (Value p : captured) {
        Tensor& gp = t.grad_slot(p.id);
        const int pc = gp.shape().c;
        const float* src = g.data() + g.index(b, coff, 0, 0);
        float* dst = gp.data() + gp.index(b, 0, 0, 0);
        for (std::int64_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
        coff += pc;
      }
    }
  });
}

Value fully_connected(Tape& tape, Value x, Value weight, Value bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  const Shape4 xs = xv.shape();
  const Shape4 ws = wv.shape();
  if (xs.j != 1 || xs.d != 1 || ws.j != 1 || ws.d != 1) {
    throw ShapeError("fully_connected: expects flat operands, got x " + shape_str(xs) +
                     " weight " + shape_str(ws));
  }
  if (ws.c != xs.c) {
    throw ShapeError("fully_connected: input features " + shape_str(xs) +
                     " do not match weight " + shape_str(ws));
  }
  if (bv.shape() != Shape4{ws.b, 1, 1, 1}) {
    throw ShapeError("fully_connected: bias dims " + shape_str(bv.shape()) +
                     " do not match weight " + shape_str(ws));
  }
  const int in_n = xs.c;
  const int out_n = ws.b;
  Tensor out({xs.b, out_n, 1, 1});
  for (int b = 0; b < xs.b; ++b) {
    const float* row = xv.data() + xv.index(b, 0, 0, 0);
    for (int o = 0; o < out_n; ++o) {
      const float* wrow = wv.data() + wv.index(o, 0, 0, 0);
      float acc = bv[o];
      for (int i = 0; i < in_n; ++i) acc += row[i] * wrow[i];
      out.at(b, o, 0, 0) = acc;
    }
  }
  return tape.emit(std::move(out), {x.id, weight.id, bias.id},
                   [x, weight, bias, in_n, out_n](Tape& t, int self) {
                     const Tensor& g = t.node_grad(self);
                     const Tensor& xv = t.value(x);
                     const Tensor& wv = t.value(weight);
                     Tensor& gx = t.grad_slot(x.id);
                     Tensor& gw = t.grad_slot(weight.id);
                     Tensor& gb = t.grad_slot(bias.id);
                     for (int b = 0; b < g.shape().b; ++b) {
                       const float* xrow = xv.data() + xv.index(b, 0, 0, 0);
                       float* gxrow = gx.data() + gx.index(b, 0, 0, 0);
                       for (int o = 0; o < out_n; ++o) {
                         const float go = g.at(b, o, 0, 0);
                         const float* wrow = wv.data() + wv.index(o, 0, 0, 0);
                         float* gwrow = gw.data() + gw.index(o, 0, 0, 0);
                         gb[o] += go;
                         for (int i = 0; i < in_n; ++i) {
                           gxrow[i] += go * wrow[i];
                           gwrow[i] += go * xrow[i];
                         }
                       }
                     }
                   });
}

Value flatten_features(Tape& tape, Value x) {
  const Tensor& xv = tape.value(x);
  const Shape4 xs = xv.shape();
  Tensor out({xs.b, xs.c * xs.j * xs.d, 1, 1},
             std::vector<float>(xv.data(), xv.data() + xv.size()));
  return tape.emit(std::move(out), {x.id}, [x](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    Tensor& gx = t.grad_slot(x.id);
    for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Value weighted_sum(Tape& tape, std::span<const Value> features, Value weights) {
  if (features.empty()) throw ContractError("weighted_sum: no features");
  const Tensor& wv = tape.value(weights);
  const Shape4 ws = wv.shape();
  const Shape4 fs = tape.value(features[0]).shape();
  if (ws.c != static_cast<int>(features.size()) || ws.b != fs.b || ws.j != 1 || ws.d != 1) {
    throw ShapeError("weighted_sum: weights " + shape_str(ws) + " do not match " +
                     std::to_string(features.size()) + " features of " + shape_str(fs));
  }
  std::vector<int> ids;
  for (Value f : features) {
    require_same_shape("weighted_sum", tape.value(f), tape.value(features[0]));
    ids.push_back(f.id);
  }
  ids.push_back(weights.id);

  const std::int64_t plane = static_cast<std::int64_t>(fs.c) * fs.j * fs.d;
  Tensor out(fs);
  for (int b = 0; b < fs.b; ++b) {
    float* dst = out.data() + out.index(b, 0, 0, 0);
    for (std::size_t l = 0; l < features.size(); ++l) {
      const float a = wv.at(b, static_cast<int>(l), 0, 0);
      const Tensor& f = tape.value(features[l]);
      const float* src = f.data() + f.index(b, 0, 0, 0);
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += a * src[i];
    }
  }
  std::vector<Value> captured(features.begin(), features.end());
  return tape.emit(std::move(out), std::move(ids), [captured, weights, plane](Tape& t, int self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& wv = t.value(weights);
    Tensor& gw = t.grad_slot(weights.id);
    for (int b = 0; b < g.shape().b; ++b) {
      const float* grow = g.data() + g.index(b, 0, 0, 0);
      for (std::size_t l = 0; l < captured.size(); ++l) {
        const Tensor& f = t.value(captured[l]);
        Tensor& gf = t.grad_slot(captured[l].id);
        const float a = wv.at(b, static_cast<int>(l), 0, 0);
        const float* frow = f.data() + f.index(b, 0, 0, 0);
        float* gfrow = gf.data() + gf.index(b, 0, 0, 0);
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) {
          gfrow[i] += a * grow[i];
          acc += static_cast<double>(grow[i]) * frow[i];
        }
        gw.at(b, static_cast<int>(l), 0, 0) += static_cast<float>(acc);
      }
    }
  });
}

Value sum_all(Tape& tape, Value x) {
  const Tensor& xv = tape.value(x);
  double acc = 0.0;
  for (std::int64_t i = 0; i < xv.size(); ++i) acc += xv[i];
  return tape.emit(Tensor::scalar(static_cast<float>(acc)), {x.id}, [x](Tape& t, int self) {
    const float g = t.node_grad(self)[0];
    Tensor& gx = t.grad_slot(x.id);
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Value mean_all(Tape& tape, Value x) {
  const Tensor& xv = tape.value(x);
  if (xv.size() == 0) throw ContractError("mean_all: empty tensor");
  const float inv = 1.0f / static_cast<float>(xv.size());
  return scale(tape, sum_all(tape, x), inv);
}

}  // namespace sdmtl
