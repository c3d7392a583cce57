#include "seatlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace seatlab {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                ", got shape " + shape_to_string(t.shape()));
  }
}

// Unary op whose local derivative depends only on the input value.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += self.grad[i] * deriv(p.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scalar_mul(const Tensor& x, Real factor) {
  return unary(x, [factor](Real v) { return factor * v; }, [factor](Real) { return factor; });
}

Tensor affine(const Tensor& x, Real scale, Real shift) {
  return unary(x, [scale, shift](Real v) { return scale * v + shift; }, [scale](Real) { return scale; });
}

Tensor log(const Tensor& x, Real clamp_eps) {
  return unary(
      x, [clamp_eps](Real v) { return std::log(std::max(v, clamp_eps)); },
      [clamp_eps](Real v) { return v > clamp_eps ? Real{1} / v : Real{0}; });
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  return unary(
      x, [slope](Real v) { return v > 0 ? v : slope * v; }, [slope](Real v) { return v > 0 ? Real{1} : slope; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](Real v) { return v > 0 ? v : Real{0}; }, [](Real v) { return v > 0 ? Real{1} : Real{0}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](Real v) { return Real{1} / (Real{1} + std::exp(-v)); },
      [](Real v) {
        const Real s = Real{1} / (Real{1} + std::exp(-v));
        return s * (Real{1} - s);
      });
}

Tensor clamp(const Tensor& x, Real lo, Real hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary(
      x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v) { return (v >= lo && v <= hi) ? Real{1} : Real{0}; });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return Tensor::make_result(Shape{1}, {total}, {x}, [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    const Real g = self.grad[0];
    for (Real& gi : p.grad) gi += g;
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw std::invalid_argument("mean: empty tensor");
  Real total = 0;
  for (Real v : x.data()) total += v;
  return Tensor::make_result(Shape{1}, {total / static_cast<Real>(n)}, {x}, [n](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    const Real g = self.grad[0] / static_cast<Real>(n);
    for (Real& gi : p.grad) gi += g;
  });
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, kh, kw, stride, pad, oh, ow;
  std::size_t k() const { return c_in * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

// col[(ci*kh + ky)*kw + kx][oy*ow + ox] = input[ci][oy*s + ky - pad][ox*s + kx - pad], zero outside.
void im2col(const ConvGeometry& g, const Real* in, Real* col) {
  const std::size_t np = g.p();
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        Real* row = col + ((ci * g.kh + ky) * g.kw + kx) * np;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          Real* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, Real{0});
            continue;
          }
          const Real* src = in + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? Real{0} : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const Real* col, Real* grad_in) {
  const std::size_t np = g.p();
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const Real* row = col + ((ci * g.kh + ky) * g.kw + kx) * np;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          Real* dst = grad_in + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          const Real* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

using Vec4 = Real __attribute__((vector_size(4 * sizeof(Real))));

// Register tile of Rows×(4·Vecs) outputs of C += A·B.
template <std::size_t Rows, std::size_t Vecs>
void matmul_tile(const Real* a, const Real* b, Real* c, std::size_t i, std::size_t j, std::size_t kdim,
                 std::size_t n) {
  Vec4 acc[Rows][Vecs];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) std::memcpy(&acc[r][v], c + (i + r) * n + j + v * 4, sizeof(Vec4));
  }
  for (std::size_t k = 0; k < kdim; ++k) {
    Vec4 bv[Vecs];
    for (std::size_t v = 0; v < Vecs; ++v) std::memcpy(&bv[v], b + k * n + j + v * 4, sizeof(Vec4));
    for (std::size_t r = 0; r < Rows; ++r) {
      const Real av = a[(i + r) * kdim + k];
      const Vec4 avv = {av, av, av, av};
      for (std::size_t v = 0; v < Vecs; ++v) acc[r][v] += avv * bv[v];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) std::memcpy(c + (i + r) * n + j + v * 4, &acc[r][v], sizeof(Vec4));
  }
}

// C[m][n] += Σ_k A[m][k]·B[k][n] with the k terms added to each C entry one at
// a time in ascending order. Row-major A (M×K), B (K×N), C (M×N).
void matmul_accumulate(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t kdim, std::size_t n) {
  constexpr std::size_t kRows = 8;
  constexpr std::size_t kCols = 8;
  const std::size_t n_tiled = n - n % kCols;
  std::size_t i = 0;
  for (; i + kRows <= m; i += kRows) {
    for (std::size_t j = 0; j < n_tiled; j += kCols) matmul_tile<kRows, 2>(a, b, c, i, j, kdim, n);
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n_tiled; j += kCols) matmul_tile<1, 2>(a, b, c, i, j, kdim, n);
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = n_tiled; j < n; ++j) {
      Real acc = c[r * n + j];
      for (std::size_t k = 0; k < kdim; ++k) acc += a[r * kdim + k] * b[k * n + j];
      c[r * n + j] = acc;
    }
  }
}

// C[m][k] += Σ_p A[m][p]·B[k][p] for row-major A (M×P), B (K×P), C (M×K).
void matmul_abt_accumulate(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t kdim, std::size_t p) {
  constexpr std::size_t kT = 4;
  const std::size_t p_vec = p - p % 4;
  auto hsum = [](Vec4 v) { return (v[0] + v[1]) + (v[2] + v[3]); };
  for (std::size_t i = 0; i < m; i += kT) {
    const std::size_t ri = std::min(kT, m - i);
    for (std::size_t k = 0; k < kdim; k += kT) {
      const std::size_t rk = std::min(kT, kdim - k);
      if (ri == kT && rk == kT) {
        Vec4 acc[kT][kT] = {};
        for (std::size_t q = 0; q < p_vec; q += 4) {
          Vec4 av[kT], bv[kT];
          for (std::size_t r = 0; r < kT; ++r) {
            std::memcpy(&av[r], a + (i + r) * p + q, sizeof(Vec4));
            std::memcpy(&bv[r], b + (k + r) * p + q, sizeof(Vec4));
          }
          for (std::size_t r = 0; r < kT; ++r) {
            for (std::size_t s = 0; s < kT; ++s) acc[r][s] += av[r] * bv[s];
          }
        }
        for (std::size_t r = 0; r < kT; ++r) {
          for (std::size_t s = 0; s < kT; ++s) {
            Real tail = 0;
            for (std::size_t q = p_vec; q < p; ++q) tail += a[(i + r) * p + q] * b[(k + s) * p + q];
            c[(i + r) * kdim + k + s] += hsum(acc[r][s]) + tail;
          }
        }
      } else {
        for (std::size_t r = 0; r < ri; ++r) {
          for (std::size_t s = 0; s < rk; ++s) {
            Real total = 0;
            for (std::size_t q = 0; q < p; ++q) total += a[(i + r) * p + q] * b[(k + s) * p + q];
            c[(i + r) * kdim + k + s] += total;
          }
        }
      }
    }
  }
}

std::vector<Real> transpose(const Real* src, std::size_t rows, std::size_t cols) {
  std::vector<Real> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (weight.dim(1) != input.dim(0)) {
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                " input channels but input has " + std::to_string(input.dim(0)));
  }
  if (bias.numel() != weight.dim(0)) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias.numel()) + " != output channels " +
                                std::to_string(weight.dim(0)));
  }
  if (weight.dim(2) > input.dim(1) + 2 * padding || weight.dim(3) > input.dim(2) + 2 * padding) {
    throw std::invalid_argument("conv2d: kernel " + shape_to_string(weight.shape()) + " larger than padded input " +
                                shape_to_string(input.shape()));
  }
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.c_out = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  const std::size_t np = g.p();
  std::vector<Real> col(g.k() * np);
  im2col(g, input.data().data(), col.data());

  // Every output starts from its bias, then accumulates (ci, ky, kx) in
  // lexicographic order; the nested-loop reference sums in the same order.
  std::vector<Real> out(g.c_out * np);
  const Real* b = bias.data().data();
  for (std::size_t co = 0; co < g.c_out; ++co) std::fill(out.begin() + co * np, out.begin() + (co + 1) * np, b[co]);
  matmul_accumulate(weight.data().data(), col.data(), out.data(), g.c_out, g.k(), np);

  return Tensor::make_result(
      Shape{g.c_out, g.oh, g.ow}, std::move(out), {input, weight, bias},
      [g, col = std::move(col)](detail::Node& self) {
        detail::Node& pin = *self.parents[0];
        detail::Node& pw = *self.parents[1];
        detail::Node& pb = *self.parents[2];
        const std::size_t np = g.p();
        const Real* gout = self.grad.data();
        if (pb.requires_grad) {
          for (std::size_t co = 0; co < g.c_out; ++co) {
            Real acc = 0;
            for (std::size_t i = 0; i < np; ++i) acc += gout[co * np + i];
            pb.grad[co] += acc;
          }
        }
        if (pw.requires_grad) {
          // dW (C_out×K) += gout (C_out×P) · colᵀ (P×K)
          matmul_abt_accumulate(gout, col.data(), pw.grad.data(), g.c_out, g.k(), np);
        }
        if (pin.requires_grad) {
          // dcol (K×P) = Wᵀ (K×C_out) · gout (C_out×P)
          const std::vector<Real> w_t = transpose(pw.data.data(), g.c_out, g.k());
          std::vector<Real> dcol(g.k() * np, Real{0});
          matmul_accumulate(w_t.data(), gout, dcol.data(), g.k(), g.c_out, np);
          col2im_add(g, dcol.data(), pin.grad.data());
        }
      });
}

Tensor softmax_channels(const Tensor& logits) {
  require_rank(logits, 3, "softmax_channels", "logits");
  const std::size_t n = logits.dim(0);
  if (n == 0) throw std::invalid_argument("softmax_channels: need at least one channel");
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  const Real* in = logits.data().data();
  std::vector<Real> out(logits.numel());
  for (std::size_t p = 0; p < plane; ++p) {
    Real mx = in[p];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, in[c * plane + p]);
    Real total = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const Real e = std::exp(in[c * plane + p] - mx);
      out[c * plane + p] = e;
      total += e;
    }
    for (std::size_t c = 0; c < n; ++c) out[c * plane + p] /= total;
  }
  return Tensor::make_result(logits.shape(), std::move(out), {logits}, [n, plane](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    const Real* y = self.data.data();
    const Real* gy = self.grad.data();
    for (std::size_t px = 0; px < plane; ++px) {
      Real dot = 0;
      for (std::size_t c = 0; c < n; ++c) dot += y[c * plane + px] * gy[c * plane + px];
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t i = c * plane + px;
        p.grad[i] += y[i] * (gy[i] - dot);
      }
    }
  });
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<Real> frac;
};

AxisTaps bilinear_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const Real scale = static_cast<Real>(in) / static_cast<Real>(out);
  for (std::size_t d = 0; d < out; ++d) {
    Real src = scale * (static_cast<Real>(d) + Real{0.5}) - Real{0.5};
    if (src < 0) src = 0;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    t.lo[d] = i0;
    t.hi[d] = i0 + (i0 < in - 1 ? 1 : 0);
    t.frac[d] = src - static_cast<Real>(i0);
  }
  return t;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_upsample", "input");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == 0 || w == 0) throw std::invalid_argument("bilinear_upsample: empty input");
  if (out_h < h || out_w < w) {
    throw std::invalid_argument("bilinear_upsample: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                " smaller than source " + std::to_string(h) + "x" + std::to_string(w));
  }
  AxisTaps ty = bilinear_taps(h, out_h);
  AxisTaps tx = bilinear_taps(w, out_w);
  const Real* in = x.data().data();
  std::vector<Real> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Real* pl = in + ch * h * w;
    Real* o = out.data() + ch * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Real ly = ty.frac[oy];
      const Real* r0 = pl + ty.lo[oy] * w;
      const Real* r1 = pl + ty.hi[oy] * w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Real lx = tx.frac[ox];
        const Real top = (1 - lx) * r0[tx.lo[ox]] + lx * r0[tx.hi[ox]];
        const Real bot = (1 - lx) * r1[tx.lo[ox]] + lx * r1[tx.hi[ox]];
        o[oy * out_w + ox] = (1 - ly) * top + ly * bot;
      }
    }
  }
  return Tensor::make_result(Shape{c, out_h, out_w}, std::move(out), {x},
                             [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](detail::Node& self) {
                               detail::Node& p = *self.parents[0];
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                 Real* gp = p.grad.data() + ch * h * w;
                                 const Real* go = self.grad.data() + ch * out_h * out_w;
                                 for (std::size_t oy = 0; oy < out_h; ++oy) {
                                   const Real ly = ty.frac[oy];
                                   Real* r0 = gp + ty.lo[oy] * w;
                                   Real* r1 = gp + ty.hi[oy] * w;
                                   for (std::size_t ox = 0; ox < out_w; ++ox) {
                                     const Real lx = tx.frac[ox];
                                     const Real g = go[oy * out_w + ox];
                                     r0[tx.lo[ox]] += (1 - ly) * (1 - lx) * g;
                                     r0[tx.hi[ox]] += (1 - ly) * lx * g;
                                     r1[tx.lo[ox]] += ly * (1 - lx) * g;
                                     r1[tx.hi[ox]] += ly * lx * g;
                                   }
                                 }
                               }
                             });
}

Tensor select_mean(const Tensor& x, std::span<const std::uint8_t> labels, std::uint8_t ignore_index) {
  require_rank(x, 3, "select_mean", "input");
  const std::size_t n = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2);
  if (labels.size() != plane) {
    throw std::invalid_argument("select_mean: label map has " + std::to_string(labels.size()) + " pixels, expected " +
                                std::to_string(plane));
  }
  const Real* in = x.data().data();
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  std::size_t count = 0;
  Real total = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (lab[p] == ignore_index) continue;
    if (lab[p] >= n) {
      throw std::invalid_argument("select_mean: label " + std::to_string(lab[p]) + " out of range for " +
                                  std::to_string(n) + " classes");
    }
    total += in[lab[p] * plane + p];
    ++count;
  }
  const Real value = count ? total / static_cast<Real>(count) : Real{0};
  return Tensor::make_result(Shape{1}, {value}, {x},
                             [lab = std::move(lab), plane, count, ignore_index](detail::Node& self) {
                               if (count == 0) return;
                               detail::Node& p = *self.parents[0];
                               const Real g = self.grad[0] / static_cast<Real>(count);
                               for (std::size_t px = 0; px < plane; ++px) {
                                 if (lab[px] != ignore_index) p.grad[lab[px] * plane + px] += g;
                               }
                             });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps, const BatchNormStats* fixed,
                  BatchNormStats* batch_stats, std::vector<Real>* pre_affine) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw std::invalid_argument("batch_norm: expected C×H×W or B×C×H×W input, got " + shape_to_string(x.shape()));
  }
  const bool batched = x.rank() == 4;
  const std::size_t nb = batched ? x.dim(0) : 1;
  const std::size_t c = x.dim(batched ? 1 : 0);
  const std::size_t spatial = x.dim(batched ? 2 : 1) * x.dim(batched ? 3 : 2);
  if (spatial == 0 || nb == 0) throw std::invalid_argument("batch_norm: zero spatial extent");
  if (gamma.numel() != c || beta.numel() != c) {
    throw std::invalid_argument("batch_norm: affine parameters have " + std::to_string(gamma.numel()) +
                                " channels, input has " + std::to_string(c));
  }
  const std::size_t m = nb * spatial;
  const Real* in = x.data().data();
  auto offset = [c, spatial](std::size_t b, std::size_t ch) { return (b * c + ch) * spatial; };

  std::vector<Real> mean(c), var(c);
  if (fixed) {
    if (fixed->mean.size() != c || fixed->var.size() != c) {
      throw std::invalid_argument("batch_norm: running statistics length mismatch");
    }
    mean = fixed->mean;
    var = fixed->var;
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      // Shifted by the first sample so a constant channel yields its value exactly.
      const Real shift = in[offset(0, ch)];
      Real acc = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        const Real* src = in + offset(b, ch);
        for (std::size_t s = 0; s < spatial; ++s) acc += src[s] - shift;
      }
      mean[ch] = shift + acc / static_cast<Real>(m);
      Real sq = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        const Real* src = in + offset(b, ch);
        for (std::size_t s = 0; s < spatial; ++s) {
          const Real d = src[s] - mean[ch];
          sq += d * d;
        }
      }
      var[ch] = sq / static_cast<Real>(m);
    }
    if (batch_stats) *batch_stats = BatchNormStats{mean, var};
  }

  std::vector<Real> invstd(c);
  for (std::size_t ch = 0; ch < c; ++ch) invstd[ch] = Real{1} / std::sqrt(var[ch] + eps);

  const Real* gm = gamma.data().data();
  const Real* bt = beta.data().data();
  std::vector<Real> xhat(x.numel());
  std::vector<Real> out(x.numel());
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = offset(b, ch);
      for (std::size_t s = 0; s < spatial; ++s) {
        const Real h = (in[off + s] - mean[ch]) * invstd[ch];
        xhat[off + s] = h;
        out[off + s] = gm[ch] * h + bt[ch];
      }
    }
  }
  if (pre_affine) *pre_affine = xhat;

  const bool use_batch = fixed == nullptr;
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [nb, c, spatial, m, use_batch, xhat = std::move(xhat), invstd = std::move(invstd)](detail::Node& self) {
        detail::Node& px = *self.parents[0];
        detail::Node& pg = *self.parents[1];
        detail::Node& pb = *self.parents[2];
        const Real* gy = self.grad.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          Real sum_g = 0, sum_gx = 0;
          for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t off = (b * c + ch) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
              sum_g += gy[off + s];
              sum_gx += gy[off + s] * xhat[off + s];
            }
          }
          if (pg.requires_grad) pg.grad[ch] += sum_gx;
          if (pb.requires_grad) pb.grad[ch] += sum_g;
          if (!px.requires_grad) continue;
          const Real gmv = pg.data[ch];
          const Real k = gmv * invstd[ch];
          for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t off = (b * c + ch) * spatial;
            if (use_batch) {
              const Real mr = static_cast<Real>(m);
              for (std::size_t s = 0; s < spatial; ++s) {
                px.grad[off + s] += k / mr * (mr * gy[off + s] - sum_g - xhat[off + s] * sum_gx);
              }
            } else {
              for (std::size_t s = 0; s < spatial; ++s) px.grad[off + s] += k * gy[off + s];
            }
          }
        }
      });
}

}  // namespace seatlab
