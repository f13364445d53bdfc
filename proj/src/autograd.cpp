#include "srrn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <Eigen/Core>
#include <fmt/format.h>

#include "srrn/error.hpp"

namespace srrn::ag {
namespace {

thread_local bool g_grad_enabled = true;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Var& v) {
                       return v && v->requires_grad;
                     });
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return node;
}

bool wants_grad(const Var& v) { return v && v->requires_grad; }

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::dimension_mismatch, message);
}

// 1-d bilinear sampling table with half-pixel centers.
struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double src = std::max(0.0, (i + 0.5) * scale - 0.5);
    const int lo = std::min(static_cast<int>(src), in - 1);
    const auto iu = static_cast<std::size_t>(i);
    t.lo[iu] = lo;
    t.hi[iu] = std::min(lo + 1, in - 1);
    t.frac[iu] = src - lo;
  }
  return t;
}

struct ConvGeometry {
  int n, ci, h, w, co, k, ho, wo, stride, pad, dil;

  int patch() const { return ci * k * k; }
  int pixels() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* x, const ConvGeometry& g, double* cols) {
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          double* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* x) {
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.pixels();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.wo;
          double* dst = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::string to_string(const Shape& s) { return fmt::format("[{}, {}, {}, {}]", s.n, s.c, s.h, s.w); }

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(data.begin(), data.end()) {
  if (data_.size() != shape_.size()) {
    fail(ErrorCode::dimension_mismatch, fmt::format("tensor data of {} values for shape {}", data_.size(),
                                                    to_string(shape_)));
  }
}

void Tensor::accumulate(const Tensor& other) {
  require(other.shape_ == shape_, "accumulate shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape() || grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

void backward(std::span<const std::pair<Var, Tensor>> seeds) {
  // Iterative post-order DFS: parents are ordered after all of their inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  for (const auto& [root, seed] : seeds) {
    if (!wants_grad(root)) continue;
    require(seed.shape() == root->value.shape(), "backward seed shape mismatch");
    root->grad_buffer().accumulate(seed);
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    if (!visited.insert(root.get()).second) continue;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].get();
        if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options) {
  const Shape& xs = x->value.shape();
  const Shape& ws = weight->value.shape();
  require(ws.h == ws.w, "conv2d needs square kernels");
  require(ws.c == xs.c, fmt::format("conv2d input has {} channels, weight expects {}", xs.c, ws.c));
  ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, 0, 0, options.stride, options.padding, options.dilation};
  g.ho = (g.h + 2 * g.pad - g.dil * (g.k - 1) - 1) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.dil * (g.k - 1) - 1) / g.stride + 1;
  require(g.ho >= 1 && g.wo >= 1, "conv2d output would be empty");
  if (bias) require(bias->value.size() == static_cast<std::size_t>(g.co), "conv2d bias size mismatch");

  Tensor out(Shape{g.n, g.co, g.ho, g.wo});
  const ConstMatrixMap wm(weight->value.ptr(), g.co, g.patch());
  Buffer cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.patch()) * g.pixels());
  for (int n = 0; n < g.n; ++n) {
    const double* xn = x->value.ptr() + static_cast<std::size_t>(n) * g.ci * g.h * g.w;
    const double* colp = xn;
    if (!g.pointwise()) {
      im2col(xn, g, cols.data());
      colp = cols.data();
    }
    MatrixMap on(out.ptr() + static_cast<std::size_t>(n) * g.co * g.pixels(), g.co, g.pixels());
    on.noalias() = wm * ConstMatrixMap(colp, g.patch(), g.pixels());
    if (bias) {
      for (int o = 0; o < g.co; ++o) on.row(o).array() += bias->value[static_cast<std::size_t>(o)];
    }
  }

  return make_node(std::move(out), {x, weight, bias}, [g](Node& self) {
    const Var& x = self.inputs[0];
    const Var& weight = self.inputs[1];
    const Var& bias = self.inputs[2];
    const ConstMatrixMap wm(weight->value.ptr(), g.co, g.patch());
    Buffer cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.patch()) * g.pixels());
    RowMatrix dcols;
    for (int n = 0; n < g.n; ++n) {
      const ConstMatrixMap dout(self.grad.ptr() + static_cast<std::size_t>(n) * g.co * g.pixels(), g.co,
                                g.pixels());
      const double* xn = x->value.ptr() + static_cast<std::size_t>(n) * g.ci * g.h * g.w;
      if (wants_grad(weight)) {
        const double* colp = xn;
        if (!g.pointwise()) {
          im2col(xn, g, cols.data());
          colp = cols.data();
        }
        MatrixMap dw(weight->grad_buffer().ptr(), g.co, g.patch());
        dw.noalias() += dout * ConstMatrixMap(colp, g.patch(), g.pixels()).transpose();
      }
      if (wants_grad(bias)) {
        Tensor& db = bias->grad_buffer();
        for (int o = 0; o < g.co; ++o) db[static_cast<std::size_t>(o)] += dout.row(o).sum();
      }
      if (wants_grad(x)) {
        double* dx = x->grad_buffer().ptr() + static_cast<std::size_t>(n) * g.ci * g.h * g.w;
        if (g.pointwise()) {
          MatrixMap(dx, g.ci, g.pixels()).noalias() += wm.transpose() * dout;
        } else {
          dcols.noalias() = wm.transpose() * dout;
          col2im(dcols.data(), g, dx);
        }
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    const auto y = self.value.data();
    const auto g = self.grad.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    const auto y = self.value.data();
    const auto g = self.grad.data();
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var add(const Var& a, const Var& b) {
  require(a->value.shape() == b->value.shape(),
          fmt::format("add shape mismatch {} vs {}", to_string(a->value.shape()), to_string(b->value.shape())));
  Tensor out = a->value;
  out.accumulate(b->value);
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (const Var& in : self.inputs) {
      if (wants_grad(in)) in->grad_buffer().accumulate(self.grad);
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  const Shape first = parts.front()->value.shape();
  int channels = 0;
  for (const Var& p : parts) {
    const Shape& s = p->value.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w,
            fmt::format("concat spatial mismatch {} vs {}", to_string(s), to_string(first)));
    channels += s.c;
  }
  Tensor out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  for (int n = 0; n < first.n; ++n) {
    double* dst = out.ptr() + static_cast<std::size_t>(n) * channels * plane;
    for (const Var& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p->value.shape().c) * plane;
      const double* src = p->value.ptr() + static_cast<std::size_t>(n) * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  return make_node(std::move(out), parts, [channels, plane, first](Node& self) {
    for (int n = 0; n < first.n; ++n) {
      const double* src = self.grad.ptr() + static_cast<std::size_t>(n) * channels * plane;
      for (const Var& p : self.inputs) {
        const std::size_t len = static_cast<std::size_t>(p->value.shape().c) * plane;
        if (wants_grad(p)) {
          double* dst = p->grad_buffer().ptr() + static_cast<std::size_t>(n) * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        src += len;
      }
    }
  });
}

Var slice_channels(const Var& x, int begin, int end) {
  const Shape s = x->value.shape();
  require(begin >= 0 && begin < end && end <= s.c, "channel slice out of range");
  const int c = end - begin;
  Tensor out(Shape{s.n, c, s.h, s.w});
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    const double* src = x->value.ptr() + (static_cast<std::size_t>(n) * s.c + begin) * plane;
    std::copy(src, src + c * plane, out.ptr() + static_cast<std::size_t>(n) * c * plane);
  }
  return make_node(std::move(out), {x}, [s, begin, c, plane](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      const double* src = self.grad.ptr() + static_cast<std::size_t>(n) * c * plane;
      double* dst = dx.ptr() + (static_cast<std::size_t>(n) * s.c + begin) * plane;
      for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
    }
  });
}

Var resize_bilinear(const Var& x, int height, int width) {
  const Shape s = x->value.shape();
  if (s.h == height && s.w == width) return x;
  const AxisTaps ty = axis_taps(s.h, height), tx = axis_taps(s.w, width);
  Tensor out(Shape{s.n, s.c, height, width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < height; ++y) {
        const auto yu = static_cast<std::size_t>(y);
        const double fy = ty.frac[yu];
        for (int xo = 0; xo < width; ++xo) {
          const auto xu = static_cast<std::size_t>(xo);
          const double fx = tx.frac[xu];
          const double top = (1 - fx) * x->value.at(n, c, ty.lo[yu], tx.lo[xu]) + fx * x->value.at(n, c, ty.lo[yu], tx.hi[xu]);
          const double bot = (1 - fx) * x->value.at(n, c, ty.hi[yu], tx.lo[xu]) + fx * x->value.at(n, c, ty.hi[yu], tx.hi[xu]);
          out.at(n, c, y, xo) = (1 - fy) * top + fy * bot;
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [s, ty, tx, height, width](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < height; ++y) {
          const auto yu = static_cast<std::size_t>(y);
          const double fy = ty.frac[yu];
          for (int xo = 0; xo < width; ++xo) {
            const auto xu = static_cast<std::size_t>(xo);
            const double fx = tx.frac[xu];
            const double g = self.grad.at(n, c, y, xo);
            dx.at(n, c, ty.lo[yu], tx.lo[xu]) += g * (1 - fy) * (1 - fx);
            dx.at(n, c, ty.lo[yu], tx.hi[xu]) += g * (1 - fy) * fx;
            dx.at(n, c, ty.hi[yu], tx.lo[xu]) += g * fy * (1 - fx);
            dx.at(n, c, ty.hi[yu], tx.hi[xu]) += g * fy * fx;
          }
        }
      }
    }
  });
}

Var avg_pool(const Var& x, int factor) {
  const Shape s = x->value.shape();
  if (factor == 1) return x;
  require(factor > 1 && s.h % factor == 0 && s.w % factor == 0,
          fmt::format("avg_pool factor {} does not divide {}", factor, to_string(s)));
  const int h = s.h / factor, w = s.w / factor;
  const double inv = 1.0 / (factor * factor);
  Tensor out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int xi = 0; xi < s.w; ++xi) out.at(n, c, y / factor, xi / factor) += inv * x->value.at(n, c, y, xi);
      }
    }
  }
  return make_node(std::move(out), {x}, [s, factor, inv](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y) {
          for (int xi = 0; xi < s.w; ++xi) dx.at(n, c, y, xi) += inv * self.grad.at(n, c, y / factor, xi / factor);
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x->value.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor out(Shape{s.n, s.c, 1, 1});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const double* src = x->value.ptr() + nc * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += src[i];
    out[nc] = sum / static_cast<double>(plane);
  }
  return make_node(std::move(out), {x}, [s, plane](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      const double g = self.grad[nc] / static_cast<double>(plane);
      double* dst = dx.ptr() + nc * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += g;
    }
  });
}

Var broadcast_spatial(const Var& x, int height, int width) {
  const Shape s = x->value.shape();
  require(s.h == 1 && s.w == 1, "broadcast_spatial needs a [n, c, 1, 1] input");
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor out(Shape{s.n, s.c, height, width});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    std::fill(out.ptr() + nc * plane, out.ptr() + (nc + 1) * plane, x->value[nc]);
  }
  return make_node(std::move(out), {x}, [s, plane](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      const double* src = self.grad.ptr() + nc * plane;
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += src[i];
      dx[nc] += sum;
    }
  });
}

Var softmax_channels(const Var& x) {
  const Shape s = x->value.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    const double* z = x->value.ptr() + static_cast<std::size_t>(n) * s.c * plane;
    double* p = out.ptr() + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      double peak = z[i];
      for (int k = 1; k < s.c; ++k) peak = std::max(peak, z[k * plane + i]);
      double total = 0.0;
      for (int k = 0; k < s.c; ++k) {
        p[k * plane + i] = std::exp(z[k * plane + i] - peak);
        total += p[k * plane + i];
      }
      for (int k = 0; k < s.c; ++k) p[k * plane + i] /= total;
    }
  }
  return make_node(std::move(out), {x}, [s, plane](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * s.c * plane;
      const double* p = self.value.ptr() + base;
      const double* g = self.grad.ptr() + base;
      double* d = dx.ptr() + base;
      for (std::size_t i = 0; i < plane; ++i) {
        double dot = 0.0;
        for (int k = 0; k < s.c; ++k) dot += g[k * plane + i] * p[k * plane + i];
        for (int k = 0; k < s.c; ++k) d[k * plane + i] += p[k * plane + i] * (g[k * plane + i] - dot);
      }
    }
  });
}

}  // namespace srrn::ag
