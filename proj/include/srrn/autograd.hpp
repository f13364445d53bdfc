#pragma once

// Minimal reverse-mode autodiff over NCHW double tensors: just the operations
// the reflection-removal network needs.

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace srrn::ag {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Cache-line aligned storage, so vectorized kernels take the same path every run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }

  /// Elementwise this += other (same shape).
  void accumulate(const Tensor& other);
  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  Buffer data_;
};

struct Node;
using Var = std::shared_ptr<Node>;

/// A value in the computation graph. Leaves created by `leaf` persist across
/// steps (parameters); interior nodes own their inputs until released.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> inputs;
  std::function<void(Node&)> backward;

  /// Lazily allocated gradient buffer matching the value's shape.
  Tensor& grad_buffer();
};

Var leaf(Tensor value, bool requires_grad = false);
inline Var constant(Tensor value) { return leaf(std::move(value), false); }

/// While alive, operations record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Seeds d(objective)/d(root) for each root and propagates to every leaf that
/// requires a gradient. Gradients accumulate into Node::grad.
void backward(std::span<const std::pair<Var, Tensor>> seeds);

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// Cross-correlation. weight: [out, in, k, k]; bias: [1, out, 1, 1] or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options = {});
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var concat_channels(const std::vector<Var>& parts);
/// Bilinear resampling with half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& x, int height, int width);
/// Mean over non-overlapping factor x factor blocks.
Var avg_pool(const Var& x, int factor);
Var global_avg_pool(const Var& x);
/// Repeats a [n, c, 1, 1] tensor over height x width.
Var broadcast_spatial(const Var& x, int height, int width);
/// Softmax across channels at every pixel.
Var softmax_channels(const Var& x);
/// Channels [begin, end) of x.
Var slice_channels(const Var& x, int begin, int end);

}  // namespace srrn::ag
