// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "earthmapper/common/error.hpp"

namespace emap::num {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Eigen picks its vectorized summation order from the runtime address of a
// buffer, so storage is pinned to 64 bytes to keep results reproducible
// across allocations.
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
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using Storage = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor. A rank-0 tensor (empty shape) holds one value.
template <class T>
struct Tensor {
  Shape shape;
  Storage<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), fill) {}
  Tensor(Shape s, const std::vector<T>& values) : Tensor(std::move(s), Storage<T>(values.begin(), values.end())) {}
  Tensor(Shape s, Storage<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
      throw ShapeError("Tensor: " + std::to_string(data.size()) + " values do not fill shape " + to_string(shape));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int axis) const { return shape.at(axis < 0 ? axis + rank() : axis); }
  T item() const {
    if (data.size() != 1) throw ShapeError("Tensor::item on shape " + to_string(shape));
    return data[0];
  }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape, Storage<U>(data.begin(), data.end()));
  }
};

}  // namespace emap::num
