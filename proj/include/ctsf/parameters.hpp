#pragma once

#include <string>
#include <vector>

#include "ctsf/tensor.hpp"

namespace ctsf {

/// A named tensor stored as a contiguous slice of a flat parameter vector.
struct ParameterSlot {
  std::string name;
  Shape shape;
  Index offset = 0;
  Index size = 0;

  Index rows() const { return shape.front(); }
  Index cols() const { return size / shape.front(); }
};

/// Ordered set of named slices. Models keep every trainable value in one
/// Eigen vector so optimizers, gradient checks and checkpoints all operate
/// on the same flat storage.
class ParameterLayout {
 public:
  Index add(std::string name, Shape shape) {
    Index size = 1;
    for (Index e : shape) size *= e;
    slots_.push_back({std::move(name), std::move(shape), total_, size});
    total_ += size;
    return static_cast<Index>(slots_.size()) - 1;
  }

  const std::vector<ParameterSlot>& slots() const { return slots_; }
  const ParameterSlot& slot(Index i) const { return slots_.at(static_cast<std::size_t>(i)); }
  Index total_size() const { return total_; }

  Index find(const std::string& name) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].name == name) return static_cast<Index>(i);
    return -1;
  }

  // Name of the slot owning flat element `index`.
  const std::string& owner(Index index) const {
    for (const auto& s : slots_)
      if (index >= s.offset && index < s.offset + s.size) return s.name;
    throw DimensionError("parameter index out of range");
  }

 private:
  std::vector<ParameterSlot> slots_;
  Index total_ = 0;
};

template <typename Scalar>
ConstMatrixMap<Scalar> matrix_view(const Vector<Scalar>& flat, const ParameterSlot& s) {
  return {flat.data() + s.offset, s.rows(), s.cols()};
}
template <typename Scalar>
MatrixMap<Scalar> matrix_view(Vector<Scalar>& flat, const ParameterSlot& s) {
  return {flat.data() + s.offset, s.rows(), s.cols()};
}
template <typename Scalar>
ConstVectorMap<Scalar> vector_view(const Vector<Scalar>& flat, const ParameterSlot& s) {
  return {flat.data() + s.offset, s.size};
}
template <typename Scalar>
VectorMap<Scalar> vector_view(Vector<Scalar>& flat, const ParameterSlot& s) {
  return {flat.data() + s.offset, s.size};
}

}  // namespace ctsf
