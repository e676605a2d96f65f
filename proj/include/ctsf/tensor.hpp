#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "ctsf/errors.hpp"

namespace ctsf {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;
template <typename Scalar>
using VectorMap = Eigen::Map<Vector<Scalar>>;
template <typename Scalar>
using ConstVectorMap = Eigen::Map<const Vector<Scalar>>;

// Non-deduced argument types: the scalar is deduced from the layer argument and
// any Eigen expression or map converts to these.
template <typename Scalar>
using MatrixArg = std::type_identity_t<Eigen::Ref<const RowMatrix<Scalar>>>;
template <typename Scalar>
using VectorArg = std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>;

using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& values) {
  return values.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& values, const char* operation) {
  if (!all_finite(values)) throw NumericError(std::string("non-finite value produced by ") + operation);
}

/// Dense row-major array of rank 1 to 3.
///
/// Storage is a flat Eigen vector; rank-2 views are exposed as row-major maps
/// so layer code can use Eigen expressions directly. Rank-3 tensors view as
/// (extent0 * extent1) x extent2.
template <typename Scalar>
class BasicTensor {
 public:
  BasicTensor() : shape_{0}, data_() {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_ = Vector<Scalar>::Zero(element_count(shape_));
  }

  BasicTensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != element_count(shape_))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(shape_));
    require_finite(data_, "tensor construction");
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Vector<Scalar>(Eigen::Map<const Vector<Scalar>>(
                                          values.begin(), static_cast<Index>(values.size())))) {}

  static BasicTensor from_matrix(const Eigen::Ref<const RowMatrix<Scalar>>& m) {
    Vector<Scalar> flat(m.size());
    MatrixMap<Scalar>(flat.data(), m.rows(), m.cols()) = m;
    return BasicTensor({m.rows(), m.cols()}, std::move(flat));
  }

  static BasicTensor from_vector(const Eigen::Ref<const Vector<Scalar>>& v) {
    return BasicTensor({v.size()}, Vector<Scalar>(v));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  const Vector<Scalar>& flat() const { return data_; }
  Vector<Scalar>& flat() { return data_; }

  Scalar operator()(Index i) const { return data_(i); }
  Scalar operator()(Index r, Index c) const { return data_(r * inner_extent() + c); }
  Scalar operator()(Index a, Index b, Index c) const { return data_((a * shape_[1] + b) * shape_[2] + c); }

  ConstMatrixMap<Scalar> matrix() const { return {data_.data(), outer_extent(), inner_extent()}; }
  MatrixMap<Scalar> matrix() { return {data_.data(), outer_extent(), inner_extent()}; }

  bool is_finite() const { return all_finite(data_); }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 3) throw DimensionError("tensor rank must be 1..3, got " + shape_string(shape));
    for (Index e : shape)
      if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  static Index element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  }
  Index inner_extent() const { return shape_.back(); }
  Index outer_extent() const { return shape_.size() == 1 ? 1 : data_.size() / shape_.back(); }

  Shape shape_;
  Vector<Scalar> data_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  RowMatrix<Scalar> product = a.matrix() * b.matrix();
  require_finite(product, "matmul");
  return BasicTensor<Scalar>::from_matrix(product);
}

enum class Elementwise { add, sub, mul, sigmoid, tanh, scale };

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

namespace detail {
template <typename Scalar>
BasicTensor<Scalar> finish(const Shape& shape, Vector<Scalar> values, const char* op) {
  require_finite(values, op);
  return BasicTensor<Scalar>(shape, std::move(values));
}
}  // namespace detail

template <typename Scalar>
BasicTensor<Scalar> elementwise(Elementwise op, const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  switch (op) {
    case Elementwise::add: return detail::finish<Scalar>(a.shape(), a.flat() + b.flat(), "add");
    case Elementwise::sub: return detail::finish<Scalar>(a.shape(), a.flat() - b.flat(), "sub");
    case Elementwise::mul: return detail::finish<Scalar>(a.shape(), a.flat().cwiseProduct(b.flat()), "mul");
    default: throw UsageError("elementwise: operation is not binary");
  }
}

template <typename Scalar>
BasicTensor<Scalar> elementwise(Elementwise op, const BasicTensor<Scalar>& a) {
  switch (op) {
    case Elementwise::sigmoid:
      return detail::finish<Scalar>(a.shape(), a.flat().unaryExpr([](Scalar x) { return sigmoid(x); }), "sigmoid");
    case Elementwise::tanh: return detail::finish<Scalar>(a.shape(), a.flat().array().tanh().matrix(), "tanh");
    default: throw UsageError("elementwise: operation is not unary");
  }
}

template <typename Scalar>
BasicTensor<Scalar> elementwise(Elementwise op, const BasicTensor<Scalar>& a, Scalar factor) {
  if (op != Elementwise::scale) throw UsageError("elementwise: only scale takes a scalar operand");
  return detail::finish<Scalar>(a.shape(), a.flat() * factor, "scale");
}

/// Row-major flattening of each tensor, concatenated in order.
template <typename Scalar>
BasicTensor<Scalar> concat_flatten(const std::vector<BasicTensor<Scalar>>& cubes) {
  if (cubes.empty()) throw UsageError("concat_flatten: empty input list");
  Index total = 0;
  for (const auto& c : cubes) total += c.size();
  Vector<Scalar> out(total);
  Index offset = 0;
  for (const auto& c : cubes) {
    out.segment(offset, c.size()) = c.flat();
    offset += c.size();
  }
  return BasicTensor<Scalar>({total}, std::move(out));
}

}  // namespace ctsf
