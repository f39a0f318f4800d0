#pragma once

#include <Eigen/Core>

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "coverid/error.hpp"

namespace coverid::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major tensor. The leading dimension is the batch axis wherever a
// batch is involved; slice(n) views one sample.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector<Scalar>::Zero(element_count(shape_))) {}
  Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                " does not fit shape " + to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  // Elements per leading-axis entry.
  Index slice_size() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }
  Eigen::Map<Vector<Scalar>> slice(Index n) {
    return Eigen::Map<Vector<Scalar>>(data_.data() + n * slice_size(), slice_size());
  }
  Eigen::Map<const Vector<Scalar>> slice(Index n) const {
    return Eigen::Map<const Vector<Scalar>>(data_.data() + n * slice_size(), slice_size());
  }

  // Same data, new shape with the same element count.
  void reshape(Shape shape) {
    if (element_count(shape) != size()) {
      throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
  }

  void set_zero() { data_.setZero(); }
  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Shape shape_;
  Vector<Scalar> data_;
};

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has shape " + to_string(t.shape()) +
                                              ", expected " + to_string(expected));
  }
}

}  // namespace coverid::nn
