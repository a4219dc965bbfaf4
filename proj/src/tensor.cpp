#include "depthgen/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace depthgen {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape_) + " does not match data size " +
                                std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(const Shape& shape) { return Tensor(shape); }

Tensor Tensor::ones(const Shape& shape) { return full(shape, 1.0); }

Tensor Tensor::full(const Shape& shape, double v) {
  Tensor t(shape);
  for (double& x : t.data_) x = v;
  return t;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return data_[ravel_index(shape_, std::vector<std::size_t>(idx))];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[ravel_index(shape_, std::vector<std::size_t>(idx))];
}

std::size_t Tensor::dim(int a) const { return shape_[normalize_axis(a, shape_.size())]; }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(data_.size()) + " elements");
  }
  return data_[0];
}

std::size_t ravel_index(const Shape& shape, const std::vector<std::size_t>& idx) {
  if (idx.size() != shape.size()) throw std::invalid_argument("ravel_index: rank mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (idx[i] >= shape[i]) throw std::out_of_range("ravel_index: index out of range");
    off = off * shape[i] + idx[i];
  }
  return off;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
  return s;
}

int normalize_axis(int axis, std::size_t ndim) {
  int n = static_cast<int>(ndim);
  if (axis < -n || axis >= n) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(n));
  }
  return axis < 0 ? axis + n : axis;
}

}  // namespace depthgen
