#include "cssl/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cssl/error.hpp"

namespace cssl {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("Tensor: zero dimension in shape " + shape_str(shape));
  }
  if (values.size() != shape_size(shape)) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  }
}

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor scalar_tensor(double v) { return Tensor({}, {v}); }

Tensor vec_tensor(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor matrix_tensor(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

Tensor zeros(const Shape& shape) {
  return Tensor(shape, std::vector<double>(shape_size(shape), 0.0));
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

double tensor_norm(const Tensor& t) { return vec_norm(t.values); }

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("vec_dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double vec_dist2(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("vec_dist2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace cssl
