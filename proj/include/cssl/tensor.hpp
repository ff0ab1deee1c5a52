#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cssl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit tensor. Rank 0 is a scalar (shape {}, one value), rank 1 a
// vector, rank 2 a matrix. values are stored flat, row-major.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }

  double& at(std::size_t i) { return values[i]; }
  double at(std::size_t i) const { return values[i]; }
  double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

  bool all_finite() const;
};

Tensor scalar_tensor(double v);
Tensor vec_tensor(std::vector<double> v);
Tensor matrix_tensor(std::size_t rows, std::size_t cols, std::vector<double> v);
Tensor zeros(const Shape& shape);

bool same_shape(const Tensor& a, const Tensor& b);

// Euclidean norm over the flat values, summed left to right.
double tensor_norm(const Tensor& t);
double vec_norm(const std::vector<double>& v);
double vec_dot(const std::vector<double>& a, const std::vector<double>& b);
double vec_dist2(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cssl
