#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ncp {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Rows gathered in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// out += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> out);

double mean(std::span<const double> values);
/// Population standard deviation.
double stddev(std::span<const double> values);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
  AdamHyper hyper;

  static AdamState zeros(std::size_t size, AdamHyper hyper = {});
};

/// One bias-corrected Adam update applied to `params` in place.
///
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,  t <- t + 1
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
///
/// Throws InvalidArgument when params, grads and state sizes disagree.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
/// Throws InvalidArgument for h <= 0 and NumericalError if f is non-finite at a probe.
Vector finite_diff_grad(const ScalarFunction& f, std::span<const double> params, double h);

}  // namespace ncp
