#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace autov {

// Dense row-major matrix. Empty (0x0) only when default constructed;
// every other instance has rows >= 1 and cols >= 1.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0});
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::string shape_string() const;
  bool all_finite() const;
  void fill(T value);

  template <typename U>
  Matrix<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Matrix<U>(rows_, cols_, std::move(out));
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using TokenMatrix = Matrix<float>;
using MatrixD = Matrix<double>;

// All reductions accumulate in double regardless of T.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
// a * b^T
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);
// a^T * b
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> transpose(const Matrix<T>& m);

template <typename T>
Matrix<T> row_softmax(const Matrix<T>& m);

template <typename T>
std::vector<T> mean_pool(const Matrix<T>& m);

template <typename T>
double cosine_distance(std::span<const T> u, std::span<const T> v);

// Adds a 1 x cols row vector to every row.
template <typename T>
void add_row_broadcast(Matrix<T>& m, const Matrix<T>& bias);

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return m.all_finite();
}

enum class Activation { relu, tanh, identity };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

template <typename T>
Matrix<T> apply_activation(const Matrix<T>& pre, Activation a);
// Elementwise derivative evaluated at the pre-activation values.
template <typename T>
Matrix<T> activation_derivative(const Matrix<T>& pre, Activation a);

}  // namespace autov
