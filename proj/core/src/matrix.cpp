#include "autov/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "autov/error.hpp"

namespace autov {

namespace {

void require_nonempty(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

template <typename T>
std::string shapes(const Matrix<T>& a, const Matrix<T>& b) {
  return a.shape_string() + " and " + b.shape_string();
}

}  // namespace

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, T fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require_nonempty(rows, cols);
}

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_nonempty(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix " + shape_string() + " needs " + std::to_string(rows * cols) +
                     " values, got " + std::to_string(data_.size()));
  }
}

template <typename T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  require_nonempty(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
std::string Matrix<T>::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

template <typename T>
bool Matrix<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void Matrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul shape mismatch: " + shapes(a, b));
  Matrix<T> out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const T* brow = &b(k, 0);
      for (std::size_t j = 0; j < b.cols(); ++j) acc[j] += aik * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = static_cast<T>(acc[j]);
  }
  return out;
}

template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt shape mismatch: " + shapes(a, b));
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* arow = &a(i, 0);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T* brow = &b(j, 0);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<double>(arow[k]) * brow[k];
      out(i, j) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn shape mismatch: " + shapes(a, b));
  std::vector<double> acc(a.cols() * b.cols(), 0.0);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const T* arow = &a(k, 0);
    const T* brow = &b(k, 0);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* dst = &acc[i * b.cols()];
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * static_cast<double>(brow[j]);
    }
  }
  std::vector<T> data(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) data[i] = static_cast<T>(acc[i]);
  return Matrix<T>(a.cols(), b.cols(), std::move(data));
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

template <typename T>
Matrix<T> row_softmax(const Matrix<T>& m) {
  Matrix<T> out(m.rows(), m.cols());
  std::vector<double> e(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - mx);
      sum += e[j];
    }
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = static_cast<T>(e[j] / sum);
  }
  return out;
}

template <typename T>
std::vector<T> mean_pool(const Matrix<T>& m) {
  if (m.empty()) throw ShapeError("mean_pool of an empty matrix");
  std::vector<double> acc(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) acc[j] += m(i, j);
  std::vector<T> out(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(m.rows()));
  return out;
}

template <typename T>
double cosine_distance(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_distance length mismatch: " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine_distance of a zero-norm vector");
  const double cos = std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
  return 1.0 - cos;
}

template <typename T>
void add_row_broadcast(Matrix<T>& m, const Matrix<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw ShapeError("row broadcast shape mismatch: " + shapes(m, bias));
  }
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias(0, j);
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ParseError("unknown activation '" + std::string(name) + "' (expected relu, tanh or identity)");
}

template <typename T>
Matrix<T> apply_activation(const Matrix<T>& pre, Activation a) {
  Matrix<T> out = pre;
  for (T& v : out.data()) {
    switch (a) {
      case Activation::relu: v = v > T{0} ? v : T{0}; break;
      case Activation::tanh: v = std::tanh(v); break;
      case Activation::identity: break;
    }
  }
  return out;
}

template <typename T>
Matrix<T> activation_derivative(const Matrix<T>& pre, Activation a) {
  Matrix<T> out = pre;
  for (T& v : out.data()) {
    switch (a) {
      case Activation::relu: v = v > T{0} ? T{1} : T{0}; break;
      case Activation::tanh: {
        const T t = std::tanh(v);
        v = T{1} - t * t;
        break;
      }
      case Activation::identity: v = T{1}; break;
    }
  }
  return out;
}

#define AUTOV_INSTANTIATE(T)                                                      \
  template class Matrix<T>;                                                       \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);                  \
  template Matrix<T> matmul_nt(const Matrix<T>&, const Matrix<T>&);               \
  template Matrix<T> matmul_tn(const Matrix<T>&, const Matrix<T>&);               \
  template Matrix<T> transpose(const Matrix<T>&);                                 \
  template Matrix<T> row_softmax(const Matrix<T>&);                               \
  template std::vector<T> mean_pool(const Matrix<T>&);                            \
  template double cosine_distance(std::span<const T>, std::span<const T>);        \
  template void add_row_broadcast(Matrix<T>&, const Matrix<T>&);                  \
  template Matrix<T> apply_activation(const Matrix<T>&, Activation);              \
  template Matrix<T> activation_derivative(const Matrix<T>&, Activation);

AUTOV_INSTANTIATE(float)
AUTOV_INSTANTIATE(double)

#undef AUTOV_INSTANTIATE

}  // namespace autov
