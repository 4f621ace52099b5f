#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "bitattn/errors.hpp"

namespace bitattn {

struct OpCounter;

// How float inputs are squashed before spike conversion.
enum class NormMode {
  // (x - min) / (max - min): output lands in [0,1], min maps to 0 and max
  // to 1. A constant matrix has no range and maps to all zeros.
  UnitRange,
  // (x - min) / max: shifts by the minimum but divides by the raw maximum;
  // output can leave [0,1] whenever min < 0. max == 0 is a division error.
  OffsetOverMax,
  // Pass values through untouched. Caller promises they are already usable.
  Raw,
};

// Dense row-major double matrix. Default construction gives an empty 0x0
// placeholder; every real matrix has at least one row and one column.
class FloatMatrix {
 public:
  FloatMatrix() = default;
  FloatMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  FloatMatrix(std::initializer_list<std::initializer_list<double>> init);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {&data_[i * cols_], cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {&data_[i * cols_], cols_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double min_value() const;
  double max_value() const;
  bool all_finite() const;

  friend bool operator==(const FloatMatrix&, const FloatMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

FloatMatrix transpose(const FloatMatrix& m);

// Plain row-major matrix product x * w. Accumulation runs over k in
// ascending order for every output cell, so results are bit-for-bit
// reproducible. Shapes must agree; non-finite input is rejected.
FloatMatrix project(const FloatMatrix& x, const FloatMatrix& w);

// Normalization statistics of one matrix under a NormMode. The transform is
// (x - shift) / denom; denom == 0 encodes the degenerate constant-matrix
// case where every output is defined as 0.
struct NormStats {
  double lo = 0.0;
  double hi = 0.0;
  double shift = 0.0;
  double denom = 1.0;
};

NormStats norm_stats(const FloatMatrix& m, NormMode mode);
FloatMatrix apply_norm(const FloatMatrix& m, const NormStats& s);

// norm_stats + apply_norm in one call.
FloatMatrix minmax_pretransform(const FloatMatrix& m, NormMode mode);

// Standard float attention used as the comparison baseline: softmax of
// q.k^T / sqrt(d) rows (computed with the max-shift trick), times v. When
// `ops` is given, every MAC / exp / divide is tallied as it executes. Pass
// `scores_out` to receive the post-softmax weight matrix.
FloatMatrix reference_attention(const FloatMatrix& q, const FloatMatrix& k,
                                const FloatMatrix& v, OpCounter* ops = nullptr,
                                FloatMatrix* scores_out = nullptr);

}  // namespace bitattn
