#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bitattn/errors.hpp"

namespace bitattn {

inline constexpr std::size_t kWordBits = 64;

// Unpacked boolean T x n x d tensor, one byte per bit. Slow but obvious;
// used as the reference representation the packed form is checked against.
struct BoolTensor {
  std::size_t time_steps = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;  // indexed [t][i][j], row-major

  BoolTensor() = default;
  BoolTensor(std::size_t t, std::size_t n, std::size_t d);

  std::uint8_t& at(std::size_t t, std::size_t i, std::size_t j) {
    return values[(t * rows + i) * cols + j];
  }
  std::uint8_t at(std::size_t t, std::size_t i, std::size_t j) const {
    return values[(t * rows + i) * cols + j];
  }
};

// One packed bit row: ceil(bits/64) words plus the logical bit count.
struct BitRowView {
  std::span<const std::uint64_t> words;
  std::size_t bits = 0;
};

// Bit tensor of shape T x n x d packed into 64-bit words. Bit j of row
// (t, i) lives in bit j % 64 of word j / 64 of that row's block; bits past
// d-1 in the last word are padding and are kept at zero, which lets the
// Hamming kernel run over whole words without masking.
class BitTimeTensor {
 public:
  BitTimeTensor() = default;
  BitTimeTensor(std::size_t time_steps, std::size_t rows, std::size_t cols);
  // Adopts pre-packed words (row-major by (t, i)). Word count must match the
  // shape exactly and all padding bits must be zero.
  BitTimeTensor(std::size_t time_steps, std::size_t rows, std::size_t cols,
                std::vector<std::uint64_t> words);

  std::size_t time_steps() const { return time_steps_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_row() const { return words_per_row_; }

  bool get(std::size_t t, std::size_t i, std::size_t j) const;
  void set(std::size_t t, std::size_t i, std::size_t j, bool value);

  BitRowView row_view(std::size_t t, std::size_t i) const;
  std::span<const std::uint64_t> words() const { return words_; }

  // Binary serialization: magic "BITT", a format version byte, then
  // T, n, d as little-endian uint32, then the packed words as
  // little-endian uint64 in row-major (t, i) order.
  void dump(std::ostream& os) const;
  static BitTimeTensor load(std::istream& is);

  friend bool operator==(const BitTimeTensor&, const BitTimeTensor&) = default;

 private:
  void check_index(std::size_t t, std::size_t i, std::size_t j) const;

  std::size_t time_steps_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

BitTimeTensor pack(const BoolTensor& b);
BoolTensor unpack(const BitTimeTensor& t);

// Hamming distance between two packed rows of equal logical length:
// popcount of the XOR, summed over words.
std::uint64_t hamming(const BitRowView& a, const BitRowView& b);

// Integer n x n distance table for one time step.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint32_t& at(std::size_t i, std::size_t j) {
    return values_[i * cols_ + j];
  }
  std::uint32_t at(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) =
      default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> values_;
};

// All-pairs Hamming distances between rows of a and rows of b at time step
// t. Both tensors must share the full shape (self-attention layout). Rows of
// the result are computed independently, so `threads` only affects speed.
DistanceMatrix hamming_matrix(const BitTimeTensor& a, const BitTimeTensor& b,
                              std::size_t t, int threads = 1);

}  // namespace bitattn
