#include "bitattn/bit_tensor.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "bitattn/parallel.hpp"

namespace bitattn {

namespace {

constexpr char kMagic[4] = {'B', 'I', 'T', 'T'};
constexpr std::uint8_t kFormatVersion = 1;

// Mask selecting the valid (non-padding) bits of a row's last word.
std::uint64_t last_word_mask(std::size_t cols) {
  const std::size_t rem = cols % kWordBits;
  return rem == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << rem) - 1);
}

void put_u32_le(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

void put_u64_le(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

std::uint32_t get_u32_le(std::istream& is) {
  std::array<char, 4> b;
  is.read(b.data(), b.size());
  if (!is) throw IoError("bit tensor load: truncated stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64_le(std::istream& is) {
  std::array<char, 8> b;
  is.read(b.data(), b.size());
  if (!is) throw IoError("bit tensor load: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

}  // namespace

BoolTensor::BoolTensor(std::size_t t, std::size_t n, std::size_t d)
    : time_steps(t), rows(n), cols(d), values(t * n * d, 0) {
  if (t == 0 || n == 0 || d == 0)
    throw ShapeError("BoolTensor: dimensions must be positive");
}

BitTimeTensor::BitTimeTensor(std::size_t time_steps, std::size_t rows,
                             std::size_t cols)
    : time_steps_(time_steps),
      rows_(rows),
      cols_(cols),
      words_per_row_((cols + kWordBits - 1) / kWordBits) {
  if (time_steps == 0 || rows == 0 || cols == 0)
    throw ShapeError("BitTimeTensor: dimensions must be positive");
  words_.assign(time_steps_ * rows_ * words_per_row_, 0);
}

BitTimeTensor::BitTimeTensor(std::size_t time_steps, std::size_t rows,
                             std::size_t cols,
                             std::vector<std::uint64_t> words)
    : BitTimeTensor(time_steps, rows, cols) {
  if (words.size() != words_.size())
    throw ShapeError("BitTimeTensor: got " + std::to_string(words.size()) +
                     " words, shape needs " + std::to_string(words_.size()));
  const std::uint64_t pad = ~last_word_mask(cols_);
  if (pad != 0) {
    for (std::size_t r = 0; r < time_steps_ * rows_; ++r) {
      if (words[r * words_per_row_ + words_per_row_ - 1] & pad)
        throw ShapeError("BitTimeTensor: nonzero padding bits in row " +
                         std::to_string(r));
    }
  }
  words_ = std::move(words);
}

void BitTimeTensor::check_index(std::size_t t, std::size_t i,
                                std::size_t j) const {
  if (t >= time_steps_ || i >= rows_ || j >= cols_)
    throw ShapeError("BitTimeTensor: index (" + std::to_string(t) + ", " +
                     std::to_string(i) + ", " + std::to_string(j) +
                     ") out of range");
}

bool BitTimeTensor::get(std::size_t t, std::size_t i, std::size_t j) const {
  check_index(t, i, j);
  const std::size_t base = (t * rows_ + i) * words_per_row_;
  return (words_[base + j / kWordBits] >> (j % kWordBits)) & 1u;
}

void BitTimeTensor::set(std::size_t t, std::size_t i, std::size_t j,
                        bool value) {
  check_index(t, i, j);
  const std::size_t base = (t * rows_ + i) * words_per_row_;
  const std::uint64_t bit = std::uint64_t{1} << (j % kWordBits);
  if (value)
    words_[base + j / kWordBits] |= bit;
  else
    words_[base + j / kWordBits] &= ~bit;
}

BitRowView BitTimeTensor::row_view(std::size_t t, std::size_t i) const {
  check_index(t, i, 0);
  const std::size_t base = (t * rows_ + i) * words_per_row_;
  return {{&words_[base], words_per_row_}, cols_};
}

void BitTimeTensor::dump(std::ostream& os) const {
  if (words_.empty()) throw IoError("bit tensor dump: empty tensor");
  os.write(kMagic, sizeof(kMagic));
  os.put(static_cast<char>(kFormatVersion));
  if (time_steps_ > std::numeric_limits<std::uint32_t>::max() ||
      rows_ > std::numeric_limits<std::uint32_t>::max() ||
      cols_ > std::numeric_limits<std::uint32_t>::max())
    throw IoError("bit tensor dump: dimension exceeds format limit");
  put_u32_le(os, static_cast<std::uint32_t>(time_steps_));
  put_u32_le(os, static_cast<std::uint32_t>(rows_));
  put_u32_le(os, static_cast<std::uint32_t>(cols_));
  for (std::uint64_t w : words_) put_u64_le(os, w);
  if (!os) throw IoError("bit tensor dump: write failed");
}

BitTimeTensor BitTimeTensor::load(std::istream& is) {
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("bit tensor load: bad magic");
  const int version = is.get();
  if (version != kFormatVersion)
    throw IoError("bit tensor load: unsupported format version " +
                  std::to_string(version));
  const std::uint32_t t = get_u32_le(is);
  const std::uint32_t n = get_u32_le(is);
  const std::uint32_t d = get_u32_le(is);
  if (t == 0 || n == 0 || d == 0)
    throw IoError("bit tensor load: zero dimension in header");
  const std::size_t wpr = (static_cast<std::size_t>(d) + kWordBits - 1) / kWordBits;
  std::vector<std::uint64_t> words(static_cast<std::size_t>(t) * n * wpr);
  for (auto& w : words) w = get_u64_le(is);
  try {
    return BitTimeTensor(t, n, d, std::move(words));
  } catch (const ShapeError& e) {
    throw IoError(std::string("bit tensor load: ") + e.what());
  }
}

BitTimeTensor pack(const BoolTensor& b) {
  BitTimeTensor out(b.time_steps, b.rows, b.cols);
  for (std::size_t t = 0; t < b.time_steps; ++t)
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t j = 0; j < b.cols; ++j)
        if (b.at(t, i, j)) out.set(t, i, j, true);
  return out;
}

BoolTensor unpack(const BitTimeTensor& t) {
  BoolTensor out(t.time_steps(), t.rows(), t.cols());
  for (std::size_t s = 0; s < t.time_steps(); ++s)
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j)
        out.at(s, i, j) = t.get(s, i, j) ? 1 : 0;
  return out;
}

std::uint64_t hamming(const BitRowView& a, const BitRowView& b) {
  if (a.bits != b.bits)
    throw ShapeError("hamming: rows have different bit lengths (" +
                     std::to_string(a.bits) + " vs " + std::to_string(b.bits) +
                     ")");
  // Padding bits are zero on both sides, so whole words can be XORed
  // without masking.
  std::uint64_t sum = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w)
    sum += static_cast<std::uint64_t>(std::popcount(a.words[w] ^ b.words[w]));
  return sum;
}

DistanceMatrix hamming_matrix(const BitTimeTensor& a, const BitTimeTensor& b,
                              std::size_t t, int threads) {
  if (a.cols() != b.cols() || a.rows() != b.rows() ||
      a.time_steps() != b.time_steps())
    throw ShapeError("hamming_matrix: tensor shapes differ");
  if (t >= a.time_steps())
    throw ShapeError("hamming_matrix: time step out of range");

  const std::size_t n = a.rows();
  DistanceMatrix dist(n, n);
  parallel_for(n, threads, [&](std::size_t i) {
    const BitRowView ra = a.row_view(t, i);
    for (std::size_t j = 0; j < n; ++j)
      dist.at(i, j) = static_cast<std::uint32_t>(hamming(ra, b.row_view(t, j)));
  });
  return dist;
}

}  // namespace bitattn
