#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bitattn/bit_tensor.hpp"
#include "bitattn/cost_model.hpp"
#include "bitattn/matrix.hpp"

namespace bitattn {

struct AttentionResult {
  // scores(i,j) = 1 / (sum over t of hamming(q row i, k row j) + 1).
  // Rows are NOT normalized; there is no softmax anywhere in this path.
  FloatMatrix scores;
  FloatMatrix output;  // scores * v
  OpCounter ops;
};

// Bitwise attention over packed spike tensors. q_b and k_b must share the
// full T x n x d shape and v must have n rows; v stays float throughout.
// Score work runs on packed words, but ops reports logical-bit counts (the
// packing is a kernel optimization, not a different operation count).
// Per-row work is independent, so `threads` changes wall time only.
AttentionResult bitwise_attention(const BitTimeTensor& q_b,
                                  const BitTimeTensor& k_b,
                                  const FloatMatrix& v, int threads = 1);

// Same computation with per-bit loops and no packing tricks; the oracle the
// packed kernel is checked against. Counters here are incremented alongside
// each executed operation rather than by formula.
AttentionResult naive_bitwise_attention(const BitTimeTensor& q_b,
                                        const BitTimeTensor& k_b,
                                        const FloatMatrix& v);

// A triple of binary vectors where dot products tie but Hamming distances
// (and therefore bitwise attention scores) differ, showing the two
// similarity measures rank neighbors differently.
struct SeparationDemo {
  std::vector<std::uint8_t> x, y1, y2;
  std::uint64_t dot_y1 = 0, dot_y2 = 0;
  std::uint64_t hamming_y1 = 0, hamming_y2 = 0;
  double score_y1 = 0.0, score_y2 = 0.0;
};

// The canonical 4-bit witness: x = 1100, y1 = 1000, y2 = 1011. Both dot
// products are 1, the distances are 1 vs 3, the scores 1/2 vs 1/4.
SeparationDemo dot_vs_hamming_separation();

// Randomized witness at width d >= 3: draws x, then plants y1 = x and
// y2 = x with two of x's zero bits flipped on, which keeps the dot products
// tied while forcing a Hamming gap of exactly 2. Always succeeds.
SeparationDemo find_separating_triple(std::size_t d, std::uint64_t seed);

}  // namespace bitattn
