#include "bitattn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bitattn/cost_model.hpp"

namespace bitattn {

namespace {

void require_nonempty(const FloatMatrix& m, const char* who) {
  if (m.empty()) throw ShapeError(std::string(who) + ": empty matrix");
}

void require_finite(const FloatMatrix& m, const char* who) {
  if (!m.all_finite())
    throw DomainError(std::string(who) + ": non-finite entry");
}

}  // namespace

FloatMatrix::FloatMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0)
    throw ShapeError("FloatMatrix: dimensions must be positive");
}

FloatMatrix::FloatMatrix(
    std::initializer_list<std::initializer_list<double>> init) {
  rows_ = init.size();
  cols_ = rows_ ? init.begin()->size() : 0;
  if (rows_ == 0 || cols_ == 0)
    throw ShapeError("FloatMatrix: dimensions must be positive");
  data_.reserve(rows_ * cols_);
  for (const auto& r : init) {
    if (r.size() != cols_)
      throw ShapeError("FloatMatrix: ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

double FloatMatrix::min_value() const {
  return *std::min_element(data_.begin(), data_.end());
}

double FloatMatrix::max_value() const {
  return *std::max_element(data_.begin(), data_.end());
}

bool FloatMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

FloatMatrix transpose(const FloatMatrix& m) {
  require_nonempty(m, "transpose");
  FloatMatrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

FloatMatrix project(const FloatMatrix& x, const FloatMatrix& w) {
  require_nonempty(x, "project");
  require_nonempty(w, "project");
  if (x.cols() != w.rows())
    throw ShapeError("project: inner dimensions differ (" +
                     std::to_string(x.cols()) + " vs " +
                     std::to_string(w.rows()) + ")");
  require_finite(x, "project");
  require_finite(w, "project");

  FloatMatrix out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * w(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

NormStats norm_stats(const FloatMatrix& m, NormMode mode) {
  require_nonempty(m, "norm_stats");
  require_finite(m, "norm_stats");
  NormStats s;
  if (mode == NormMode::Raw) return s;  // identity transform
  s.lo = m.min_value();
  s.hi = m.max_value();
  switch (mode) {
    case NormMode::UnitRange:
      s.shift = s.lo;
      s.denom = s.hi - s.lo;  // 0 for a constant matrix: output pinned to 0
      break;
    case NormMode::OffsetOverMax:
      if (s.hi == 0.0)
        throw DomainError("minmax_pretransform: max is 0, (x - min) / max "
                          "is undefined in this mode");
      s.shift = s.lo;
      s.denom = s.hi;
      break;
    case NormMode::Raw:
      break;
  }
  return s;
}

FloatMatrix apply_norm(const FloatMatrix& m, const NormStats& s) {
  require_nonempty(m, "apply_norm");
  FloatMatrix out(m.rows(), m.cols());
  // Dividing (rather than multiplying by a reciprocal) keeps the endpoints
  // exact: the max maps to exactly 1 in UnitRange mode.
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      out(i, j) = s.denom == 0.0 ? 0.0 : (m(i, j) - s.shift) / s.denom;
  return out;
}

FloatMatrix minmax_pretransform(const FloatMatrix& m, NormMode mode) {
  return apply_norm(m, norm_stats(m, mode));
}

FloatMatrix reference_attention(const FloatMatrix& q, const FloatMatrix& k,
                                const FloatMatrix& v, OpCounter* ops,
                                FloatMatrix* scores_out) {
  require_nonempty(q, "reference_attention");
  require_nonempty(k, "reference_attention");
  require_nonempty(v, "reference_attention");
  if (q.cols() != k.cols())
    throw ShapeError("reference_attention: q and k widths differ");
  if (k.rows() != v.rows())
    throw ShapeError("reference_attention: k and v row counts differ");
  require_finite(q, "reference_attention");
  require_finite(k, "reference_attention");
  require_finite(v, "reference_attention");

  const std::size_t m = q.rows(), n = k.rows(), d = q.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  FloatMatrix a(m, n);
  std::uint64_t score_macs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t f = 0; f < d; ++f) acc += q(i, f) * k(j, f);
      score_macs += d;
      a(i, j) = acc * inv_sqrt_d;
    }
  }

  std::uint64_t exps = 0, divs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(a(i, j) - mx);
      a(i, j) = e;
      sum += e;
      ++exps;
    }
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) /= sum;
      ++divs;
    }
  }

  FloatMatrix y(m, v.cols());
  std::uint64_t out_macs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * v(j, c);
      out_macs += n;
      y(i, c) = acc;
    }
  }

  if (ops) {
    ops->stage("scores").macs += score_macs;
    ops->stage("softmax").exps += exps;
    ops->stage("softmax").divs += divs;
    ops->stage("output").macs += out_macs;
    ops->mac_ops += score_macs + out_macs;
  }
  if (scores_out) *scores_out = a;
  return y;
}

}  // namespace bitattn
