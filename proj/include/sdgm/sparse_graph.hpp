#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sdgm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Free strictly-lower positions of the factor L for the latent ordering
/// (b_1, ..., b_n, eta): local blocks first, the global block last.
///
/// markov_order 0 gives the block-arrow structure of random-effects models,
/// markov_order 1 adds the sub-diagonal blocks of a state-space chain.
/// Entries are stored column-major (CSC) so that both triangular solves can
/// walk columns.
class SparsityPattern {
 public:
  SparsityPattern() = default;

  static SparsityPattern build(std::size_t n_blocks, std::vector<std::size_t> block_dims,
                               std::size_t global_dim, int markov_order);

  /// Pattern with no free entries (L = I).
  static SparsityPattern identity(std::size_t dim);

  /// Every strictly-lower entry free; a single "global" block of size dim.
  static SparsityPattern dense(std::size_t dim);

  std::size_t dim() const { return data_->dim; }
  std::size_t n_blocks() const { return data_->block_dims.size(); }
  const std::vector<std::size_t>& block_dims() const { return data_->block_dims; }
  std::size_t global_dim() const { return data_->global_dim; }
  int markov_order() const { return data_->markov_order; }
  std::size_t nnz() const { return data_->row_index.size(); }

  /// CSC layout: entries of column j live in [col_start(j), col_start(j+1)).
  std::size_t col_start(std::size_t j) const { return data_->col_ptr[j]; }
  std::size_t row(std::size_t k) const { return data_->row_index[k]; }
  std::size_t col(std::size_t k) const { return data_->col_index[k]; }

  std::vector<std::pair<std::size_t, std::size_t>> entries() const;

  /// Position of (row, col) in the value array, or -1 if the entry is fixed at zero.
  std::ptrdiff_t find(std::size_t row, std::size_t col) const;

  /// Block index of a coordinate; global coordinates return n_blocks().
  std::size_t block_of(std::size_t coord) const;

  /// Whether the conditional-independence graph allows Q(i, j) != 0.
  bool allows(std::size_t i, std::size_t j) const;

  bool operator==(const SparsityPattern& other) const;

 private:
  struct Data {
    std::size_t dim = 0;
    std::vector<std::size_t> block_dims;
    std::vector<std::size_t> block_start{0};
    std::size_t global_dim = 0;
    int markov_order = 0;
    std::vector<std::size_t> col_ptr{0};
    std::vector<std::size_t> row_index;
    std::vector<std::size_t> col_index;
  };
  // Immutable and shared: copies of a pattern are cheap.
  std::shared_ptr<const Data> data_ = std::make_shared<const Data>();
};

/// Unit-diagonal lower-triangular matrix with values on a SparsityPattern.
/// The diagonal is implicit and never stored.
class UnitLowerSparse {
 public:
  UnitLowerSparse() = default;
  explicit UnitLowerSparse(SparsityPattern pattern);
  UnitLowerSparse(SparsityPattern pattern, std::vector<double> values);

  const SparsityPattern& pattern() const { return pattern_; }
  std::size_t dim() const { return pattern_.dim(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double at(std::size_t row, std::size_t col) const;

  /// L x
  Vector multiply(const Vector& x) const;
  /// L^T x
  Vector multiply_transpose(const Vector& x) const;
  /// Solves L x = b (forward substitution).
  Vector solve_lower(const Vector& b) const;
  /// Solves L^T x = b (back substitution).
  Vector solve_lower_transpose(const Vector& b) const;

  /// diag(scale) L diag(scale)^{-1}: entry (i, j) becomes value * scale[i] / scale[j].
  UnitLowerSparse rescaled(const Vector& scale) const;

  /// Gathers -(a_i * c_j) at each free entry (i, j); the sparse part of -a c^T.
  std::vector<double> gather_negative_outer(const Vector& a, const Vector& c) const;

  Matrix to_dense() const;

  bool operator==(const UnitLowerSparse& other) const = default;

 private:
  SparsityPattern pattern_;
  std::vector<double> values_;
};

/// Dense Q = L diag(kappa)^2 L^T. Tests and diagnostics only.
Matrix assemble_precision(const UnitLowerSparse& L, const Vector& kappa);

/// Dense boolean mask of positions where Q may be nonzero.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> precision_mask(const SparsityPattern& pattern);

/// Multiply-add count accumulated by triangular solves on the calling thread.
std::uint64_t solve_flop_count();
void reset_solve_flop_count();

}  // namespace sdgm
