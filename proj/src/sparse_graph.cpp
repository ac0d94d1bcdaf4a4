#include "sdgm/sparse_graph.hpp"

#include <algorithm>

#include "sdgm/error.hpp"

namespace sdgm {

namespace {
thread_local std::uint64_t g_solve_flops = 0;
}

std::uint64_t solve_flop_count() { return g_solve_flops; }
void reset_solve_flop_count() { g_solve_flops = 0; }

SparsityPattern SparsityPattern::build(std::size_t n_blocks, std::vector<std::size_t> block_dims,
                                       std::size_t global_dim, int markov_order) {
  if (markov_order != 0 && markov_order != 1) {
    throw ConfigError("markov_order must be 0 or 1, got " + std::to_string(markov_order));
  }
  if (block_dims.size() != n_blocks) {
    throw ConfigError("block_dims has " + std::to_string(block_dims.size()) + " entries for " +
                      std::to_string(n_blocks) + " blocks");
  }
  if (std::any_of(block_dims.begin(), block_dims.end(), [](std::size_t d) { return d == 0; })) {
    throw ConfigError("local block dimensions must be positive");
  }

  Data d;
  d.block_dims = std::move(block_dims);
  d.global_dim = global_dim;
  d.markov_order = markov_order;
  d.block_start.resize(n_blocks + 1, 0);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    d.block_start[b + 1] = d.block_start[b] + d.block_dims[b];
  }
  const std::size_t local_dim = d.block_start[n_blocks];
  d.dim = local_dim + global_dim;
  if (d.dim == 0) throw ConfigError("pattern has zero total dimension");

  d.col_ptr.assign(1, 0);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = d.block_start[b];
    const std::size_t end = d.block_start[b + 1];
    // Rows reachable from block b: itself, the next block (order 1), the globals.
    const std::size_t next_end = (markov_order == 1 && b + 1 < n_blocks) ? d.block_start[b + 2] : end;
    for (std::size_t j = begin; j < end; ++j) {
      for (std::size_t i = j + 1; i < next_end; ++i) {
        d.row_index.push_back(i);
        d.col_index.push_back(j);
      }
      for (std::size_t i = local_dim; i < d.dim; ++i) {
        d.row_index.push_back(i);
        d.col_index.push_back(j);
      }
      d.col_ptr.push_back(d.row_index.size());
    }
  }
  for (std::size_t j = local_dim; j < d.dim; ++j) {
    for (std::size_t i = j + 1; i < d.dim; ++i) {
      d.row_index.push_back(i);
      d.col_index.push_back(j);
    }
    d.col_ptr.push_back(d.row_index.size());
  }
  SparsityPattern pat;
  pat.data_ = std::make_shared<const Data>(std::move(d));
  return pat;
}

SparsityPattern SparsityPattern::identity(std::size_t dim) {
  return build(dim, std::vector<std::size_t>(dim, 1), 0, 0);
}

SparsityPattern SparsityPattern::dense(std::size_t dim) { return build(0, {}, dim, 0); }

bool SparsityPattern::operator==(const SparsityPattern& other) const {
  if (data_ == other.data_) return true;
  return data_->block_dims == other.data_->block_dims && data_->global_dim == other.data_->global_dim &&
         data_->markov_order == other.data_->markov_order && data_->row_index == other.data_->row_index &&
         data_->col_index == other.data_->col_index;
}

std::vector<std::pair<std::size_t, std::size_t>> SparsityPattern::entries() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(nnz());
  for (std::size_t k = 0; k < nnz(); ++k) out.emplace_back(row(k), col(k));
  return out;
}

std::ptrdiff_t SparsityPattern::find(std::size_t r, std::size_t c) const {
  if (c >= dim() || r <= c || r >= dim()) return -1;
  const auto& rows = data_->row_index;
  const auto first = rows.begin() + static_cast<std::ptrdiff_t>(col_start(c));
  const auto last = rows.begin() + static_cast<std::ptrdiff_t>(col_start(c + 1));
  const auto it = std::lower_bound(first, last, r);
  if (it == last || *it != r) return -1;
  return it - rows.begin();
}

std::size_t SparsityPattern::block_of(std::size_t coord) const {
  const std::size_t nb = n_blocks();
  const auto& starts = data_->block_start;
  if (coord >= starts[nb]) return nb;
  const auto it = std::upper_bound(starts.begin(), starts.end(), coord);
  return static_cast<std::size_t>(it - starts.begin()) - 1;
}

bool SparsityPattern::allows(std::size_t i, std::size_t j) const {
  if (i == j) return true;
  const std::size_t bi = block_of(std::max(i, j));
  const std::size_t bj = block_of(std::min(i, j));
  if (bi == n_blocks() || bi == bj) return true;
  return markov_order() == 1 && bi == bj + 1;
}

UnitLowerSparse::UnitLowerSparse(SparsityPattern pattern)
    : pattern_(std::move(pattern)), values_(pattern_.nnz(), 0.0) {}

UnitLowerSparse::UnitLowerSparse(SparsityPattern pattern, std::vector<double> values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
  check_dim(values_.size(), pattern_.nnz(), "UnitLowerSparse values");
}

double UnitLowerSparse::at(std::size_t r, std::size_t c) const {
  if (r == c) return 1.0;
  const auto k = pattern_.find(r, c);
  return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
}

Vector UnitLowerSparse::multiply(const Vector& x) const {
  check_dim(static_cast<std::size_t>(x.size()), dim(), "L multiply");
  Vector y = x;
  for (std::size_t j = 0; j < dim(); ++j) {
    const double xj = x[static_cast<Eigen::Index>(j)];
    for (std::size_t k = pattern_.col_start(j); k < pattern_.col_start(j + 1); ++k) {
      y[static_cast<Eigen::Index>(pattern_.row(k))] += values_[k] * xj;
    }
  }
  return y;
}

Vector UnitLowerSparse::multiply_transpose(const Vector& x) const {
  check_dim(static_cast<std::size_t>(x.size()), dim(), "L^T multiply");
  Vector y = x;
  for (std::size_t j = 0; j < dim(); ++j) {
    double acc = 0.0;
    for (std::size_t k = pattern_.col_start(j); k < pattern_.col_start(j + 1); ++k) {
      acc += values_[k] * x[static_cast<Eigen::Index>(pattern_.row(k))];
    }
    y[static_cast<Eigen::Index>(j)] += acc;
  }
  return y;
}

Vector UnitLowerSparse::solve_lower(const Vector& b) const {
  check_dim(static_cast<std::size_t>(b.size()), dim(), "solve_lower rhs");
  Vector x = b;
  for (std::size_t j = 0; j < dim(); ++j) {
    const double xj = x[static_cast<Eigen::Index>(j)];
    for (std::size_t k = pattern_.col_start(j); k < pattern_.col_start(j + 1); ++k) {
      x[static_cast<Eigen::Index>(pattern_.row(k))] -= values_[k] * xj;
    }
  }
  g_solve_flops += pattern_.nnz() + dim();
  return x;
}

Vector UnitLowerSparse::solve_lower_transpose(const Vector& b) const {
  check_dim(static_cast<std::size_t>(b.size()), dim(), "solve_lower_transpose rhs");
  Vector x = b;
  for (std::size_t jj = dim(); jj-- > 0;) {
    double acc = x[static_cast<Eigen::Index>(jj)];
    for (std::size_t k = pattern_.col_start(jj); k < pattern_.col_start(jj + 1); ++k) {
      acc -= values_[k] * x[static_cast<Eigen::Index>(pattern_.row(k))];
    }
    x[static_cast<Eigen::Index>(jj)] = acc;
  }
  g_solve_flops += pattern_.nnz() + dim();
  return x;
}

UnitLowerSparse UnitLowerSparse::rescaled(const Vector& scale) const {
  check_dim(static_cast<std::size_t>(scale.size()), dim(), "rescale vector");
  UnitLowerSparse out = *this;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    out.values_[k] = values_[k] * scale[static_cast<Eigen::Index>(pattern_.row(k))] /
                     scale[static_cast<Eigen::Index>(pattern_.col(k))];
  }
  return out;
}

std::vector<double> UnitLowerSparse::gather_negative_outer(const Vector& a, const Vector& c) const {
  check_dim(static_cast<std::size_t>(a.size()), dim(), "outer-product left factor");
  check_dim(static_cast<std::size_t>(c.size()), dim(), "outer-product right factor");
  std::vector<double> out(values_.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = -a[static_cast<Eigen::Index>(pattern_.row(k))] * c[static_cast<Eigen::Index>(pattern_.col(k))];
  }
  return out;
}

Matrix UnitLowerSparse::to_dense() const {
  const auto p = static_cast<Eigen::Index>(dim());
  Matrix m = Matrix::Identity(p, p);
  for (std::size_t k = 0; k < values_.size(); ++k) {
    m(static_cast<Eigen::Index>(pattern_.row(k)), static_cast<Eigen::Index>(pattern_.col(k))) = values_[k];
  }
  return m;
}

Matrix assemble_precision(const UnitLowerSparse& L, const Vector& kappa) {
  check_dim(static_cast<std::size_t>(kappa.size()), L.dim(), "kappa");
  if ((kappa.array() <= 0.0).any() || !kappa.allFinite()) {
    throw ConfigError("assemble_precision: kappa entries must be positive and finite");
  }
  const Matrix dense = L.to_dense();
  return dense * kappa.array().square().matrix().asDiagonal() * dense.transpose();
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> precision_mask(const SparsityPattern& pattern) {
  const auto p = static_cast<Eigen::Index>(pattern.dim());
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      mask(i, j) = pattern.allows(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return mask;
}

}  // namespace sdgm
