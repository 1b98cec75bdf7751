#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jule/common.hpp"

namespace jule {

/// Joint label counts. Labels of each side are compacted to 0..k-1 in order of first
/// appearance, so arbitrary (even negative or sparse) label values are accepted.
class ContingencyTable {
 public:
  /// Throws LogicError when the lengths differ.
  ContingencyTable(std::span<const int> a, std::span<const int> b);

  std::size_t rows() const noexcept { return row_totals_.size(); }
  std::size_t cols() const noexcept { return col_totals_.size(); }
  std::size_t total() const noexcept { return total_; }
  std::size_t count(std::size_t r, std::size_t c) const { return counts_.at(r * cols() + c); }
  const std::vector<std::size_t>& row_totals() const noexcept { return row_totals_; }
  const std::vector<std::size_t>& col_totals() const noexcept { return col_totals_; }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> row_totals_;
  std::vector<std::size_t> col_totals_;
  std::size_t total_ = 0;
};

/// I(a;b) / sqrt(H(a) H(b)) with natural logs; 0 when either side has zero entropy.
/// Throws LogicError on length mismatch or empty input.
double nmi(std::span<const int> a, std::span<const int> b);

/// Best one-to-one cluster-to-class matching, as a fraction of samples.
/// Throws LogicError on length mismatch.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Maximum-weight assignment on a square matrix (row-major, k x k). Returns, for each
/// row, the column it is matched to. O(k^3).
std::vector<std::size_t> max_weight_assignment(std::span<const double> weights, std::size_t k);

/// Fraction of test points whose nearest training point (squared Euclidean, lowest
/// index on ties) carries a different label. Throws LogicError on shape mismatch or
/// an empty training set.
double one_nn_error(const Matrix& train, std::span<const int> train_labels, const Matrix& test,
                    std::span<const int> test_labels);

}  // namespace jule
