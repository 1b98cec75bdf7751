#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "jule/common.hpp"

namespace jule {

/// Per-sample ordered K-nearest-neighbor lists (ascending squared distance, ties
/// by lower index). Every list has the same length.
struct NeighborLists {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<SampleId> ids;        ///< n*k, row i holds the neighbors of sample i
  std::vector<double> sq_distances;  ///< matching squared distances

  std::span<const SampleId> of(std::size_t i) const { return {ids.data() + i * k, k}; }
  std::span<const double> distances_of(std::size_t i) const {
    return {sq_distances.data() + i * k, k};
  }
};

/// Exact KNN by full pairwise scan. Ks is clamped to n-1.
/// Throws ConfigError for ks == 0 and LogicError for fewer than two samples.
NeighborLists build_knn(const Matrix& features, std::size_t ks, unsigned threads = 1);

/// a / (n*K) times the sum of squared neighbor distances. Throws DegenerateGraph when zero.
double sigma_squared(const NeighborLists& neighbors, double a);

/// Directed, sparse sample affinity graph: W(i,j) = exp(-|xi-xj|^2 / sigma2) when j is
/// one of the K nearest neighbors of i, zero otherwise.
class SampleAffinityGraph {
 public:
  SampleAffinityGraph() = default;

  /// Builds the graph from explicit out-neighbor lists and weights (row i owns
  /// entries [i*k, (i+1)*k)). Used by fixtures that specify W directly.
  static SampleAffinityGraph from_lists(std::size_t n, std::size_t k, std::vector<SampleId> ids,
                                        std::vector<double> weights, double sigma2 = 1.0);

  std::size_t size() const noexcept { return n_; }
  std::size_t ks() const noexcept { return k_; }
  double sigma2() const noexcept { return sigma2_; }

  std::span<const SampleId> neighbors(SampleId i) const { return {out_ids_.data() + i * k_, k_}; }
  std::span<const double> weights(SampleId i) const { return {out_w_.data() + i * k_, k_}; }

  /// Samples that list i as a neighbor, with the weight W(source, i).
  std::span<const SampleId> in_neighbors(SampleId i) const {
    return {in_ids_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
  }
  std::span<const double> in_weights(SampleId i) const {
    return {in_w_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
  }

  /// W(i, j); zero when j is not a neighbor of i.
  double weight(SampleId i, SampleId j) const;

  /// Dense n x n copy of W, for tests and debugging only.
  Matrix dense() const;

  /// Coordinate-list text dump, one "i j weight" line per stored entry.
  void write_coo(std::ostream& out) const;

 private:
  friend SampleAffinityGraph sample_affinity(const Matrix&, std::size_t, double, unsigned);
  void build_reverse();

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  double sigma2_ = 0.0;
  std::vector<SampleId> out_ids_;
  std::vector<double> out_w_;
  std::vector<std::size_t> in_offsets_;
  std::vector<SampleId> in_ids_;
  std::vector<double> in_w_;
};

SampleAffinityGraph sample_affinity(const Matrix& features, std::size_t ks, double a,
                                    unsigned threads = 1);

}  // namespace jule
