#include "jule/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <ostream>

#include "jule/parallel.hpp"

namespace jule {

NeighborLists build_knn(const Matrix& features, std::size_t ks, unsigned threads) {
  if (ks == 0) throw ConfigError("Ks must be positive");
  const std::size_t n = features.rows();
  if (n < 2) throw LogicError("KNN graph needs at least two samples");
  const std::size_t k = std::min(ks, n - 1);
  if (k < ks)
    std::cerr << "warning: Ks=" << ks << " exceeds n-1; clamped to " << k << '\n';

  NeighborLists lists;
  lists.n = n;
  lists.k = k;
  lists.ids.resize(n * k);
  lists.sq_distances.resize(n * k);

  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, SampleId>> candidates(n - 1);
    for (std::size_t i = begin; i < end; ++i) {
      const auto xi = features.row(i);
      std::size_t c = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        candidates[c++] = {squared_distance(xi, features.row(j)), static_cast<SampleId>(j)};
      }
      // pair ordering = ascending distance, then lower index
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                        candidates.end());
      for (std::size_t r = 0; r < k; ++r) {
        lists.sq_distances[i * k + r] = candidates[r].first;
        lists.ids[i * k + r] = candidates[r].second;
      }
    }
  });
  return lists;
}

double sigma_squared(const NeighborLists& neighbors, double a) {
  const double total = std::accumulate(neighbors.sq_distances.begin(), neighbors.sq_distances.end(), 0.0);
  const double sigma2 = a * total / static_cast<double>(neighbors.n * neighbors.k);
  if (!(sigma2 > 0.0)) throw DegenerateGraph("all neighbor distances are zero; sigma^2 = 0");
  return sigma2;
}

SampleAffinityGraph sample_affinity(const Matrix& features, std::size_t ks, double a, unsigned threads) {
  const NeighborLists lists = build_knn(features, ks, threads);
  SampleAffinityGraph g;
  g.n_ = lists.n;
  g.k_ = lists.k;
  g.sigma2_ = sigma_squared(lists, a);
  g.out_ids_ = lists.ids;
  g.out_w_.resize(lists.sq_distances.size());
  for (std::size_t e = 0; e < lists.sq_distances.size(); ++e)
    g.out_w_[e] = std::exp(-lists.sq_distances[e] / g.sigma2_);
  g.build_reverse();
  return g;
}

SampleAffinityGraph SampleAffinityGraph::from_lists(std::size_t n, std::size_t k,
                                                    std::vector<SampleId> ids,
                                                    std::vector<double> weights, double sigma2) {
  if (ids.size() != n * k || weights.size() != n * k)
    throw LogicError("neighbor list size does not match n*k");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r)
      if (ids[i * k + r] >= n || ids[i * k + r] == i)
        throw LogicError("neighbor list entry out of range or self-referencing");
  SampleAffinityGraph g;
  g.n_ = n;
  g.k_ = k;
  g.sigma2_ = sigma2;
  g.out_ids_ = std::move(ids);
  g.out_w_ = std::move(weights);
  g.build_reverse();
  return g;
}

void SampleAffinityGraph::build_reverse() {
  in_offsets_.assign(n_ + 1, 0);
  for (SampleId j : out_ids_) ++in_offsets_[j + 1];
  std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
  in_ids_.resize(out_ids_.size());
  in_w_.resize(out_ids_.size());
  std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  // sources are visited in ascending order, so each in-list is sorted by source id
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t r = 0; r < k_; ++r) {
      const SampleId j = out_ids_[i * k_ + r];
      in_ids_[cursor[j]] = static_cast<SampleId>(i);
      in_w_[cursor[j]] = out_w_[i * k_ + r];
      ++cursor[j];
    }
  }
}

double SampleAffinityGraph::weight(SampleId i, SampleId j) const {
  const auto ids = neighbors(i);
  for (std::size_t r = 0; r < ids.size(); ++r)
    if (ids[r] == j) return out_w_[i * k_ + r];
  return 0.0;
}

Matrix SampleAffinityGraph::dense() const {
  Matrix w(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t r = 0; r < k_; ++r) w(i, out_ids_[i * k_ + r]) = out_w_[i * k_ + r];
  return w;
}

void SampleAffinityGraph::write_coo(std::ostream& out) const {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t r = 0; r < k_; ++r)
      out << i << ' ' << out_ids_[i * k_ + r] << ' ' << out_w_[i * k_ + r] << '\n';
}

}  // namespace jule
