#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "jule/common.hpp"
#include "jule/knn_graph.hpp"
#include "jule/partition.hpp"

namespace jule {

/// How A(Ci -> Cm u Cn) is refreshed after a merge. The incoming direction
/// A(Cm u Cn -> Ci) is always the exact sum of its two parts.
struct AffinityMode {
  enum class Kind {
    Exact,         ///< recomputed from W over the merged member list
    SizeWeighted,  ///< |Cm|/(|Cm|+|Cn|) A(Ci->Cm) + |Cn|/(|Cm|+|Cn|) A(Ci->Cn)
    Alpha,         ///< (1+alpha)(|Cm|^2 A(Ci->Cm) + |Cn|^2 A(Ci->Cn)) / (|Cm|+|Cn|)^2
  };
  Kind kind = Kind::Exact;
  double alpha = 0.0;

  static AffinityMode exact() { return {}; }
  static AffinityMode size_weighted() { return {Kind::SizeWeighted, 0.0}; }
  static AffinityMode with_alpha(double alpha) { return {Kind::Alpha, alpha}; }

  std::string describe() const;
};

// Graph-degree-linkage affinities over explicit member lists. These are the
// reference implementations; the cache below maintains the same values incrementally.

/// A(Cj -> Ci) = 1/|Ci|^2 * 1' W[Ci,Cj] W[Cj,Ci] 1.
/// Throws LogicError when the lists overlap or either is empty.
double directed_affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                         std::span<const SampleId> cj);

/// Symmetric A(Ci, Cj) = A(Cj -> Ci) + A(Ci -> Cj).
double affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                std::span<const SampleId> cj);

/// A(Cm u Cn -> Ci) from the two cached parts.
inline double merged_from_affinity(double from_m, double from_n) noexcept { return from_m + from_n; }

/// Size-weighted estimate of A(Ci -> Cm u Cn).
double size_weighted_to_affinity(double to_m, double to_n, std::size_t size_m, std::size_t size_n) noexcept;

/// Constant-ratio estimate of A(Ci -> Cm u Cn).
double alpha_to_affinity(double to_m, double to_n, std::size_t size_m, std::size_t size_n,
                         double alpha) noexcept;

/// A(Ci -> Cm u Cn): exact from W, or one of the approximations fed by values
/// computed from W for the separate parts.
double merged_to_affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                          std::span<const SampleId> cm, std::span<const SampleId> cn,
                          AffinityMode mode);

/// Symmetric affinity of Cm u Cn with Ci under the constant-ratio approximation.
double merged_affinity_alpha(double from_m, double from_n, double to_m, double to_n,
                             std::size_t size_m, std::size_t size_n, double alpha) noexcept;

/// Cached directed affinities between one cluster and another it shares graph edges with.
struct ClusterLink {
  ClusterId other;
  double out;  ///< A(self -> other)
  double in;   ///< A(other -> self)

  double symmetric() const noexcept { return out + in; }
};

/// Directed cluster affinities for every pair of live clusters joined by at least one
/// edge of W. Pairs without an edge have affinity zero and are not stored, so memory
/// stays O(n Ks). Link lists are sorted by the other cluster's id.
class ClusterAffinityCache {
 public:
  ClusterAffinityCache(const SampleAffinityGraph& graph, const Partition& partition,
                       AffinityMode mode = AffinityMode::exact());

  AffinityMode mode() const noexcept { return mode_; }

  double directed(ClusterId from, ClusterId to) const;
  double affinity(ClusterId a, ClusterId b) const;
  std::span<const ClusterLink> links(ClusterId c) const { return links_.at(c); }

  bool is_live(ClusterId c) const noexcept { return c < sizes_.size() && sizes_[c] > 0; }
  std::size_t size_of(ClusterId c) const { return sizes_.at(c); }
  std::size_t live_count() const noexcept { return live_; }
  std::size_t id_capacity() const noexcept { return sizes_.size(); }
  std::vector<ClusterId> live_ids() const;

  /// Folds `absorbed` into `survivor`. `merged` must already reflect the merge
  /// (Partition::absorb has been called); the cache still holds the pre-merge sizes.
  void merge(const SampleAffinityGraph& graph, const Partition& merged, ClusterId survivor,
             ClusterId absorbed);

 private:
  struct Incoming {
    ClusterId from;
    double value;
  };
  /// A(Ci -> target) for every cluster Ci touching `target`, computed from W.
  std::vector<Incoming> incoming_exact(const SampleAffinityGraph& graph, const Partition& partition,
                                       ClusterId target);

  AffinityMode mode_;
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<ClusterLink>> links_;
  std::size_t live_ = 0;

  // scratch buffers for incoming_exact
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<SampleId> touched_;
  std::vector<double> acc_;
  std::vector<ClusterId> acc_ids_;
  std::vector<char> sample_mark_;
  std::vector<char> cluster_mark_;
};

}  // namespace jule
