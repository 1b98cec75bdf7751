#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "jule/cluster_affinity.hpp"
#include "jule/common.hpp"
#include "jule/knn_graph.hpp"
#include "jule/partition.hpp"

namespace jule {

/// One timestep of the forward pass.
struct MergeStep {
  std::size_t t = 0;
  ClusterId winner = 0;    ///< cluster whose loss was minimal
  ClusterId neighbor = 0;  ///< its nearest neighbor cluster
  double loss = 0.0;
  std::size_t n_clusters = 0;  ///< live clusters after the merge

  friend bool operator==(const MergeStep&, const MergeStep&) = default;
};

struct MergeChoice {
  ClusterId winner = 0;
  ClusterId neighbor = 0;
  double loss = 0.0;
};

/// Connected components of the undirected first-nearest-neighbor graph. Components
/// are numbered in order of their smallest sample.
Partition init_clusters(const SampleAffinityGraph& graph);

/// Up to kc live clusters by descending affinity with `c` (ties by lower id). Clusters
/// with zero affinity fill the tail in ascending id order, so the list always has
/// min(kc, live - 1) entries.
std::vector<ClusterId> neighbor_clusters(const ClusterAffinityCache& cache, ClusterId c, std::size_t kc);

/// Local-structure merge loss of cluster c with its nearest neighbor:
///   -A(c, nn1) - lambda/(K'-1) * sum_{k=2..K'} (A(c, nn1) - A(c, nnk)),  K' = min(kc, live-1).
/// The second term is zero when K' == 1. Throws LogicError when c has no neighbor.
double merge_loss(const ClusterAffinityCache& cache, ClusterId c, std::size_t kc, double lambda);

/// Greedy search over every live cluster (ties by lower winner id).
/// Throws LogicError with fewer than two live clusters.
MergeChoice select_merge(const ClusterAffinityCache& cache, std::size_t kc, double lambda);

/// Merges `neighbor` and `winner`; the lower id survives. Updates both the partition and
/// the cache. Throws LogicError for dead or equal ids.
MergeStep apply_merge(Partition& partition, ClusterAffinityCache& cache,
                      const SampleAffinityGraph& graph, ClusterId winner, ClusterId neighbor,
                      double loss = 0.0, std::size_t t = 0);

/// Forward-pass state machine. Keeps a per-cluster loss table so that each merge only
/// re-evaluates clusters whose neighborhoods changed; selections are identical to
/// select_merge.
class AgglomerativeEngine {
 public:
  AgglomerativeEngine(const SampleAffinityGraph& graph, Partition partition, AffinityMode mode,
                      std::size_t kc, double lambda);

  MergeChoice select() const;
  MergeStep step();
  /// Merges until `target` clusters remain or `max_steps` merges were made.
  std::vector<MergeStep> run(std::size_t target, std::size_t max_steps = static_cast<std::size_t>(-1));

  /// Swaps in a rebuilt sample graph and recomputes every cluster affinity for the
  /// current partition. The graph must outlive the engine.
  void rebind(const SampleAffinityGraph& graph);

  const Partition& partition() const noexcept { return partition_; }
  const ClusterAffinityCache& cache() const noexcept { return cache_; }
  std::size_t timestep() const noexcept { return t_; }

 private:
  void refresh(ClusterId c);
  void refresh_all();

  const SampleAffinityGraph* graph_;
  Partition partition_;
  ClusterAffinityCache cache_;
  AffinityMode mode_;
  std::size_t kc_;
  double lambda_;
  std::size_t t_ = 0;
  std::vector<double> loss_;
  std::set<std::pair<double, ClusterId>> order_;
};

struct AgglomerativeOptions {
  std::size_t ks = 20;
  double a = 1.0;
  std::size_t kc = 5;
  double lambda = 1.0;
  std::size_t target_nc = 1;
  AffinityMode mode = AffinityMode::exact();
  unsigned threads = 1;
};

struct AgglomerativeResult {
  Partition partition;
  std::vector<MergeStep> steps;
  std::size_t initial_clusters = 0;
};

/// Plain agglomerative clustering on fixed features: graph, 1-NN initialization,
/// greedy merges down to target_nc. Throws ConfigError when target_nc is zero or exceeds
/// the initial cluster count.
AgglomerativeResult run_agglomerative(const Matrix& features, const AgglomerativeOptions& options);

/// Same, on a prebuilt graph.
AgglomerativeResult run_agglomerative(const SampleAffinityGraph& graph, const AgglomerativeOptions& options);

}  // namespace jule
