#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jule/agglomerative.hpp"
#include "jule/cluster_affinity.hpp"
#include "jule/common.hpp"
#include "jule/embedding.hpp"
#include "jule/partition.hpp"

namespace jule {

struct JuleConfig {
  std::size_t ks = 20;
  double a = 1.0;
  std::size_t kc = 5;
  double lambda = 1.0;
  double gamma = 2.0;
  double margin = 0.2;
  double eta = 0.9;  ///< unrolling rate, 0 < eta <= 1
  std::size_t target_nc = 1;
  std::size_t epochs_per_period = 20;
  std::size_t batch_size = 128;
  /// Layer widths after the input layer; the net is [d_in, dims...].
  std::vector<std::size_t> dims = {160};
  std::size_t per_anchor = 0;  ///< triplets per anchor; 0 means kc
  SgdConfig sgd;
  AffinityMode mode = AffinityMode::exact();
  bool final_train = true;  ///< train once more after the last merge period
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Receives one progress line per phase when set.
  std::function<void(std::string_view)> progress;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  AgglomerativeOptions agglomerative() const;
};

struct PeriodRecord {
  std::size_t index = 0;
  std::size_t t_start = 0;  ///< first timestep of the period (1-based)
  std::size_t t_end = 0;    ///< last timestep; t_end - t_start + 1 == merges
  std::size_t merges = 0;
  std::size_t clusters = 0;  ///< live clusters after the period's merges
  bool trained = false;
  std::vector<double> loss_curve;  ///< mean triplet loss per epoch of the following training
  std::optional<double> nmi;       ///< against ground truth, when labels exist
  std::optional<double> acc;
  double merge_seconds = 0.0;
  double train_seconds = 0.0;
};

struct RunTrace {
  std::size_t sample_count = 0;
  std::size_t initial_clusters = 0;
  std::vector<PeriodRecord> periods;
  std::vector<MergeStep> steps;
  bool final_train = true;
  /// Training pass after the last period (present when final_train is set).
  std::optional<PeriodRecord> final_pass;
  Partition partition;  ///< directly produced partition (SF)
  Matrix features;      ///< final embedded features
  EmbeddingNet net;     ///< final net
};

/// Period lengths n_p = ceil(eta * n_c) applied to the current cluster count, the last
/// one truncated so the counts end exactly at `target`.
std::vector<std::size_t> period_schedule(std::size_t initial, std::size_t target, double eta);

/// Joint loop: merge for one period on the current features, retrain the embedder on
/// the resulting partition, re-embed and rebuild the graph, repeat down to target_nc.
/// Labels, when given, are only used for per-period NMI/AC in the trace.
/// Throws ConfigError when target_nc exceeds the initial cluster count.
RunTrace run_jule(const Matrix& raw, const JuleConfig& config, std::span<const int> labels = {});

/// Re-clusters from a fresh initialization on the net's embedding of the raw inputs.
/// When the fresh initialization already has no more than target_nc clusters it is
/// returned unchanged.
AgglomerativeResult rerun_final_clustering(const EmbeddingNet& net, const Matrix& raw, const JuleConfig& config);

struct VisualizationResult {
  Matrix embedding;  ///< n x out_dim, not normalized
  RunTrace trace;
};

/// Same loop, but merges always read the graph of the raw inputs; the net is
/// [d_in, dims..., out_dim] without output normalization.
VisualizationResult run_visualization(const Matrix& raw, const JuleConfig& config, std::size_t out_dim,
                                      std::span<const int> labels = {});

/// Trace as JSON. Per-period timings are written only when `with_timings` is set.
std::string trace_json(const RunTrace& trace, bool with_timings = true);

/// Labels of a partition numbered densely (see Partition::dense_labels).
inline std::vector<int> labels_of(const Partition& partition) { return partition.dense_labels(); }

}  // namespace jule
