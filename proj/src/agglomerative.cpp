#include "jule/agglomerative.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace jule {

namespace {

struct Ranked {
  double value;
  ClusterId id;
};

// Positive-affinity neighbors of c, best first (ties by id), at most `limit` of them.
std::vector<Ranked> top_positive(const ClusterAffinityCache& cache, ClusterId c, std::size_t limit) {
  std::vector<Ranked> ranked;
  for (const auto& link : cache.links(c)) {
    const double a = link.symmetric();
    if (a > 0.0) ranked.push_back({a, link.other});
  }
  const auto better = [](const Ranked& x, const Ranked& y) {
    return x.value != y.value ? x.value > y.value : x.id < y.id;
  };
  if (ranked.size() > limit) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(limit), ranked.end(), better);
    ranked.resize(limit);
  } else {
    std::sort(ranked.begin(), ranked.end(), better);
  }
  return ranked;
}

std::size_t available_neighbors(const ClusterAffinityCache& cache, std::size_t kc) {
  return std::min(kc, cache.live_count() - 1);
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Partition init_clusters(const SampleAffinityGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  if (graph.ks() > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const int a = find_root(parent, static_cast<int>(i));
      const int b = find_root(parent, static_cast<int>(graph.neighbors(static_cast<SampleId>(i))[0]));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<ClusterId> component_id(n, static_cast<ClusterId>(-1));
  std::vector<ClusterId> assignment(n);
  ClusterId next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int root = find_root(parent, static_cast<int>(i));
    if (component_id[root] == static_cast<ClusterId>(-1)) component_id[root] = next++;
    assignment[i] = component_id[root];
  }
  return Partition(std::move(assignment));
}

std::vector<ClusterId> neighbor_clusters(const ClusterAffinityCache& cache, ClusterId c, std::size_t kc) {
  if (!cache.is_live(c)) throw LogicError("neighbor query on dead cluster " + std::to_string(c));
  const std::size_t want = available_neighbors(cache, kc);
  std::vector<ClusterId> result;
  result.reserve(want);
  for (const auto& r : top_positive(cache, c, want)) result.push_back(r.id);
  for (ClusterId id = 0; result.size() < want && id < cache.id_capacity(); ++id) {
    if (id == c || !cache.is_live(id)) continue;
    if (cache.affinity(c, id) > 0.0) continue;  // already ranked (or beyond the top kc)
    result.push_back(id);
  }
  return result;
}

double merge_loss(const ClusterAffinityCache& cache, ClusterId c, std::size_t kc, double lambda) {
  if (!cache.is_live(c)) throw LogicError("merge loss of dead cluster " + std::to_string(c));
  if (cache.live_count() < 2 || kc == 0) throw LogicError("merge loss needs at least one neighbor cluster");
  const std::size_t count = available_neighbors(cache, kc);
  const auto top = top_positive(cache, c, count);
  const double nearest = top.empty() ? 0.0 : top.front().value;
  if (count < 2) return -nearest;
  double gap = 0.0;
  for (std::size_t k = 1; k < count; ++k) gap += nearest - (k < top.size() ? top[k].value : 0.0);
  return -nearest - lambda / static_cast<double>(count - 1) * gap;
}

MergeChoice select_merge(const ClusterAffinityCache& cache, std::size_t kc, double lambda) {
  if (cache.live_count() < 2) throw LogicError("selecting a merge needs two live clusters");
  bool found = false;
  MergeChoice best;
  for (ClusterId c : cache.live_ids()) {
    const double loss = merge_loss(cache, c, kc, lambda);
    if (!found || loss < best.loss) {
      best = {c, 0, loss};
      found = true;
    }
  }
  best.neighbor = neighbor_clusters(cache, best.winner, 1).front();
  return best;
}

MergeStep apply_merge(Partition& partition, ClusterAffinityCache& cache, const SampleAffinityGraph& graph,
                      ClusterId winner, ClusterId neighbor, double loss, std::size_t t) {
  if (winner == neighbor || !partition.is_live(winner) || !partition.is_live(neighbor))
    throw LogicError("invalid merge " + std::to_string(winner) + " <- " + std::to_string(neighbor));
  const ClusterId survivor = std::min(winner, neighbor);
  const ClusterId absorbed = std::max(winner, neighbor);
  partition.absorb(survivor, absorbed);
  cache.merge(graph, partition, survivor, absorbed);
  return {t, winner, neighbor, loss, partition.live_count()};
}

// ---------------------------------------------------------------------------

AgglomerativeEngine::AgglomerativeEngine(const SampleAffinityGraph& graph, Partition partition,
                                         AffinityMode mode, std::size_t kc, double lambda)
    : graph_(&graph),
      partition_(std::move(partition)),
      cache_(graph, partition_, mode),
      mode_(mode),
      kc_(kc),
      lambda_(lambda) {
  if (kc_ == 0) throw ConfigError("Kc must be positive");
  refresh_all();
}

void AgglomerativeEngine::refresh(ClusterId c) {
  order_.erase({loss_[c], c});
  loss_[c] = merge_loss(cache_, c, kc_, lambda_);
  order_.insert({loss_[c], c});
}

void AgglomerativeEngine::refresh_all() {
  order_.clear();
  loss_.assign(partition_.id_capacity(), 0.0);
  if (partition_.live_count() < 2) return;
  for (ClusterId c : partition_.live_ids()) {
    loss_[c] = merge_loss(cache_, c, kc_, lambda_);
    order_.insert({loss_[c], c});
  }
}

void AgglomerativeEngine::rebind(const SampleAffinityGraph& graph) {
  graph_ = &graph;
  cache_ = ClusterAffinityCache(graph, partition_, mode_);
  refresh_all();
}

MergeChoice AgglomerativeEngine::select() const {
  if (partition_.live_count() < 2) throw LogicError("selecting a merge needs two live clusters");
  const auto& [loss, winner] = *order_.begin();
  return {winner, neighbor_clusters(cache_, winner, 1).front(), loss};
}

MergeStep AgglomerativeEngine::step() {
  const MergeChoice choice = select();
  const ClusterId survivor = std::min(choice.winner, choice.neighbor);
  const ClusterId absorbed = std::max(choice.winner, choice.neighbor);
  const std::size_t before = partition_.live_count();

  order_.erase({loss_[absorbed], absorbed});
  const MergeStep record = apply_merge(partition_, cache_, *graph_, choice.winner, choice.neighbor, choice.loss, ++t_);

  if (partition_.live_count() < 2) {
    order_.clear();
  } else if (std::min(kc_, before - 1) != std::min(kc_, partition_.live_count() - 1)) {
    refresh_all();  // the neighbor count K' shrank for everyone
  } else {
    refresh(survivor);
    for (const auto& link : cache_.links(survivor)) refresh(link.other);
  }
  return record;
}

std::vector<MergeStep> AgglomerativeEngine::run(std::size_t target, std::size_t max_steps) {
  std::vector<MergeStep> steps;
  while (partition_.live_count() > target && steps.size() < max_steps) steps.push_back(step());
  return steps;
}

AgglomerativeResult run_agglomerative(const SampleAffinityGraph& graph, const AgglomerativeOptions& options) {
  if (options.target_nc == 0) throw ConfigError("target cluster count must be at least 1");
  AgglomerativeResult result;
  Partition initial = init_clusters(graph);
  result.initial_clusters = initial.live_count();
  if (options.target_nc > result.initial_clusters)
    throw ConfigError("target cluster count " + std::to_string(options.target_nc) +
                      " exceeds the " + std::to_string(result.initial_clusters) + " initial clusters");
  AgglomerativeEngine engine(graph, std::move(initial), options.mode, options.kc, options.lambda);
  result.steps = engine.run(options.target_nc);
  result.partition = engine.partition();
  return result;
}

AgglomerativeResult run_agglomerative(const Matrix& features, const AgglomerativeOptions& options) {
  const SampleAffinityGraph graph = sample_affinity(features, options.ks, options.a, options.threads);
  return run_agglomerative(graph, options);
}

}  // namespace jule
