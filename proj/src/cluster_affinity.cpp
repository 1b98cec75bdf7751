#include "jule/cluster_affinity.hpp"

#include <algorithm>
#include <sstream>

namespace jule {

namespace {

std::vector<SampleId> sorted_copy(std::span<const SampleId> ids) {
  std::vector<SampleId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool contains(const std::vector<SampleId>& sorted, SampleId s) {
  return std::binary_search(sorted.begin(), sorted.end(), s);
}

const ClusterLink* find_link(const std::vector<ClusterLink>& links, ClusterId other) {
  const auto it = std::lower_bound(links.begin(), links.end(), other,
                                   [](const ClusterLink& l, ClusterId id) { return l.other < id; });
  return it != links.end() && it->other == other ? &*it : nullptr;
}

}  // namespace

std::string AffinityMode::describe() const {
  switch (kind) {
    case Kind::Exact:
      return "exact";
    case Kind::SizeWeighted:
      return "size-weighted";
    case Kind::Alpha: {
      std::ostringstream s;
      s << "alpha=" << alpha;
      return s.str();
    }
  }
  return "unknown";
}

double directed_affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                         std::span<const SampleId> cj) {
  if (ci.empty() || cj.empty()) throw LogicError("affinity of an empty cluster");
  const auto target = sorted_copy(ci);
  const auto source = sorted_copy(cj);
  std::vector<SampleId> common;
  std::set_intersection(target.begin(), target.end(), source.begin(), source.end(),
                        std::back_inserter(common));
  if (!common.empty()) throw LogicError("affinity between overlapping clusters");

  // 1' W[Ci,Cj] W[Cj,Ci] 1 = sum over b in Cj of (sum_{a in Ci} W(a,b)) (sum_{a in Ci} W(b,a))
  double total = 0.0;
  for (SampleId b : source) {
    double into_b = 0.0;
    const auto in_ids = graph.in_neighbors(b);
    const auto in_w = graph.in_weights(b);
    for (std::size_t r = 0; r < in_ids.size(); ++r)
      if (contains(target, in_ids[r])) into_b += in_w[r];
    if (into_b == 0.0) continue;
    double from_b = 0.0;
    const auto out_ids = graph.neighbors(b);
    const auto out_w = graph.weights(b);
    for (std::size_t r = 0; r < out_ids.size(); ++r)
      if (contains(target, out_ids[r])) from_b += out_w[r];
    total += into_b * from_b;
  }
  const double size = static_cast<double>(target.size());
  return total / (size * size);
}

double affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                std::span<const SampleId> cj) {
  return directed_affinity(graph, cj, ci) + directed_affinity(graph, ci, cj);
}

double size_weighted_to_affinity(double to_m, double to_n, std::size_t size_m,
                                 std::size_t size_n) noexcept {
  const double m = static_cast<double>(size_m);
  const double n = static_cast<double>(size_n);
  return (m * to_m + n * to_n) / (m + n);
}

double alpha_to_affinity(double to_m, double to_n, std::size_t size_m, std::size_t size_n,
                         double alpha) noexcept {
  const double m = static_cast<double>(size_m);
  const double n = static_cast<double>(size_n);
  const double total = m + n;
  return (1.0 + alpha) * (m * m * to_m + n * n * to_n) / (total * total);
}

double merged_to_affinity(const SampleAffinityGraph& graph, std::span<const SampleId> ci,
                          std::span<const SampleId> cm, std::span<const SampleId> cn,
                          AffinityMode mode) {
  if (mode.kind == AffinityMode::Kind::Exact) {
    std::vector<SampleId> merged(cm.begin(), cm.end());
    merged.insert(merged.end(), cn.begin(), cn.end());
    return directed_affinity(graph, merged, ci);
  }
  const double to_m = directed_affinity(graph, cm, ci);
  const double to_n = directed_affinity(graph, cn, ci);
  if (mode.kind == AffinityMode::Kind::SizeWeighted)
    return size_weighted_to_affinity(to_m, to_n, cm.size(), cn.size());
  return alpha_to_affinity(to_m, to_n, cm.size(), cn.size(), mode.alpha);
}

double merged_affinity_alpha(double from_m, double from_n, double to_m, double to_n,
                             std::size_t size_m, std::size_t size_n, double alpha) noexcept {
  return merged_from_affinity(from_m, from_n) + alpha_to_affinity(to_m, to_n, size_m, size_n, alpha);
}

// ---------------------------------------------------------------------------

ClusterAffinityCache::ClusterAffinityCache(const SampleAffinityGraph& graph,
                                           const Partition& partition, AffinityMode mode)
    : mode_(mode) {
  if (partition.sample_count() != graph.size())
    throw LogicError("partition and graph disagree on the sample count");
  const std::size_t capacity = partition.id_capacity();
  sizes_.assign(capacity, 0);
  links_.assign(capacity, {});
  for (ClusterId c = 0; c < capacity; ++c) sizes_[c] = partition.size_of(c);
  live_ = partition.live_count();

  u_.assign(graph.size(), 0.0);
  v_.assign(graph.size(), 0.0);
  acc_.assign(capacity, 0.0);
  sample_mark_.assign(graph.size(), 0);
  cluster_mark_.assign(capacity, 0);

  for (ClusterId target = 0; target < capacity; ++target) {
    if (sizes_[target] == 0) continue;
    for (const auto& [from, value] : incoming_exact(graph, partition, target)) {
      // The touch relation is symmetric, so each pair is visited from both ends and
      // both links end up with both fields filled.
      links_[target].push_back({from, 0.0, value});
      links_[from].push_back({target, value, 0.0});
    }
  }
  for (auto& list : links_) {
    std::stable_sort(list.begin(), list.end(),
                     [](const ClusterLink& a, const ClusterLink& b) { return a.other < b.other; });
    std::vector<ClusterLink> combined;
    combined.reserve(list.size() / 2 + 1);
    for (const auto& l : list) {
      if (!combined.empty() && combined.back().other == l.other) {
        combined.back().out += l.out;
        combined.back().in += l.in;
      } else {
        combined.push_back(l);
      }
    }
    list = std::move(combined);
  }
}

std::vector<ClusterAffinityCache::Incoming> ClusterAffinityCache::incoming_exact(
    const SampleAffinityGraph& graph, const Partition& partition, ClusterId target) {
  touched_.clear();
  const auto members = partition.members(target);
  auto touch = [&](SampleId b) {
    if (!sample_mark_[b]) {
      sample_mark_[b] = 1;
      touched_.push_back(b);
    }
  };
  for (SampleId a : members) {
    const auto out_ids = graph.neighbors(a);
    const auto out_w = graph.weights(a);
    for (std::size_t r = 0; r < out_ids.size(); ++r) {
      const SampleId b = out_ids[r];
      if (partition.cluster_of(b) == target) continue;
      touch(b);
      u_[b] += out_w[r];  // W(a, b)
    }
    const auto in_ids = graph.in_neighbors(a);
    const auto in_w = graph.in_weights(a);
    for (std::size_t r = 0; r < in_ids.size(); ++r) {
      const SampleId b = in_ids[r];
      if (partition.cluster_of(b) == target) continue;
      touch(b);
      v_[b] += in_w[r];  // W(b, a)
    }
  }

  acc_ids_.clear();
  for (SampleId b : touched_) {
    const ClusterId c = partition.cluster_of(b);
    if (!cluster_mark_[c]) {
      cluster_mark_[c] = 1;
      acc_ids_.push_back(c);
    }
    acc_[c] += u_[b] * v_[b];
    u_[b] = 0.0;
    v_[b] = 0.0;
    sample_mark_[b] = 0;
  }
  std::sort(acc_ids_.begin(), acc_ids_.end());

  const double size = static_cast<double>(members.size());
  std::vector<Incoming> result;
  result.reserve(acc_ids_.size());
  for (ClusterId c : acc_ids_) {
    result.push_back({c, acc_[c] / (size * size)});
    acc_[c] = 0.0;
    cluster_mark_[c] = 0;
  }
  return result;
}

double ClusterAffinityCache::directed(ClusterId from, ClusterId to) const {
  if (!is_live(from) || !is_live(to)) throw LogicError("affinity lookup on a dead cluster");
  const ClusterLink* link = find_link(links_[from], to);
  return link ? link->out : 0.0;
}

double ClusterAffinityCache::affinity(ClusterId a, ClusterId b) const {
  if (!is_live(a) || !is_live(b)) throw LogicError("affinity lookup on a dead cluster");
  const ClusterLink* link = find_link(links_[a], b);
  return link ? link->symmetric() : 0.0;
}

std::vector<ClusterId> ClusterAffinityCache::live_ids() const {
  std::vector<ClusterId> ids;
  ids.reserve(live_);
  for (std::size_t c = 0; c < sizes_.size(); ++c)
    if (sizes_[c] > 0) ids.push_back(static_cast<ClusterId>(c));
  return ids;
}

void ClusterAffinityCache::merge(const SampleAffinityGraph& graph, const Partition& merged,
                                 ClusterId survivor, ClusterId absorbed) {
  if (survivor == absorbed || !is_live(survivor) || !is_live(absorbed))
    throw LogicError("cache merge on dead or identical clusters");
  const std::size_t size_s = sizes_[survivor];
  const std::size_t size_a = sizes_[absorbed];
  if (merged.size_of(survivor) != size_s + size_a || merged.is_live(absorbed))
    throw LogicError("cache merge called before the partition merge");

  const auto& ls = links_[survivor];
  const auto& la = links_[absorbed];

  // Union of both neighborhoods, minus the pair itself, ordered by id.
  struct Parts {
    ClusterId other;
    double from_s = 0.0, from_a = 0.0, to_s = 0.0, to_a = 0.0;
  };
  std::vector<Parts> parts;
  parts.reserve(ls.size() + la.size());
  std::size_t p = 0, q = 0;
  while (p < ls.size() || q < la.size()) {
    const ClusterId next = (q >= la.size() || (p < ls.size() && ls[p].other <= la[q].other))
                               ? ls[p].other
                               : la[q].other;
    Parts entry{next};
    if (p < ls.size() && ls[p].other == next) {
      entry.from_s = ls[p].out;
      entry.to_s = ls[p].in;
      ++p;
    }
    if (q < la.size() && la[q].other == next) {
      entry.from_a = la[q].out;
      entry.to_a = la[q].in;
      ++q;
    }
    if (next != survivor && next != absorbed) parts.push_back(entry);
  }

  std::vector<Incoming> exact_in;
  if (mode_.kind == AffinityMode::Kind::Exact) exact_in = incoming_exact(graph, merged, survivor);

  std::vector<ClusterLink> fresh;
  fresh.reserve(parts.size());
  std::size_t e = 0;
  for (const auto& part : parts) {
    double to_merged = 0.0;
    switch (mode_.kind) {
      case AffinityMode::Kind::Exact:
        while (e < exact_in.size() && exact_in[e].from < part.other) ++e;
        if (e < exact_in.size() && exact_in[e].from == part.other) to_merged = exact_in[e].value;
        break;
      case AffinityMode::Kind::SizeWeighted:
        to_merged = size_weighted_to_affinity(part.to_s, part.to_a, size_s, size_a);
        break;
      case AffinityMode::Kind::Alpha:
        to_merged = alpha_to_affinity(part.to_s, part.to_a, size_s, size_a, mode_.alpha);
        break;
    }
    const double from_merged = merged_from_affinity(part.from_s, part.from_a);
    fresh.push_back({part.other, from_merged, to_merged});

    auto& other_links = links_[part.other];
    std::erase_if(other_links, [&](const ClusterLink& l) { return l.other == survivor || l.other == absorbed; });
    const ClusterLink mirrored{survivor, to_merged, from_merged};
    other_links.insert(std::lower_bound(other_links.begin(), other_links.end(), survivor,
                                        [](const ClusterLink& l, ClusterId id) { return l.other < id; }),
                       mirrored);
  }

  links_[survivor] = std::move(fresh);
  links_[absorbed].clear();
  links_[absorbed].shrink_to_fit();
  sizes_[survivor] = size_s + size_a;
  sizes_[absorbed] = 0;
  --live_;
}

}  // namespace jule
