#include "jule/partition.hpp"

#include <algorithm>
#include <string>

namespace jule {

Partition::Partition(std::vector<ClusterId> assignment) : assignment_(std::move(assignment)) {
  ClusterId max_id = 0;
  for (ClusterId c : assignment_) max_id = std::max(max_id, c);
  members_.resize(assignment_.empty() ? 0 : std::size_t{max_id} + 1);
  for (std::size_t s = 0; s < assignment_.size(); ++s)
    members_[assignment_[s]].push_back(static_cast<SampleId>(s));
  live_ = static_cast<std::size_t>(
      std::count_if(members_.begin(), members_.end(), [](const auto& m) { return !m.empty(); }));
}

std::vector<ClusterId> Partition::live_ids() const {
  std::vector<ClusterId> ids;
  ids.reserve(live_);
  for (std::size_t c = 0; c < members_.size(); ++c)
    if (!members_[c].empty()) ids.push_back(static_cast<ClusterId>(c));
  return ids;
}

void Partition::absorb(ClusterId survivor, ClusterId absorbed) {
  if (survivor == absorbed || !is_live(survivor) || !is_live(absorbed))
    throw LogicError("cannot merge cluster " + std::to_string(absorbed) + " into " +
                     std::to_string(survivor));
  auto& into = members_[survivor];
  auto& from = members_[absorbed];
  for (SampleId s : from) assignment_[s] = survivor;
  const auto middle = into.insert(into.end(), from.begin(), from.end());
  std::inplace_merge(into.begin(), middle, into.end());
  from.clear();
  from.shrink_to_fit();
  --live_;
}

void Partition::check_invariants() const {
  std::size_t total = 0;
  std::size_t live = 0;
  for (std::size_t c = 0; c < members_.size(); ++c) {
    const auto& m = members_[c];
    if (m.empty()) continue;
    ++live;
    total += m.size();
    if (!std::is_sorted(m.begin(), m.end()) || std::adjacent_find(m.begin(), m.end()) != m.end())
      throw LogicError("member list of cluster " + std::to_string(c) + " is not strictly sorted");
    for (SampleId s : m)
      if (s >= assignment_.size() || assignment_[s] != c)
        throw LogicError("sample " + std::to_string(s) + " listed in cluster " + std::to_string(c) +
                         " but assigned elsewhere");
  }
  if (total != assignment_.size()) throw LogicError("member lists do not cover every sample");
  if (live != live_) throw LogicError("live cluster count out of sync");
  if (!assignment_.empty() && live_ == 0) throw LogicError("no live clusters");
}

std::vector<int> Partition::dense_labels() const {
  std::vector<int> remap(members_.size(), -1);
  int next = 0;
  for (std::size_t c = 0; c < members_.size(); ++c)
    if (!members_[c].empty()) remap[c] = next++;
  std::vector<int> labels(assignment_.size());
  for (std::size_t s = 0; s < assignment_.size(); ++s) labels[s] = remap[assignment_[s]];
  return labels;
}

}  // namespace jule
