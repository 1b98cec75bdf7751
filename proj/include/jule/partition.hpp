#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jule/common.hpp"

namespace jule {

/// Cluster assignment of n samples. Cluster ids index a fixed id space; merged-away
/// ids stay dead forever. Member lists are kept sorted.
class Partition {
 public:
  Partition() = default;
  /// Ids may be sparse; the id space is [0, max id].
  explicit Partition(std::vector<ClusterId> assignment);

  std::size_t sample_count() const noexcept { return assignment_.size(); }
  std::size_t id_capacity() const noexcept { return members_.size(); }
  std::size_t live_count() const noexcept { return live_; }

  bool is_live(ClusterId c) const noexcept { return c < members_.size() && !members_[c].empty(); }
  std::span<const SampleId> members(ClusterId c) const { return members_.at(c); }
  std::size_t size_of(ClusterId c) const { return members_.at(c).size(); }
  ClusterId cluster_of(SampleId s) const { return assignment_.at(s); }
  std::span<const ClusterId> assignment() const noexcept { return assignment_; }
  std::vector<ClusterId> live_ids() const;

  /// Moves every member of `absorbed` into `survivor`; `absorbed` becomes dead.
  void absorb(ClusterId survivor, ClusterId absorbed);

  /// Throws LogicError if member lists and the assignment vector disagree.
  void check_invariants() const;

  /// Labels 0..live_count-1, numbered by ascending cluster id.
  std::vector<int> dense_labels() const;

 private:
  std::vector<ClusterId> assignment_;
  std::vector<std::vector<SampleId>> members_;
  std::size_t live_ = 0;
};

}  // namespace jule
