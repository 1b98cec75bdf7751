#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jule/common.hpp"
#include "jule/partition.hpp"
#include "oracles.hpp"

namespace testing_support {

inline jule::Matrix to_matrix(const oracle::Points& p) {
  jule::Matrix m(p.size(), p.empty() ? 0 : p[0].size());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].size(); ++j) m(i, j) = p[i][j];
  return m;
}

inline oracle::Members members_of(const jule::Partition& p) {
  oracle::Members m(p.id_capacity());
  for (jule::ClusterId c = 0; c < p.id_capacity(); ++c) {
    const auto s = p.members(c);
    m[c].assign(s.begin(), s.end());
  }
  return m;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("jule_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
