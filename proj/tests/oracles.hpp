#pragma once

// Slow, dense reference implementations used only by tests. Nothing here calls the
// library code it is checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;
using Points = std::vector<std::vector<double>>;
using Members = std::vector<std::vector<std::uint32_t>>;  // empty list == dead cluster

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// W(i,j) = exp(-d^2/sigma2) for the ks nearest j of i (ties by lower j), dense.
inline Dense affinity_matrix(const Points& x, std::size_t ks, double a, double* sigma2_out = nullptr) {
  const std::size_t n = x.size();
  ks = std::min(ks, n - 1);
  std::vector<std::vector<std::size_t>> nn(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) all.push_back({sqdist(x[i], x[j]), j});
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < ks; ++r) {
      nn[i].push_back(all[r].second);
      total += all[r].first;
    }
  }
  const double sigma2 = a * total / static_cast<double>(n * ks);
  if (sigma2_out) *sigma2_out = sigma2;
  Dense w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nn[i]) w[i][j] = std::exp(-sqdist(x[i], x[j]) / sigma2);
  return w;
}

/// A(Cj -> Ci) = 1/|Ci|^2 * 1' W[Ci,Cj] W[Cj,Ci] 1, by explicit matrix products.
inline double directed(const Dense& w, const std::vector<std::uint32_t>& ci, const std::vector<std::uint32_t>& cj) {
  // P = W[Ci,Cj] (|ci| x |cj|), Q = W[Cj,Ci] (|cj| x |ci|), sum of all entries of P*Q
  double s = 0.0;
  for (std::size_t r = 0; r < ci.size(); ++r)
    for (std::size_t c = 0; c < ci.size(); ++c) {
      double pq = 0.0;
      for (std::size_t m = 0; m < cj.size(); ++m) pq += w[ci[r]][cj[m]] * w[cj[m]][ci[c]];
      s += pq;
    }
  const double size = static_cast<double>(ci.size());
  return s / (size * size);
}

inline double symmetric(const Dense& w, const std::vector<std::uint32_t>& ci, const std::vector<std::uint32_t>& cj) {
  return directed(w, ci, cj) + directed(w, cj, ci);
}

struct Choice {
  std::uint32_t winner = 0;
  std::uint32_t neighbor = 0;
  double loss = 0.0;
};

/// Merge loss of every live cluster computed from scratch, then the minimum (ties by
/// lower id). Neighbor lists sort by descending affinity, ties by lower id.
inline Choice select(const Dense& w, const Members& members, std::size_t kc, double lambda,
                     std::vector<double>* losses = nullptr) {
  std::vector<std::uint32_t> live;
  for (std::uint32_t c = 0; c < members.size(); ++c)
    if (!members[c].empty()) live.push_back(c);
  const std::size_t kp = std::min(kc, live.size() - 1);
  Choice best;
  bool found = false;
  if (losses) losses->assign(members.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::uint32_t c : live) {
    std::vector<std::pair<double, std::uint32_t>> nb;
    for (std::uint32_t o : live)
      if (o != c) nb.push_back({-symmetric(w, members[c], members[o]), o});
    std::sort(nb.begin(), nb.end());
    const double a1 = -nb[0].first;
    double loss = -a1;
    if (kp >= 2) {
      double gap = 0.0;
      for (std::size_t k = 1; k < kp; ++k) gap += a1 - (-nb[k].first);
      loss -= lambda / static_cast<double>(kp - 1) * gap;
    }
    if (losses) (*losses)[c] = loss;
    if (!found || loss < best.loss) {
      best = {c, nb[0].second, loss};
      found = true;
    }
  }
  return best;
}

/// Pair with the largest symmetric affinity (lower ids first on ties).
inline std::pair<std::uint32_t, std::uint32_t> argmax_pair(const Dense& w, const Members& members) {
  double best = -1.0;
  std::pair<std::uint32_t, std::uint32_t> pair{0, 0};
  for (std::uint32_t a = 0; a < members.size(); ++a) {
    if (members[a].empty()) continue;
    for (std::uint32_t b = a + 1; b < members.size(); ++b) {
      if (members[b].empty()) continue;
      const double v = symmetric(w, members[a], members[b]);
      if (v > best) {
        best = v;
        pair = {a, b};
      }
    }
  }
  return pair;
}

inline void merge(Members& members, std::uint32_t a, std::uint32_t b) {
  const std::uint32_t keep = std::min(a, b), drop = std::max(a, b);
  members[keep].insert(members[keep].end(), members[drop].begin(), members[drop].end());
  std::sort(members[keep].begin(), members[keep].end());
  members[drop].clear();
}

/// Components of the undirected first-neighbor graph, numbered by smallest member.
inline Members first_neighbor_components(const Dense& w) {
  const std::size_t n = w.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    // first neighbor = largest weight in row i (ties by lower j); rows hold exp(-d^2)
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && w[i][j] > 0.0 && (best == n || w[i][j] > w[i][best])) best = j;
    if (best < n) {
      adj[i].push_back(best);
      adj[best].push_back(i);
    }
  }
  std::vector<int> comp(n, -1);
  Members out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      out[id].push_back(static_cast<std::uint32_t>(v));
      for (std::size_t u : adj[v])
        if (comp[u] < 0) {
          comp[u] = id;
          stack.push_back(u);
        }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

/// Best matched fraction by trying every assignment of predicted clusters to classes.
inline double exhaustive_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::vector<int> pv = pred, tv = truth;
  std::sort(pv.begin(), pv.end());
  pv.erase(std::unique(pv.begin(), pv.end()), pv.end());
  std::sort(tv.begin(), tv.end());
  tv.erase(std::unique(tv.begin(), tv.end()), tv.end());
  const std::size_t k = std::max(pv.size(), tv.size());
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t s = 0; s < pred.size(); ++s) {
      const auto p = static_cast<std::size_t>(std::lower_bound(pv.begin(), pv.end(), pred[s]) - pv.begin());
      const auto t = static_cast<std::size_t>(std::lower_bound(tv.begin(), tv.end(), truth[s]) - tv.begin());
      if (perm[p] == t) ++hit;
    }
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

/// Period lengths by direct simulation of n_p = ceil(eta * n_c), truncated at the target.
inline std::vector<std::size_t> schedule(std::size_t initial, std::size_t target, double eta) {
  std::vector<std::size_t> out;
  std::size_t live = initial;
  while (live > target) {
    std::size_t n = 0;
    while (static_cast<double>(n) < eta * static_cast<double>(live) - 1e-9) ++n;  // ceil by counting
    n = std::min(std::max<std::size_t>(n, 1), live - target);
    out.push_back(n);
    live -= n;
  }
  return out;
}

inline Points random_points(std::size_t n, std::size_t d, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Points p(n, std::vector<double>(d));
  for (auto& row : p)
    for (auto& v : row) v = normal(gen);
  return p;
}

}  // namespace oracle
