#include "jule/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace jule {

namespace {

std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& distinct) {
  std::map<int, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
    out[i] = it->second;
  }
  distinct = ids.size();
  return out;
}

double entropy(const std::vector<std::size_t>& totals, double n) {
  double h = 0.0;
  for (std::size_t c : totals) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

ContingencyTable::ContingencyTable(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw LogicError("label vectors differ in length (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  std::size_t ka = 0, kb = 0;
  const auto ca = compact(a, ka);
  const auto cb = compact(b, kb);
  counts_.assign(ka * kb, 0);
  row_totals_.assign(ka, 0);
  col_totals_.assign(kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++counts_[ca[i] * kb + cb[i]];
    ++row_totals_[ca[i]];
    ++col_totals_[cb[i]];
  }
  total_ = a.size();
}

double nmi(std::span<const int> a, std::span<const int> b) {
  const ContingencyTable table(a, b);
  if (table.total() == 0) throw LogicError("nmi of empty labelings");
  const double n = static_cast<double>(table.total());
  const double ha = entropy(table.row_totals(), n);
  const double hb = entropy(table.col_totals(), n);
  if (ha <= 0.0 || hb <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const std::size_t nrc = table.count(r, c);
      if (nrc == 0) continue;
      const double joint = static_cast<double>(nrc);
      mi += joint / n *
            std::log(joint * n / (static_cast<double>(table.row_totals()[r]) *
                                  static_cast<double>(table.col_totals()[c])));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

std::vector<std::size_t> max_weight_assignment(std::span<const double> weights, std::size_t k) {
  if (weights.size() != k * k) throw LogicError("assignment matrix must be square");
  if (k == 0) return {};
  // Shortest augmenting path with potentials on cost = -weight; 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  std::vector<char> used(k + 1);
  for (std::size_t i = 1; i <= k; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = -weights[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(k);
  for (std::size_t j = 1; j <= k; ++j) match[p[j] - 1] = j - 1;
  return match;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  const ContingencyTable table(pred, truth);
  if (table.total() == 0) return 0.0;
  const std::size_t k = std::max(table.rows(), table.cols());
  std::vector<double> weights(k * k, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r)
    for (std::size_t c = 0; c < table.cols(); ++c) weights[r * k + c] = static_cast<double>(table.count(r, c));
  const auto match = max_weight_assignment(weights, k);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < table.rows(); ++r)
    if (match[r] < table.cols()) correct += table.count(r, match[r]);
  return static_cast<double>(correct) / static_cast<double>(table.total());
}

double one_nn_error(const Matrix& train, std::span<const int> train_labels, const Matrix& test,
                    std::span<const int> test_labels) {
  if (train.rows() == 0) throw LogicError("1-NN error needs a non-empty training set");
  if (train.rows() != train_labels.size() || test.rows() != test_labels.size())
    throw LogicError("points and labels differ in length");
  if (train.cols() != test.cols()) throw LogicError("train and test dimensions differ");
  if (test.rows() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < test.rows(); ++t) {
    std::size_t best = 0;
    double best_d = squared_distance(test.row(t), train.row(0));
    for (std::size_t i = 1; i < train.rows(); ++i) {
      const double d = squared_distance(test.row(t), train.row(i));
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (train_labels[best] != test_labels[t]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.rows());
}

}  // namespace jule
