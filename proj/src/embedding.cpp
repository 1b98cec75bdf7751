#include "jule/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "jule/parallel.hpp"

namespace jule {

namespace {

constexpr std::array<char, 8> kMagic = {'J', 'U', 'L', 'E', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

// Per-sample activations kept for the backward pass.
struct Trace {
  std::vector<std::uint32_t> nonzero;         // nonzero input coordinates
  std::vector<std::vector<double>> hidden;    // rectified output of every layer but the last
  std::vector<double> out;                    // final output (normalized when enabled)
  double norm = 1.0;                          // norm of the raw output
};

void trace_forward(const EmbeddingNet& net, std::span<const double> x, Trace& trace) {
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.layer_count();
  if (x.size() != dims.front())
    throw LogicError("input has " + std::to_string(x.size()) + " features, net expects " +
                     std::to_string(dims.front()));

  trace.nonzero.clear();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) trace.nonzero.push_back(static_cast<std::uint32_t>(i));
  trace.hidden.resize(layers - 1);

  std::vector<double> current;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    std::vector<double>& y = l + 1 < layers ? trace.hidden[l] : trace.out;
    y.assign(b.begin(), b.end());
    if (l == 0) {
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = w.data() + o * in;
        double s = 0.0;
        for (std::uint32_t i : trace.nonzero) s += row[i] * x[i];
        y[o] += s;
      }
    } else {
      const std::vector<double>& prev = trace.hidden[l - 1];
      for (std::size_t o = 0; o < out; ++o) y[o] += dot({w.data() + o * in, in}, prev);
    }
    if (l + 1 < layers)
      for (double& v : y) v = std::max(v, 0.0);
  }

  trace.norm = 1.0;
  if (net.normalizes_output()) {
    const double norm = std::sqrt(dot(trace.out, trace.out));
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw NormalizationError("embedding output has zero or non-finite norm");
    for (double& v : trace.out) v /= norm;
    trace.norm = norm;
  }
}

// Adds d(loss)/d(params) for one sample given d(loss)/d(output).
void trace_backward(const EmbeddingNet& net, std::span<const double> x, const Trace& trace,
                    std::span<const double> grad_out, std::span<double> grad) {
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.layer_count();

  std::vector<double> g(grad_out.begin(), grad_out.end());
  if (net.normalizes_output()) {
    const double s = dot(trace.out, g);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - trace.out[k] * s) / trace.norm;
  }

  std::vector<double> g_in;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const std::size_t w_off = net.weight_offset(l);
    const std::size_t b_off = w_off + in * out;
    const auto w = net.weight(l);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      grad[b_off + o] += go;
      double* row = grad.data() + w_off + o * in;
      if (l == 0) {
        for (std::uint32_t i : trace.nonzero) row[i] += go * x[i];
      } else {
        const std::vector<double>& input = trace.hidden[l - 1];
        for (std::size_t i = 0; i < in; ++i) row[i] += go * input[i];
      }
    }
    if (l == 0) break;
    const std::vector<double>& below = trace.hidden[l - 1];
    g_in.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      const double* row = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) g_in[i] += row[i] * go;
    }
    for (std::size_t i = 0; i < in; ++i)
      if (below[i] <= 0.0) g_in[i] = 0.0;
    g.swap(g_in);
  }
}

// Adds the hinge gradient of one triplet to the three output gradients; returns the hinge.
double triplet_output_grad(std::span<const double> fa, std::span<const double> fp, std::span<const double> fn,
                           double gamma, double margin, double scale, std::span<double> ga,
                           std::span<double> gp, std::span<double> gn) {
  const double h = margin + gamma * squared_distance(fa, fp) - squared_distance(fa, fn);
  if (!(h > 0.0)) return 0.0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const double dp = 2.0 * gamma * (fa[k] - fp[k]) * scale;
    const double dn = 2.0 * (fa[k] - fn[k]) * scale;
    ga[k] += dp - dn;
    gp[k] -= dp;
    gn[k] += dn;
  }
  return h;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingNet

void EmbeddingNet::layout() {
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

EmbeddingNet EmbeddingNet::init(std::vector<std::size_t> layer_dims, std::uint64_t seed, bool normalize_output) {
  if (layer_dims.size() < 2) throw ConfigError("embedding net needs at least an input and an output dim");
  for (std::size_t d : layer_dims)
    if (d == 0) throw ConfigError("embedding net dims must be positive");
  EmbeddingNet net;
  net.dims_ = std::move(layer_dims);
  net.normalize_ = normalize_output;
  net.seed_ = seed;
  net.layout();
  Rng rng(seed);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(net.dims_[l]));
    for (double& w : net.weight(l)) w = stddev * rng.normal();
  }
  return net;
}

std::span<double> EmbeddingNet::weight(std::size_t layer) {
  return {params_.data() + offsets_.at(layer), dims_[layer] * dims_[layer + 1]};
}
std::span<const double> EmbeddingNet::weight(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer), dims_[layer] * dims_[layer + 1]};
}
std::span<double> EmbeddingNet::bias(std::size_t layer) {
  return {params_.data() + offsets_.at(layer) + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}
std::span<const double> EmbeddingNet::bias(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer) + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}

std::vector<double> EmbeddingNet::forward(std::span<const double> x) const {
  if (dims_.empty()) throw LogicError("embedding net is not initialized");
  Trace trace;
  trace_forward(*this, x, trace);
  return std::move(trace.out);
}

Matrix EmbeddingNet::embed(const Matrix& inputs, unsigned threads) const {
  if (dims_.empty()) throw LogicError("embedding net is not initialized");
  if (inputs.cols() != input_dim())
    throw LogicError("input has " + std::to_string(inputs.cols()) + " features, net expects " +
                     std::to_string(input_dim()));
  Matrix out(inputs.rows(), output_dim());
  parallel_for(inputs.rows(), threads, [&](std::size_t begin, std::size_t end) {
    Trace trace;
    for (std::size_t i = begin; i < end; ++i) {
      trace_forward(*this, inputs.row(i), trace);
      std::copy(trace.out.begin(), trace.out.end(), out.row(i).begin());
    }
  });
  return out;
}

void EmbeddingNet::save(std::ostream& out) const {
  const nlohmann::json header = {
      {"layer_dims", dims_},
      {"seed", seed_},
      {"normalize_output", normalize_},
      {"parameter_count", params_.size()},
  };
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<char> blob(params_.size() * 8);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const auto bits = std::bit_cast<std::uint64_t>(params_[p]);
    for (int i = 0; i < 8; ++i) blob[p * 8 + i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("failed to write checkpoint");
}

void EmbeddingNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save(out);
}

EmbeddingNet EmbeddingNet::load(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t length = get_u32(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw FormatError("truncated checkpoint header");

  EmbeddingNet net;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(text);
    net.dims_ = header.at("layer_dims").get<std::vector<std::size_t>>();
    net.seed_ = header.at("seed").get<std::uint64_t>();
    net.normalize_ = header.at("normalize_output").get<bool>();
    count = header.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  if (net.dims_.size() < 2 || std::find(net.dims_.begin(), net.dims_.end(), 0) != net.dims_.end())
    throw FormatError("bad checkpoint layer dims");
  net.layout();
  if (count != net.params_.size()) throw FormatError("checkpoint parameter count does not match its dims");

  std::vector<unsigned char> blob(count * 8);
  if (!in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size())))
    throw FormatError("truncated checkpoint parameters");
  for (std::size_t p = 0; p < count; ++p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(blob[p * 8 + i]) << (8 * i);
    net.params_[p] = std::bit_cast<double>(bits);
  }
  return net;
}

EmbeddingNet EmbeddingNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

// ---------------------------------------------------------------------------
// Loss

double triplet_hinge(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const double> negative, double gamma, double margin) {
  return std::max(0.0, margin + gamma * squared_distance(anchor, positive) - squared_distance(anchor, negative));
}

double triplet_loss(const EmbeddingNet& net, const Matrix& inputs, const Triplet& triplet, double gamma,
                    double margin) {
  const auto fa = net.forward(inputs.row(triplet.anchor));
  const auto fp = net.forward(inputs.row(triplet.positive));
  const auto fn = net.forward(inputs.row(triplet.negative));
  return triplet_hinge(fa, fp, fn, gamma, margin);
}

double mean_triplet_loss(const EmbeddingNet& net, const Matrix& inputs, std::span<const Triplet> triplets,
                         double gamma, double margin) {
  if (triplets.empty()) return 0.0;
  double sum = 0.0;
  for (const Triplet& t : triplets) sum += triplet_loss(net, inputs, t, gamma, margin);
  return sum / static_cast<double>(triplets.size());
}

std::vector<Triplet> sample_triplets(const Partition& partition, const Matrix& batch_embeddings,
                                     std::span<const SampleId> batch, std::size_t kc, std::size_t per_anchor,
                                     Rng& rng) {
  if (batch_embeddings.rows() != batch.size())
    throw LogicError("batch embeddings and batch ids disagree in length");
  std::vector<Triplet> triplets;
  if (kc == 0 || per_anchor == 0) return triplets;

  // Batch rows grouped by cluster.
  std::vector<std::pair<ClusterId, std::size_t>> by_cluster(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) by_cluster[r] = {partition.cluster_of(batch[r]), r};
  std::sort(by_cluster.begin(), by_cluster.end());

  std::vector<std::size_t> positives;
  std::vector<std::pair<double, std::size_t>> negatives;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const ClusterId c = partition.cluster_of(batch[r]);
    positives.clear();
    auto it = std::lower_bound(by_cluster.begin(), by_cluster.end(), std::pair<ClusterId, std::size_t>{c, 0});
    for (; it != by_cluster.end() && it->first == c; ++it)
      if (it->second != r) positives.push_back(it->second);
    if (positives.empty() || positives.size() + 1 == batch.size()) continue;

    negatives.clear();
    for (std::size_t q = 0; q < batch.size(); ++q)
      if (partition.cluster_of(batch[q]) != c)
        negatives.push_back({squared_distance(batch_embeddings.row(r), batch_embeddings.row(q)), q});
    const std::size_t keep = std::min(kc, negatives.size());
    std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(keep), negatives.end());

    const std::size_t count = std::min(per_anchor, keep);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t p = positives[static_cast<std::size_t>(rng.below(positives.size()))];
      triplets.push_back({batch[r], batch[p], batch[negatives[k].second]});
    }
  }
  return triplets;
}

Gradients backward(const EmbeddingNet& net, const Matrix& inputs, std::span<const Triplet> triplets, double gamma,
                   double margin, double weight_decay) {
  Gradients result;
  result.values.assign(net.parameter_count(), 0.0);

  if (!triplets.empty()) {
    std::vector<SampleId> ids;
    ids.reserve(triplets.size() * 3);
    for (const Triplet& t : triplets) ids.insert(ids.end(), {t.anchor, t.positive, t.negative});
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const auto slot = [&](SampleId s) {
      return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), s) - ids.begin());
    };

    std::vector<Trace> traces(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) trace_forward(net, inputs.row(ids[k]), traces[k]);

    const std::size_t dim = net.output_dim();
    Matrix grad_out(ids.size(), dim);
    const double scale = 1.0 / static_cast<double>(triplets.size());
    double sum = 0.0;
    for (const Triplet& t : triplets) {
      const std::size_t a = slot(t.anchor), p = slot(t.positive), n = slot(t.negative);
      const double h = triplet_output_grad(traces[a].out, traces[p].out, traces[n].out, gamma, margin, scale,
                                           grad_out.row(a), grad_out.row(p), grad_out.row(n));
      if (h > 0.0) ++result.active;
      sum += h;
    }
    result.loss = sum * scale;
    for (std::size_t k = 0; k < ids.size(); ++k)
      trace_backward(net, inputs.row(ids[k]), traces[k], grad_out.row(k), result.values);
  }

  const auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) result.values[p] += weight_decay * params[p];
  return result;
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState OptimizerState::for_net(const EmbeddingNet& net, const SgdConfig& config) {
  OptimizerState state;
  state.config = config;
  state.velocity.assign(net.parameter_count(), 0.0);
  return state;
}

double OptimizerState::learning_rate() const {
  return config.base_lr *
         std::pow(1.0 + config.lr_gamma * static_cast<double>(iteration), -config.lr_power);
}

void sgd_step(EmbeddingNet& net, OptimizerState& state, std::span<const double> gradient) {
  auto params = net.parameters();
  if (gradient.size() != params.size() || state.velocity.size() != params.size())
    throw LogicError("gradient, velocity and parameter sizes disagree");
  const double lr = state.learning_rate();
  const double mu = state.config.momentum;
  for (std::size_t p = 0; p < params.size(); ++p) {
    state.velocity[p] = mu * state.velocity[p] - lr * gradient[p];
    params[p] += state.velocity[p];
  }
  ++state.iteration;
}

// ---------------------------------------------------------------------------
// Training

std::vector<SampleId> epoch_order(const Partition& partition, std::size_t batch_size, Rng& rng) {
  const std::size_t chunk = std::max<std::size_t>(2, batch_size / 8);
  std::vector<std::vector<SampleId>> chunks;
  for (ClusterId c : partition.live_ids()) {
    const auto members = partition.members(c);
    std::vector<SampleId> shuffled(members.begin(), members.end());
    rng.shuffle(std::span<SampleId>(shuffled));
    for (std::size_t begin = 0; begin < shuffled.size(); begin += chunk) {
      const std::size_t end = std::min(shuffled.size(), begin + chunk);
      chunks.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(begin),
                          shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  rng.shuffle(std::span<std::vector<SampleId>>(chunks));
  std::vector<SampleId> order;
  order.reserve(partition.sample_count());
  for (const auto& c : chunks) order.insert(order.end(), c.begin(), c.end());
  return order;
}

TrainStats train_epochs(EmbeddingNet& net, OptimizerState& state, const Matrix& inputs, const Partition& partition,
                        const TrainOptions& options) {
  if (options.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (inputs.rows() != partition.sample_count())
    throw LogicError("partition and inputs disagree in sample count");
  TrainStats stats;
  Rng rng(options.seed);
  const std::size_t dim = net.output_dim();
  const double decay = state.config.weight_decay;

  std::vector<Trace> traces(options.batch_size);
  std::vector<std::size_t> row_of(inputs.rows());
  std::vector<double> grad(net.parameter_count());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const std::vector<SampleId> order = epoch_order(partition, options.batch_size, rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const std::span<const SampleId> batch(order.data() + begin, end - begin);

      Matrix embedded(batch.size(), dim);
      parallel_for(batch.size(), options.threads, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t r = b0; r < b1; ++r) {
          trace_forward(net, inputs.row(batch[r]), traces[r]);
          std::copy(traces[r].out.begin(), traces[r].out.end(), embedded.row(r).begin());
        }
      });
      const std::vector<Triplet> triplets =
          sample_triplets(partition, embedded, batch, options.kc, options.per_anchor, rng);
      if (triplets.empty()) continue;

      for (std::size_t r = 0; r < batch.size(); ++r) row_of[batch[r]] = r;
      Matrix grad_out(batch.size(), dim);
      const double scale = 1.0 / static_cast<double>(triplets.size());
      for (const Triplet& t : triplets) {
        const std::size_t a = row_of[t.anchor], p = row_of[t.positive], n = row_of[t.negative];
        loss_sum += triplet_output_grad(embedded.row(a), embedded.row(p), embedded.row(n), options.gamma,
                                        options.margin, scale, grad_out.row(a), grad_out.row(p), grad_out.row(n));
      }
      loss_count += triplets.size();

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t r = 0; r < batch.size(); ++r)
        trace_backward(net, inputs.row(batch[r]), traces[r], grad_out.row(r), grad);
      const auto params = net.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) grad[p] += decay * params[p];
      sgd_step(net, state, grad);
      stats.triplets += triplets.size();
      ++stats.iterations;
    }
    stats.epoch_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  return stats;
}

}  // namespace jule
