#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "jule/common.hpp"
#include "jule/partition.hpp"
#include "jule/rng.hpp"

namespace jule {

/// Fully connected rectifier network. Layer l maps dims[l] -> dims[l+1]; a rectifier
/// sits between layers (not after the last one) and the output is optionally scaled
/// to unit Euclidean norm.
///
/// Parameters live in one flat buffer: for each layer the weight matrix
/// (out x in, row-major) followed by its bias vector.
class EmbeddingNet {
 public:
  EmbeddingNet() = default;

  /// Gaussian weights with standard deviation sqrt(2 / fan_in), zero biases.
  /// Throws ConfigError unless there are at least two positive dims.
  static EmbeddingNet init(std::vector<std::size_t> layer_dims, std::uint64_t seed,
                           bool normalize_output = true);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t layer_count() const noexcept { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t output_dim() const noexcept { return dims_.back(); }
  bool normalizes_output() const noexcept { return normalize_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }

  /// Throws NormalizationError when the output is normalized and the raw output is zero.
  std::vector<double> forward(std::span<const double> x) const;

  /// Forward pass over every row.
  Matrix embed(const Matrix& inputs, unsigned threads = 1) const;

  /// Binary checkpoint: "JULENET\0", u32 version, u32 header length, JSON header,
  /// then parameter_count little-endian float64 values.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static EmbeddingNet load(std::istream& in);
  static EmbeddingNet load(const std::filesystem::path& path);

  friend bool operator==(const EmbeddingNet&, const EmbeddingNet&) = default;

 private:
  void layout();

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights in params_
  std::vector<double> params_;
  bool normalize_ = true;
  std::uint64_t seed_ = 0;
};

struct Triplet {
  SampleId anchor = 0;
  SampleId positive = 0;
  SampleId negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// max(0, margin + gamma * |fa - fp|^2 - |fa - fn|^2) on embedded vectors.
double triplet_hinge(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const double> negative, double gamma, double margin);

/// Weighted triplet loss of one triplet, embedding the three rows of `inputs`.
double triplet_loss(const EmbeddingNet& net, const Matrix& inputs, const Triplet& triplet,
                    double gamma, double margin);

/// Mean triplet loss over a list (0 for an empty list).
double mean_triplet_loss(const EmbeddingNet& net, const Matrix& inputs, std::span<const Triplet> triplets,
                         double gamma, double margin);

/// Triplets for one batch. For every anchor whose cluster has another member in the
/// batch: negatives are the (up to kc) batch members from other clusters closest to
/// the anchor in `batch_embeddings` (row r embeds batch[r]); each triplet pairs one of
/// them with a positive drawn uniformly from the anchor's co-cluster batch members.
/// At most per_anchor triplets per anchor; anchors lacking either side are skipped.
std::vector<Triplet> sample_triplets(const Partition& partition, const Matrix& batch_embeddings,
                                     std::span<const SampleId> batch, std::size_t kc,
                                     std::size_t per_anchor, Rng& rng);

struct Gradients {
  std::vector<double> values;  ///< same layout as EmbeddingNet::parameters()
  double loss = 0.0;           ///< mean triplet loss (without the decay term)
  std::size_t active = 0;      ///< triplets with positive hinge
};

/// Gradient of the mean triplet loss plus weight_decay * parameters.
Gradients backward(const EmbeddingNet& net, const Matrix& inputs, std::span<const Triplet> triplets,
                   double gamma, double margin, double weight_decay);

struct SgdConfig {
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  double lr_gamma = 1e-4;
  double lr_power = 0.75;
};

struct OptimizerState {
  SgdConfig config;
  std::vector<double> velocity;
  std::size_t iteration = 0;

  static OptimizerState for_net(const EmbeddingNet& net, const SgdConfig& config = {});
  /// base_lr * (1 + lr_gamma * iteration)^(-lr_power)
  double learning_rate() const;
};

/// v <- momentum * v - lr * g;  p <- p + v;  iteration += 1.
/// Throws LogicError when shapes disagree.
void sgd_step(EmbeddingNet& net, OptimizerState& state, std::span<const double> gradient);

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double gamma = 2.0;
  double margin = 0.2;
  std::size_t kc = 5;
  std::size_t per_anchor = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct TrainStats {
  std::vector<double> epoch_loss;  ///< mean triplet loss per epoch
  std::size_t triplets = 0;
  std::size_t iterations = 0;
};

/// Shuffles samples into batches built from whole cluster chunks (so most anchors see a
/// co-cluster partner) and runs the requested epochs of sample / backward / step.
TrainStats train_epochs(EmbeddingNet& net, OptimizerState& state, const Matrix& inputs,
                        const Partition& partition, const TrainOptions& options);

/// Sample order for one epoch: each cluster's members are shuffled and cut into chunks
/// of at most max(2, batch_size / 8), then the chunks are shuffled and concatenated.
std::vector<SampleId> epoch_order(const Partition& partition, std::size_t batch_size, Rng& rng);

}  // namespace jule
