#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jule/common.hpp"

namespace jule {

/// Feature matrix (one sample per row) with optional ground-truth category ids.
/// Labels are only ever used for evaluation.
struct Dataset {
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::string name;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws FormatError when rows are non-finite or labels are inconsistent.
  void validate() const;
};

/// Loads an IDX image file (magic 0x00000803). Pixels are flattened row-major and
/// scaled to [0, 1] by dividing by 255. When `labels_path` is given it must be a
/// matching IDX label file (magic 0x00000801).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Reads an IDX label file.
std::vector<int> load_idx_labels(const std::filesystem::path& path);

/// Writes an IDX image file from bytes (used for fixtures and round trips).
void write_idx_images(const std::filesystem::path& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

struct CsvOptions {
  std::optional<std::size_t> label_column;
  bool has_header = false;
};

/// Loads a comma-separated numeric table. The optional label column must hold
/// non-negative integers; the remaining columns become features in file order.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

struct NormalizedDataset {
  Dataset data;
  std::size_t zero_rows = 0;  ///< rows left untouched because their norm is zero
};

/// Scales every nonzero row to unit Euclidean norm.
NormalizedDataset l2_normalize_rows(Dataset dataset);

/// In-place variant over a bare matrix; returns the zero-row count.
std::size_t l2_normalize_rows_inplace(Matrix& features);

struct BlobsSpec {
  std::size_t k = 3;
  std::size_t n_per = 100;
  std::size_t dim = 2;
  double spread = 1.0;
  double separation = 10.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs around k deterministic centers.
///
/// For k <= dim + 1 the centers are the vertices of a regular simplex whose edge
/// length equals `separation`; otherwise they sit on an integer lattice with
/// spacing `separation`. Samples are emitted cluster by cluster.
Dataset make_blobs(const BlobsSpec& spec);

/// Resolves a dataset URI: `idx:images[,labels]`, `csv:path[:labelcol]`,
/// `blobs:k=..,n=..,d=..,seed=..[,spread=..][,sep=..]`.
Dataset open_dataset(const std::string& uri, bool csv_header = false);

}  // namespace jule
