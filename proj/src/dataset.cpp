#include "jule/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "jule/rng.hpp"

namespace jule {

namespace {

constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::uint32_t kIdxImageMagic = 0x00000803;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw FormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw FormatError("non-numeric CSV cell '" + std::string(cell) + "' on line " +
                      std::to_string(line));
  return value;
}

int parse_label(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || value < 0 ||
      value > std::numeric_limits<int>::max())
    throw FormatError("label cell '" + std::string(cell) + "' on line " + std::to_string(line) +
                      " is not a non-negative integer");
  return static_cast<int>(value);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::vector<double>> simplex_or_lattice_centers(std::size_t k, std::size_t dim,
                                                            double separation) {
  std::vector<std::vector<double>> centers(k, std::vector<double>(dim, 0.0));
  if (k <= dim + 1) {
    const double scale = separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < k && c < dim; ++c) centers[c][c] = scale;
    if (k == dim + 1) {
      const double t = (1.0 - std::sqrt(static_cast<double>(dim + 1))) / static_cast<double>(dim);
      std::fill(centers[dim].begin(), centers[dim].end(), t * scale);
    }
    return centers;
  }
  std::size_t base = 1;
  while (std::pow(static_cast<double>(base), static_cast<double>(dim)) < static_cast<double>(k)) ++base;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t code = c;
    for (std::size_t j = 0; j < dim; ++j) {
      centers[c][j] = separation * static_cast<double>(code % base);
      code /= base;
    }
  }
  return centers;
}

}  // namespace

void Dataset::validate() const {
  for (double v : features.data())
    if (!std::isfinite(v)) throw FormatError("dataset '" + name + "' contains non-finite values");
  if (labels) {
    if (labels->size() != features.rows())
      throw FormatError("dataset '" + name + "' has " + std::to_string(labels->size()) +
                        " labels for " + std::to_string(features.rows()) + " samples");
    if (std::any_of(labels->begin(), labels->end(), [](int l) { return l < 0; }))
      throw FormatError("dataset '" + name + "' has negative labels");
  }
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (read_be32(bytes, 0, path) != kIdxLabelMagic)
    throw FormatError(path.string() + " is not an IDX label file");
  const std::uint32_t count = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + std::size_t{count})
    throw FormatError("truncated IDX label payload in " + path.string());
  return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path) {
  const auto bytes = read_file(images_path);
  const std::uint32_t magic = read_be32(bytes, 0, images_path);
  if (magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << images_path.string() << ": bad IDX image magic 0x" << std::hex << magic;
    throw FormatError(msg.str());
  }
  const std::size_t count = read_be32(bytes, 4, images_path);
  const std::size_t rows = read_be32(bytes, 8, images_path);
  const std::size_t cols = read_be32(bytes, 12, images_path);
  const std::size_t dim = rows * cols;
  constexpr std::size_t header = 16;
  if (bytes.size() < header + count * dim)
    throw FormatError("truncated IDX image payload in " + images_path.string());

  Dataset ds;
  ds.name = images_path.filename().string();
  ds.features = Matrix(count, dim);
  auto& out = ds.features.data();
  for (std::size_t i = 0; i < count * dim; ++i) out[i] = static_cast<double>(bytes[header + i]) / 255.0;

  if (labels_path) {
    auto labels = load_idx_labels(*labels_path);
    if (labels.size() != count)
      throw FormatError("IDX label count " + std::to_string(labels.size()) +
                        " does not match image count " + std::to_string(count));
    ds.labels = std::move(labels);
  }
  return ds;
}

void write_idx_images(const std::filesystem::path& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols) throw LogicError("pixel buffer does not match IDX shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(count));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::vector<double> values;
  std::vector<int> labels;
  std::optional<std::size_t> width;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  bool header_pending = options.has_header;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto cells = split(line, ',');
    if (!width) {
      width = cells.size();
      if (options.label_column && *options.label_column >= *width)
        throw FormatError("label column " + std::to_string(*options.label_column) +
                          " out of range for " + std::to_string(*width) + " columns");
    } else if (cells.size() != *width) {
      throw FormatError("ragged CSV: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " + std::to_string(*width));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (options.label_column && c == *options.label_column)
        labels.push_back(parse_label(cells[c], line_no));
      else
        values.push_back(parse_double(cells[c], line_no));
    }
    ++rows;
  }

  Dataset ds;
  const std::size_t dim = width ? *width - (options.label_column ? 1 : 0) : 0;
  ds.features = Matrix(rows, dim, std::move(values));
  if (options.label_column) ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Dataset ds = parse_csv(buffer.str(), options);
  ds.name = path.filename().string();
  return ds;
}

std::size_t l2_normalize_rows_inplace(Matrix& features) {
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    const double norm = std::sqrt(dot(row, row));
    if (norm == 0.0) {
      ++zero_rows;
      continue;
    }
    for (double& v : row) v /= norm;
  }
  return zero_rows;
}

NormalizedDataset l2_normalize_rows(Dataset dataset) {
  NormalizedDataset result;
  result.zero_rows = l2_normalize_rows_inplace(dataset.features);
  result.data = std::move(dataset);
  return result;
}

Dataset make_blobs(const BlobsSpec& spec) {
  if (spec.k == 0 || spec.n_per == 0 || spec.dim == 0)
    throw ConfigError("blobs need k, n and d of at least 1");
  if (!(spec.spread >= 0.0) || !std::isfinite(spec.separation))
    throw ConfigError("blobs need a non-negative spread and finite separation");

  const auto centers = simplex_or_lattice_centers(spec.k, spec.dim, spec.separation);
  Rng rng(spec.seed);
  Dataset ds;
  ds.name = "blobs";
  ds.features = Matrix(spec.k * spec.n_per, spec.dim);
  std::vector<int> labels;
  labels.reserve(spec.k * spec.n_per);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.k; ++c) {
    for (std::size_t s = 0; s < spec.n_per; ++s, ++row) {
      auto x = ds.features.row(row);
      for (std::size_t j = 0; j < spec.dim; ++j) x[j] = centers[c][j] + spec.spread * rng.normal();
      labels.push_back(static_cast<int>(c));
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

namespace {

BlobsSpec parse_blobs_uri(std::string_view params) {
  BlobsSpec spec;
  for (auto item : split(params, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("blobs parameter '" + std::string(item) + "' lacks '='");
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    const double v = parse_double(value, 0);
    if (key == "k") spec.k = static_cast<std::size_t>(v);
    else if (key == "n") spec.n_per = static_cast<std::size_t>(v);
    else if (key == "d") spec.dim = static_cast<std::size_t>(v);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(v);
    else if (key == "spread") spec.spread = v;
    else if (key == "sep") spec.separation = v;
    else throw ConfigError("unknown blobs parameter '" + std::string(key) + "'");
  }
  return spec;
}

}  // namespace

Dataset open_dataset(const std::string& uri, bool csv_header) {
  const auto colon = uri.find(':');
  if (colon == std::string::npos) throw ConfigError("dataset URI '" + uri + "' has no scheme");
  const std::string scheme = uri.substr(0, colon);
  const std::string rest = uri.substr(colon + 1);

  if (scheme == "idx") {
    const auto comma = rest.find(',');
    if (comma == std::string::npos) return load_idx(rest);
    return load_idx(rest.substr(0, comma), std::filesystem::path(rest.substr(comma + 1)));
  }
  if (scheme == "csv") {
    CsvOptions options;
    options.has_header = csv_header;
    std::string path = rest;
    const auto last = rest.rfind(':');
    if (last != std::string::npos && last + 1 < rest.size() &&
        std::all_of(rest.begin() + static_cast<std::ptrdiff_t>(last) + 1, rest.end(),
                    [](char c) { return c >= '0' && c <= '9'; })) {
      options.label_column = std::stoul(rest.substr(last + 1));
      path = rest.substr(0, last);
    }
    return load_csv(path, options);
  }
  if (scheme == "blobs") {
    Dataset ds = make_blobs(parse_blobs_uri(rest));
    ds.name = uri;
    return ds;
  }
  throw ConfigError("unknown dataset scheme '" + scheme + "'");
}

}  // namespace jule
