// Command-line front end over the C API.
//
//   jule cluster     plain agglomerative clustering
//   jule jule        joint clustering + representation learning (optionally --rc)
//   jule alpha-bench exact mode vs. constant-ratio approximations
//   jule viz         low-dimensional embedding for plotting
//   jule eval        NMI / accuracy of an assignment file
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jule/jule.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

struct Failure {
  int code;
  std::string message;
};

struct DatasetDeleter {
  void operator()(jule_dataset* d) const { jule_dataset_free(d); }
};
struct ResultDeleter {
  void operator()(jule_result* r) const { jule_result_free(r); }
};
using DatasetPtr = std::unique_ptr<jule_dataset, DatasetDeleter>;
using ResultPtr = std::unique_ptr<jule_result, ResultDeleter>;

void check(jule_status status, const std::string& what) {
  if (status != JULE_OK)
    throw Failure{1, what + ": " + jule_status_name(status) + ": " + jule_last_error()};
}

struct Options {
  std::string data;
  bool header = false;
  std::size_t target_nc = 0;
  std::size_t ks = 20;
  double a = 1.0;
  std::size_t kc = 5;
  double lambda = 1.0;
  double gamma = 2.0;
  double margin = 0.2;
  double eta = 0.9;
  std::size_t epochs = 20;
  std::size_t batch = 128;
  std::vector<std::size_t> dims = {160};
  std::size_t per_anchor = 0;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  double lr_gamma = 1e-4;
  double lr_power = 0.75;
  std::string mode = "exact";
  std::optional<double> alpha;
  bool rc = false;
  bool no_final_train = false;
  bool raw = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out_dir = "jule-out";
  bool quiet = false;
  // viz
  std::size_t out_dim = 2;
  // alpha-bench
  std::vector<double> alphas = {-0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.5};
  // eval
  std::string pred;
  std::string truth;
};

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "dataset URI: idx:img[,lbl] | csv:path[:labelcol] | blobs:k=,n=,d=,seed=")
      ->required();
  cmd->add_flag("--header", o.header, "CSV input has a header row");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--threads", o.threads, "threads for data-parallel sections")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", o.out_dir, "directory for the report and artifacts");
  cmd->add_flag("--quiet", o.quiet, "suppress progress lines");
}

void add_cluster_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--target-nc", o.target_nc, "number of clusters to stop at")->required();
  cmd->add_option("--ks", o.ks, "sample neighbors in the affinity graph");
  cmd->add_option("--a", o.a, "kernel bandwidth factor");
  cmd->add_option("--kc", o.kc, "cluster neighbors in the merge loss");
  cmd->add_option("--lambda", o.lambda, "weight of the local-structure term");
  cmd->add_option("--mode", o.mode, "affinity update: exact | approx")->check(CLI::IsMember({"exact", "approx"}));
  cmd->add_option("--alpha", o.alpha, "ratio for --mode approx (omit for size weighting)");
}

void add_learning_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--gamma", o.gamma, "weight of the positive pair in the triplet loss");
  cmd->add_option("--margin", o.margin, "triplet margin");
  cmd->add_option("--eta", o.eta, "unrolling rate in (0, 1]");
  cmd->add_option("--epochs", o.epochs, "training epochs per period");
  cmd->add_option("--batch", o.batch, "batch size");
  cmd->add_option("--dims", o.dims, "layer widths after the input, e.g. 160 or 256,160")->delimiter(',');
  cmd->add_option("--per-anchor", o.per_anchor, "triplets per anchor (0 = kc)");
  cmd->add_option("--lr", o.lr, "base learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", o.weight_decay, "weight decay");
  cmd->add_option("--lr-gamma", o.lr_gamma, "learning-rate decay gamma");
  cmd->add_option("--lr-power", o.lr_power, "learning-rate decay power");
  cmd->add_flag("--no-final-train", o.no_final_train, "skip the training pass after the last merge period");
}

void progress_line(const char* line, void*) { std::fprintf(stderr, "[jule] %s\n", line); }

jule_params make_params(const Options& o) {
  jule_params p;
  jule_params_default(&p);
  p.ks = o.ks;
  p.a = o.a;
  p.kc = o.kc;
  p.lambda = o.lambda;
  p.gamma = o.gamma;
  p.margin = o.margin;
  p.eta = o.eta;
  p.target_nc = o.target_nc;
  p.epochs = o.epochs;
  p.batch_size = o.batch;
  p.dims = o.dims.data();
  p.dims_len = o.dims.size();
  p.per_anchor = o.per_anchor;
  p.base_lr = o.lr;
  p.momentum = o.momentum;
  p.weight_decay = o.weight_decay;
  p.lr_gamma = o.lr_gamma;
  p.lr_power = o.lr_power;
  if (o.mode == "exact") {
    p.mode = JULE_MODE_EXACT;
  } else if (o.alpha) {
    p.mode = JULE_MODE_ALPHA;
    p.alpha = *o.alpha;
  } else {
    p.mode = JULE_MODE_SIZE_WEIGHTED;
  }
  p.final_train = o.no_final_train ? 0 : 1;
  p.normalize_input = o.raw ? 0 : 1;
  p.seed = o.seed;
  p.threads = o.threads;
  if (!o.quiet) p.progress = progress_line;
  return p;
}

std::string mode_name(const jule_params& p) {
  switch (p.mode) {
    case JULE_MODE_EXACT: return "exact";
    case JULE_MODE_SIZE_WEIGHTED: return "size-weighted";
    case JULE_MODE_ALPHA: return "alpha";
  }
  return "unknown";
}

ordered_json config_json(const std::string& command, const Options& o, const jule_params& p) {
  ordered_json j = {
      {"command", command}, {"data", o.data},      {"target_nc", p.target_nc}, {"ks", p.ks},
      {"a", p.a},           {"kc", p.kc},          {"lambda", p.lambda},       {"mode", mode_name(p)},
      {"seed", p.seed},
  };
  if (p.mode == JULE_MODE_ALPHA) j["alpha"] = p.alpha;
  if (command == "cluster" || command == "alpha-bench") {
    j["normalize_input"] = p.normalize_input != 0;
  } else {
    j["gamma"] = p.gamma;
    j["margin"] = p.margin;
    j["eta"] = p.eta;
    j["epochs"] = p.epochs;
    j["batch"] = p.batch_size;
    j["dims"] = o.dims;
    j["per_anchor"] = p.per_anchor == 0 ? p.kc : p.per_anchor;
    j["lr"] = p.base_lr;
    j["momentum"] = p.momentum;
    j["weight_decay"] = p.weight_decay;
    j["lr_gamma"] = p.lr_gamma;
    j["lr_power"] = p.lr_power;
    j["final_train"] = p.final_train != 0;
  }
  return j;
}

struct Loaded {
  DatasetPtr dataset;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::optional<std::vector<int>> labels;
};

Loaded load(const Options& o) {
  jule_dataset* raw = nullptr;
  check(jule_dataset_open(o.data.c_str(), o.header ? 1 : 0, &raw), "loading " + o.data);
  Loaded l;
  l.dataset.reset(raw);
  l.rows = jule_dataset_rows(raw);
  l.cols = jule_dataset_cols(raw);
  if (jule_dataset_has_labels(raw)) {
    l.labels.emplace(l.rows);
    check(jule_dataset_labels(raw, l.labels->data()), "reading labels");
  }
  return l;
}

ordered_json dataset_json(const Loaded& l) {
  return {{"samples", l.rows}, {"dims", l.cols}, {"labels", l.labels.has_value()}};
}

fs::path prepare_out_dir(const Options& o) {
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{1, "cannot create " + dir.string() + ": " + ec.message()};
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{1, "cannot write " + path.string()};
}

std::vector<int> result_labels(const jule_result* r) {
  std::vector<int> labels(jule_result_samples(r));
  check(jule_result_labels(r, labels.data()), "reading assignments");
  return labels;
}

void write_assignments(const fs::path& path, const std::vector<int>& labels) {
  std::ostringstream out;
  out << "cluster\n";
  for (int l : labels) out << l << '\n';
  write_text(path, out.str());
}

std::vector<int> read_assignments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{1, "cannot read " + path.string()};
  std::vector<int> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const int v = std::stoi(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      labels.push_back(v);
    } catch (const std::exception&) {
      if (!first) throw Failure{1, path.string() + ": bad label '" + cell + "'"};
    }
    first = false;
  }
  return labels;
}

std::vector<double> result_features(const jule_result* r, std::size_t& dim) {
  dim = jule_result_feature_dim(r);
  std::vector<double> values(jule_result_samples(r) * dim);
  check(jule_result_features(r, values.data()), "reading features");
  return values;
}

void write_features(const fs::path& path, const std::vector<double>& values, std::size_t dim) {
  std::ostringstream out;
  char buffer[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%.17g", values[i]);
    out << buffer << ((i + 1) % dim == 0 ? '\n' : ',');
  }
  write_text(path, out.str());
}

std::vector<double> read_features(const fs::path& path, std::size_t& rows, std::size_t& cols) {
  std::ifstream in(path);
  if (!in) throw Failure{1, "cannot read " + path.string()};
  std::vector<double> values;
  rows = cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw Failure{1, path.string() + ": ragged row"};
    ++rows;
  }
  return values;
}

std::string trace_text(const jule_result* r) {
  char* text = nullptr;
  check(jule_result_trace_json(r, 0, &text), "serializing trace");
  std::string copy(text);
  jule_string_free(text);
  return copy;
}

// Metrics of an emitted assignment file against ground truth.
ordered_json score_file(const fs::path& path, const std::vector<int>& truth) {
  const auto pred = read_assignments(path);
  if (pred.size() != truth.size()) throw Failure{1, path.string() + ": assignment count does not match dataset"};
  double n = 0.0, a = 0.0;
  check(jule_nmi(pred.data(), truth.data(), pred.size(), &n), "nmi");
  check(jule_accuracy(pred.data(), truth.data(), pred.size(), &a), "accuracy");
  return {{"nmi", n}, {"acc", a}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void finish(const fs::path& dir, ordered_json& report) {
  const fs::path path = dir / "report.json";
  write_text(path, report.dump(2) + "\n");
  std::cout << report.dump(2) << std::endl;
}

// ---------------------------------------------------------------------------

int cmd_cluster(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded data = load(o);
  const double load_s = seconds_since(t0);
  const jule_params p = make_params(o);
  const fs::path dir = prepare_out_dir(o);

  const auto t1 = std::chrono::steady_clock::now();
  jule_result* raw = nullptr;
  check(jule_cluster(data.dataset.get(), &p, &raw), "clustering");
  ResultPtr result(raw);
  const double cluster_s = seconds_since(t1);

  const fs::path assignments = dir / "assignments.csv";
  const fs::path trace = dir / "trace.json";
  write_assignments(assignments, result_labels(result.get()));
  write_text(trace, trace_text(result.get()));

  ordered_json results = {{"clusters", jule_result_clusters(result.get())},
                          {"initial_clusters", jule_result_initial_clusters(result.get())},
                          {"merges", jule_result_merges(result.get())}};
  if (data.labels) results.update(score_file(assignments, *data.labels));

  ordered_json report = {
      {"schema_version", kSchemaVersion},
      {"config", config_json("cluster", o, p)},
      {"dataset", dataset_json(data)},
      {"results", results},
      {"artifacts", {{"assignments", assignments.string()}, {"trace", trace.string()}}},
      {"timings", {{"load_seconds", load_s}, {"cluster_seconds", cluster_s}}},
  };
  finish(dir, report);
  return 0;
}

int cmd_jule(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded data = load(o);
  const double load_s = seconds_since(t0);
  const jule_params p = make_params(o);
  const fs::path dir = prepare_out_dir(o);

  const auto t1 = std::chrono::steady_clock::now();
  jule_result* raw = nullptr;
  check(jule_run(data.dataset.get(), &p, &raw), "joint run");
  ResultPtr result(raw);
  const double run_s = seconds_since(t1);

  const fs::path sf_path = dir / "assignments.csv";
  const fs::path trace = dir / "trace.json";
  const fs::path features = dir / "features.csv";
  const fs::path checkpoint = dir / "net.ckpt";
  write_assignments(sf_path, result_labels(result.get()));
  write_text(trace, trace_text(result.get()));
  std::size_t dim = 0;
  const auto values = result_features(result.get(), dim);
  write_features(features, values, dim);
  check(jule_result_save_checkpoint(result.get(), checkpoint.string().c_str()), "saving checkpoint");

  ordered_json results = {{"clusters", jule_result_clusters(result.get())},
                          {"initial_clusters", jule_result_initial_clusters(result.get())},
                          {"merges", jule_result_merges(result.get())},
                          {"feature_dim", dim}};
  if (data.labels) {
    const auto sf = score_file(sf_path, *data.labels);
    results["sf_nmi"] = sf["nmi"];
    results["sf_acc"] = sf["acc"];
  }
  ordered_json artifacts = {{"assignments", sf_path.string()},
                            {"trace", trace.string()},
                            {"features", features.string()},
                            {"checkpoint", checkpoint.string()}};
  ordered_json timings = {{"load_seconds", load_s}, {"run_seconds", run_s}};

  if (o.rc) {
    const auto t2 = std::chrono::steady_clock::now();
    jule_result* rc_raw = nullptr;
    check(jule_rerun(result.get(), data.dataset.get(), &p, &rc_raw), "re-clustering");
    ResultPtr rc(rc_raw);
    timings["rc_seconds"] = seconds_since(t2);
    const fs::path rc_path = dir / "rc_assignments.csv";
    write_assignments(rc_path, result_labels(rc.get()));
    artifacts["rc_assignments"] = rc_path.string();
    results["rc_clusters"] = jule_result_clusters(rc.get());
    if (data.labels) {
      const auto rcs = score_file(rc_path, *data.labels);
      results["rc_nmi"] = rcs["nmi"];
      results["rc_acc"] = rcs["acc"];
    }
  }

  ordered_json report = {
      {"schema_version", kSchemaVersion}, {"config", config_json("jule", o, p)},
      {"dataset", dataset_json(data)},    {"results", results},
      {"artifacts", artifacts},           {"timings", timings},
  };
  report["config"]["rc"] = o.rc;
  finish(dir, report);
  return 0;
}

int cmd_alpha_bench(const Options& o) {
  const Loaded data = load(o);
  const fs::path dir = prepare_out_dir(o);
  Options base = o;
  base.mode = "exact";
  base.alpha.reset();

  ordered_json rows = ordered_json::array();
  const auto run_row = [&](const Options& opts, std::size_t index) {
    const jule_params p = make_params(opts);
    const auto t = std::chrono::steady_clock::now();
    jule_result* raw = nullptr;
    check(jule_cluster(data.dataset.get(), &p, &raw), "clustering (" + mode_name(p) + ")");
    ResultPtr result(raw);
    const double secs = seconds_since(t);
    const fs::path path = dir / ("assignments_" + std::to_string(index) + ".csv");
    write_assignments(path, result_labels(result.get()));
    ordered_json row = {{"mode", mode_name(p)}};
    if (p.mode == JULE_MODE_ALPHA) row["alpha"] = p.alpha;
    row["clusters"] = jule_result_clusters(result.get());
    if (data.labels) row.update(score_file(path, *data.labels));
    row["assignments"] = path.string();
    row["timings"] = {{"seconds", secs}};
    rows.push_back(row);
  };

  run_row(base, 0);
  for (std::size_t i = 0; i < o.alphas.size(); ++i) {
    Options opts = base;
    opts.mode = "approx";
    opts.alpha = o.alphas[i];
    run_row(opts, i + 1);
  }

  const jule_params p = make_params(base);
  ordered_json config = config_json("alpha-bench", o, p);
  config.erase("mode");
  config["alphas"] = o.alphas;
  ordered_json report = {
      {"schema_version", kSchemaVersion},
      {"config", config},
      {"dataset", dataset_json(data)},
      {"results", {{"rows", rows}}},
  };
  finish(dir, report);
  return 0;
}

int cmd_viz(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded data = load(o);
  const jule_params p = make_params(o);
  const fs::path dir = prepare_out_dir(o);

  jule_result* raw = nullptr;
  check(jule_visualize(data.dataset.get(), &p, o.out_dim, &raw), "visualization");
  ResultPtr result(raw);
  const double run_s = seconds_since(t0);

  const fs::path embedding = dir / "embedding.csv";
  const fs::path trace = dir / "trace.json";
  std::size_t dim = 0;
  const auto values = result_features(result.get(), dim);
  write_features(embedding, values, dim);
  write_text(trace, trace_text(result.get()));

  std::size_t rows = 0, cols = 0;
  const auto points = read_features(embedding, rows, cols);
  ordered_json results = {{"rows", rows}, {"cols", cols}, {"clusters", jule_result_clusters(result.get())}};
  if (data.labels && rows >= 2) {
    // Even rows train, odd rows test.
    std::vector<double> train, test;
    std::vector<int> train_l, test_l;
    for (std::size_t i = 0; i < rows; ++i) {
      auto& pts = i % 2 == 0 ? train : test;
      auto& lbl = i % 2 == 0 ? train_l : test_l;
      pts.insert(pts.end(), points.begin() + static_cast<std::ptrdiff_t>(i * cols),
                 points.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
      lbl.push_back((*data.labels)[i]);
    }
    double err = 0.0;
    check(jule_one_nn_error(train.data(), train_l.data(), train_l.size(), test.data(), test_l.data(), test_l.size(),
                            cols, &err),
          "1-NN error");
    results["one_nn_error"] = err;
  }

  ordered_json config = config_json("viz", o, p);
  config["out_dim"] = o.out_dim;
  ordered_json report = {
      {"schema_version", kSchemaVersion},
      {"config", config},
      {"dataset", dataset_json(data)},
      {"results", results},
      {"artifacts", {{"embedding", embedding.string()}, {"trace", trace.string()}}},
      {"timings", {{"run_seconds", run_s}}},
  };
  finish(dir, report);
  return 0;
}

int cmd_eval(const Options& o) {
  std::vector<int> truth;
  if (!o.truth.empty()) {
    truth = read_assignments(o.truth);
  } else {
    const Loaded data = load(o);
    if (!data.labels) throw Failure{1, "dataset " + o.data + " has no labels"};
    truth = *data.labels;
  }
  ordered_json results = score_file(o.pred, truth);
  ordered_json report = {
      {"schema_version", kSchemaVersion},
      {"config", {{"command", "eval"}, {"pred", o.pred}, {"truth", o.truth.empty() ? o.data : o.truth}}},
      {"results", results},
  };
  std::cout << report.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint agglomerative clustering and representation learning"};
  app.require_subcommand(1);
  Options o;

  auto* cluster = app.add_subcommand("cluster", "agglomerative clustering on the input features");
  add_data_options(cluster, o);
  add_cluster_options(cluster, o);
  cluster->add_flag("--raw", o.raw, "cluster the features without scaling rows to unit norm");

  auto* jule = app.add_subcommand("jule", "joint clustering and representation learning");
  add_data_options(jule, o);
  add_cluster_options(jule, o);
  add_learning_options(jule, o);
  jule->add_flag("--rc", o.rc, "also re-cluster on the final representation");

  auto* bench = app.add_subcommand("alpha-bench", "exact affinity updates vs. constant-ratio approximations");
  add_data_options(bench, o);
  bench->add_option("--target-nc", o.target_nc, "number of clusters to stop at")->required();
  bench->add_option("--ks", o.ks, "sample neighbors in the affinity graph");
  bench->add_option("--a", o.a, "kernel bandwidth factor");
  bench->add_option("--kc", o.kc, "cluster neighbors in the merge loss");
  bench->add_option("--lambda", o.lambda, "weight of the local-structure term");
  bench->add_option("--alphas", o.alphas, "comma-separated alpha values")->delimiter(',');

  auto* viz = app.add_subcommand("viz", "low-dimensional embedding trained on raw-input merges");
  add_data_options(viz, o);
  add_cluster_options(viz, o);
  add_learning_options(viz, o);
  viz->add_option("--out-dim", o.out_dim, "embedding dimension")->check(CLI::Range(1, 3));

  auto* eval = app.add_subcommand("eval", "score an assignment file against ground truth");
  eval->add_option("--pred", o.pred, "assignment CSV")->required();
  auto* truth_opt = eval->add_option("--truth", o.truth, "label CSV");
  auto* data_opt = eval->add_option("--data", o.data, "labelled dataset URI");
  eval->add_flag("--header", o.header, "CSV input has a header row");
  truth_opt->excludes(data_opt);

  try {
    app.parse(argc, argv);
    for (auto* cmd : {cluster, jule, viz}) {
      if (cmd->parsed() && cmd->count("--alpha") > 0 && o.mode != "approx")
        throw CLI::ValidationError("--alpha", "requires --mode approx");
    }
    if (eval->parsed() && o.truth.empty() && o.data.empty())
      throw CLI::RequiredError("--truth or --data");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cluster->parsed()) return cmd_cluster(o);
    if (jule->parsed()) return cmd_jule(o);
    if (bench->parsed()) return cmd_alpha_bench(o);
    if (viz->parsed()) return cmd_viz(o);
    if (eval->parsed()) return cmd_eval(o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << std::endl;
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
