#include "jule/driver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "jule/dataset.hpp"
#include "jule/knn_graph.hpp"
#include "jule/metrics.hpp"
#include "jule/rng.hpp"

namespace jule {

namespace {

// Sub-seed streams.
constexpr std::uint64_t kNetStream = 1;
constexpr std::uint64_t kTrainStream = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t period_length(std::size_t live, std::size_t target, double eta) {
  const auto n_p = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(live) - 1e-9));
  return std::min(std::max<std::size_t>(n_p, 1), live - target);
}

void report(const JuleConfig& config, const std::string& line) {
  if (config.progress) config.progress(line);
}

TrainOptions train_options(const JuleConfig& config, std::size_t pass) {
  TrainOptions t;
  t.epochs = config.epochs_per_period;
  t.batch_size = config.batch_size;
  t.gamma = config.gamma;
  t.margin = config.margin;
  t.kc = config.kc;
  t.per_anchor = config.per_anchor == 0 ? config.kc : config.per_anchor;
  t.seed = derive_seed(config.seed, kTrainStream + pass);
  t.threads = config.threads;
  return t;
}

Matrix normalized_copy(const Matrix& raw) {
  Matrix x = raw;
  l2_normalize_rows_inplace(x);
  return x;
}

void score(PeriodRecord& record, const Partition& partition, std::span<const int> labels) {
  if (labels.empty()) return;
  const auto pred = partition.dense_labels();
  record.nmi = nmi(pred, labels);
  record.acc = accuracy(pred, labels);
}

// Shared loop. `frozen` keeps merges on the raw-input graph (visualization mode).
RunTrace joint_loop(const Matrix& raw, const JuleConfig& config, std::span<const int> labels,
                    std::vector<std::size_t> net_dims, bool normalize_output, bool frozen) {
  config.validate();
  if (raw.rows() < 2) throw ConfigError("need at least two samples");
  if (!labels.empty() && labels.size() != raw.rows()) throw LogicError("labels and samples differ in length");

  const Matrix inputs = normalized_copy(raw);
  SampleAffinityGraph graph = sample_affinity(inputs, config.ks, config.a, config.threads);
  Partition initial = init_clusters(graph);

  RunTrace trace;
  trace.sample_count = raw.rows();
  trace.initial_clusters = initial.live_count();
  trace.final_train = config.final_train;
  if (config.target_nc > trace.initial_clusters)
    throw ConfigError("target cluster count " + std::to_string(config.target_nc) + " exceeds the " +
                      std::to_string(trace.initial_clusters) + " initial clusters");
  report(config, "initial clusters: " + std::to_string(trace.initial_clusters));

  net_dims.insert(net_dims.begin(), raw.cols());
  trace.net = EmbeddingNet::init(std::move(net_dims), derive_seed(config.seed, kNetStream), normalize_output);
  OptimizerState optimizer = OptimizerState::for_net(trace.net, config.sgd);
  trace.features = inputs;

  AgglomerativeEngine engine(graph, std::move(initial), config.mode, config.kc, config.lambda);
  std::size_t pass = 0;

  const auto train = [&](PeriodRecord& record) {
    const auto start = Clock::now();
    const TrainStats stats = train_epochs(trace.net, optimizer, inputs, engine.partition(), train_options(config, pass++));
    record.trained = true;
    record.loss_curve = stats.epoch_loss;
    trace.features = trace.net.embed(inputs, config.threads);
    if (!frozen) {
      graph = sample_affinity(trace.features, config.ks, config.a, config.threads);
      engine.rebind(graph);
    }
    record.train_seconds = seconds_since(start);
  };

  while (engine.partition().live_count() > config.target_nc) {
    PeriodRecord record;
    record.index = trace.periods.size();
    const std::size_t live = engine.partition().live_count();
    const std::size_t n_p = period_length(live, config.target_nc, config.eta);

    const auto start = Clock::now();
    record.t_start = engine.timestep() + 1;
    const auto steps = engine.run(live - n_p);
    trace.steps.insert(trace.steps.end(), steps.begin(), steps.end());
    record.t_end = engine.timestep();
    record.merges = steps.size();
    record.clusters = engine.partition().live_count();
    record.merge_seconds = seconds_since(start);
    score(record, engine.partition(), labels);

    const bool last = record.clusters <= config.target_nc;
    if (!last) train(record);
    report(config, "period " + std::to_string(record.index) + ": " + std::to_string(record.merges) +
                       " merges, " + std::to_string(record.clusters) + " clusters" +
                       (record.nmi ? ", nmi " + std::to_string(*record.nmi) : std::string()));
    trace.periods.push_back(std::move(record));
  }

  if (config.final_train) {
    PeriodRecord record;
    record.index = trace.periods.size();
    record.t_start = engine.timestep() + 1;
    record.t_end = engine.timestep();
    record.clusters = engine.partition().live_count();
    train(record);
    score(record, engine.partition(), labels);
    report(config, "final training pass done");
    trace.final_pass = std::move(record);
  }

  trace.partition = engine.partition();
  return trace;
}

nlohmann::json record_json(const PeriodRecord& r, bool with_timings) {
  nlohmann::json j = {
      {"index", r.index},
      {"t_start", r.t_start},
      {"t_end", r.t_end},
      {"merges", r.merges},
      {"clusters", r.clusters},
      {"trained", r.trained},
      {"loss_curve", r.loss_curve},
  };
  if (r.nmi) j["nmi"] = *r.nmi;
  if (r.acc) j["acc"] = *r.acc;
  if (with_timings) j["timings"] = {{"merge_seconds", r.merge_seconds}, {"train_seconds", r.train_seconds}};
  return j;
}

}  // namespace

void JuleConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (target_nc == 0) throw ConfigError("target cluster count must be at least 1");
  if (ks == 0) throw ConfigError("Ks must be positive");
  if (kc == 0) throw ConfigError("Kc must be positive");
  if (!(a > 0.0)) throw ConfigError("a must be positive");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (dims.empty()) throw ConfigError("net needs at least one layer");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("layer widths must be positive");
  if (lambda < 0.0 || gamma < 0.0 || margin < 0.0) throw ConfigError("lambda, gamma and margin must be non-negative");
}

AgglomerativeOptions JuleConfig::agglomerative() const {
  AgglomerativeOptions o;
  o.ks = ks;
  o.a = a;
  o.kc = kc;
  o.lambda = lambda;
  o.target_nc = target_nc;
  o.mode = mode;
  o.threads = threads;
  return o;
}

std::vector<std::size_t> period_schedule(std::size_t initial, std::size_t target, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (target == 0 || target > initial) throw ConfigError("target must lie in [1, initial]");
  std::vector<std::size_t> lengths;
  for (std::size_t live = initial; live > target;) {
    const std::size_t n_p = period_length(live, target, eta);
    lengths.push_back(n_p);
    live -= n_p;
  }
  return lengths;
}

RunTrace run_jule(const Matrix& raw, const JuleConfig& config, std::span<const int> labels) {
  return joint_loop(raw, config, labels, config.dims, true, false);
}

AgglomerativeResult rerun_final_clustering(const EmbeddingNet& net, const Matrix& raw, const JuleConfig& config) {
  config.validate();
  const Matrix features = net.embed(normalized_copy(raw), config.threads);
  const SampleAffinityGraph graph = sample_affinity(features, config.ks, config.a, config.threads);
  Partition initial = init_clusters(graph);
  if (initial.live_count() <= config.target_nc) {
    AgglomerativeResult result;
    result.initial_clusters = initial.live_count();
    result.partition = std::move(initial);
    return result;
  }
  return run_agglomerative(graph, config.agglomerative());
}

VisualizationResult run_visualization(const Matrix& raw, const JuleConfig& config, std::size_t out_dim,
                                      std::span<const int> labels) {
  if (out_dim == 0) throw ConfigError("output dimension must be positive");
  std::vector<std::size_t> dims = config.dims;
  dims.push_back(out_dim);
  VisualizationResult result;
  result.trace = joint_loop(raw, config, labels, std::move(dims), false, true);
  result.embedding = result.trace.features;
  return result;
}

std::string trace_json(const RunTrace& trace, bool with_timings) {
  nlohmann::json periods = nlohmann::json::array();
  for (const auto& r : trace.periods) periods.push_back(record_json(r, with_timings));
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps)
    steps.push_back({{"t", s.t}, {"winner", s.winner}, {"neighbor", s.neighbor}, {"loss", s.loss},
                     {"clusters", s.n_clusters}});
  nlohmann::json j = {
      {"samples", trace.sample_count},
      {"initial_clusters", trace.initial_clusters},
      {"final_clusters", trace.partition.live_count()},
      {"final_train", trace.final_train},
      {"periods", periods},
      {"merges", steps},
      {"net_dims", trace.net.layer_dims()},
  };
  if (trace.final_pass) j["final_pass"] = record_json(*trace.final_pass, with_timings);
  return j.dump(2);
}

}  // namespace jule
