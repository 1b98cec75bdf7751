#include "jule/jule.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "jule/agglomerative.hpp"
#include "jule/dataset.hpp"
#include "jule/driver.hpp"
#include "jule/metrics.hpp"

struct jule_dataset {
  jule::Dataset data;
};

struct jule_result {
  jule::RunTrace trace;
  bool has_net = false;
};

namespace {

thread_local std::string last_error;

jule_status fail(jule_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, translating library exceptions into status codes.
template <typename Body>
jule_status guarded(Body&& body) {
  try {
    body();
    return JULE_OK;
  } catch (const jule::FormatError& e) {
    return fail(JULE_ERR_FORMAT, e.what());
  } catch (const jule::ConfigError& e) {
    return fail(JULE_ERR_CONFIG, e.what());
  } catch (const jule::DegenerateGraph& e) {
    return fail(JULE_ERR_DEGENERATE, e.what());
  } catch (const jule::LogicError& e) {
    return fail(JULE_ERR_LOGIC, e.what());
  } catch (const jule::NormalizationError& e) {
    return fail(JULE_ERR_NORMALIZATION, e.what());
  } catch (const jule::IoError& e) {
    return fail(JULE_ERR_IO, e.what());
  } catch (const jule::Error& e) {
    return fail(JULE_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(JULE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(JULE_ERR_INTERNAL, e.what());
  }
}

jule::JuleConfig to_config(const jule_params& p) {
  jule::JuleConfig c;
  c.ks = p.ks;
  c.a = p.a;
  c.kc = p.kc;
  c.lambda = p.lambda;
  c.gamma = p.gamma;
  c.margin = p.margin;
  c.eta = p.eta;
  c.target_nc = p.target_nc;
  c.epochs_per_period = p.epochs;
  c.batch_size = p.batch_size;
  if (p.dims != nullptr && p.dims_len > 0) c.dims.assign(p.dims, p.dims + p.dims_len);
  c.per_anchor = p.per_anchor;
  c.sgd = {p.base_lr, p.momentum, p.weight_decay, p.lr_gamma, p.lr_power};
  switch (p.mode) {
    case JULE_MODE_EXACT: c.mode = jule::AffinityMode::exact(); break;
    case JULE_MODE_SIZE_WEIGHTED: c.mode = jule::AffinityMode::size_weighted(); break;
    case JULE_MODE_ALPHA: c.mode = jule::AffinityMode::with_alpha(p.alpha); break;
    default: throw jule::ConfigError("unknown affinity mode " + std::to_string(static_cast<int>(p.mode)));
  }
  c.final_train = p.final_train != 0;
  c.seed = p.seed;
  c.threads = p.threads;
  if (p.progress != nullptr) {
    c.progress = [fn = p.progress, user = p.progress_user](std::string_view line) {
      const std::string copy(line);
      fn(copy.c_str(), user);
    };
  }
  return c;
}

std::span<const int> labels_of(const jule_dataset* ds) {
  if (!ds->data.labels) return {};
  return *ds->data.labels;
}

}  // namespace

extern "C" {

const char* jule_version(void) { return "1.0.0"; }

const char* jule_last_error(void) { return last_error.c_str(); }

const char* jule_status_name(jule_status status) {
  switch (status) {
    case JULE_OK: return "ok";
    case JULE_ERR_ARGUMENT: return "invalid argument";
    case JULE_ERR_FORMAT: return "format error";
    case JULE_ERR_CONFIG: return "configuration error";
    case JULE_ERR_DEGENERATE: return "degenerate graph";
    case JULE_ERR_LOGIC: return "logic error";
    case JULE_ERR_NORMALIZATION: return "normalization error";
    case JULE_ERR_IO: return "i/o error";
    case JULE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void jule_params_default(jule_params* params) {
  if (params == nullptr) return;
  const jule::JuleConfig c;
  *params = jule_params{};
  params->ks = c.ks;
  params->a = c.a;
  params->kc = c.kc;
  params->lambda = c.lambda;
  params->gamma = c.gamma;
  params->margin = c.margin;
  params->eta = c.eta;
  params->target_nc = c.target_nc;
  params->epochs = c.epochs_per_period;
  params->batch_size = c.batch_size;
  params->per_anchor = c.per_anchor;
  params->base_lr = c.sgd.base_lr;
  params->momentum = c.sgd.momentum;
  params->weight_decay = c.sgd.weight_decay;
  params->lr_gamma = c.sgd.lr_gamma;
  params->lr_power = c.sgd.lr_power;
  params->mode = JULE_MODE_EXACT;
  params->alpha = 0.0;
  params->final_train = 1;
  params->normalize_input = 1;
  params->seed = c.seed;
  params->threads = 1;
}

jule_status jule_dataset_open(const char* uri, int csv_header, jule_dataset** out) {
  if (uri == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto ds = std::make_unique<jule_dataset>();
    ds->data = jule::open_dataset(uri, csv_header != 0);
    ds->data.validate();
    *out = ds.release();
  });
}

jule_status jule_dataset_from_array(const double* data, size_t n, size_t d, const int* labels, jule_dataset** out) {
  if (out == nullptr || (data == nullptr && n * d > 0)) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto ds = std::make_unique<jule_dataset>();
    ds->data.name = "array";
    ds->data.features = jule::Matrix(n, d, std::vector<double>(data, data + n * d));
    if (labels != nullptr) ds->data.labels = std::vector<int>(labels, labels + n);
    ds->data.validate();
    *out = ds.release();
  });
}

void jule_dataset_free(jule_dataset* dataset) { delete dataset; }

size_t jule_dataset_rows(const jule_dataset* dataset) { return dataset ? dataset->data.features.rows() : 0; }

size_t jule_dataset_cols(const jule_dataset* dataset) { return dataset ? dataset->data.features.cols() : 0; }

int jule_dataset_has_labels(const jule_dataset* dataset) {
  return dataset != nullptr && dataset->data.labels.has_value();
}

jule_status jule_dataset_features(const jule_dataset* dataset, double* out) {
  if (dataset == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  const auto& values = dataset->data.features.data();
  std::copy(values.begin(), values.end(), out);
  return JULE_OK;
}

jule_status jule_dataset_labels(const jule_dataset* dataset, int* out) {
  if (dataset == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  if (!dataset->data.labels) return fail(JULE_ERR_LOGIC, "dataset has no labels");
  std::copy(dataset->data.labels->begin(), dataset->data.labels->end(), out);
  return JULE_OK;
}

jule_status jule_cluster(const jule_dataset* dataset, const jule_params* params, jule_result** out) {
  if (dataset == nullptr || params == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const jule::JuleConfig config = to_config(*params);
    jule::Matrix features = dataset->data.features;
    if (params->normalize_input != 0) jule::l2_normalize_rows_inplace(features);
    auto result = std::make_unique<jule_result>();
    jule::AgglomerativeResult run = jule::run_agglomerative(features, config.agglomerative());
    result->trace.sample_count = features.rows();
    result->trace.initial_clusters = run.initial_clusters;
    result->trace.final_train = false;
    result->trace.steps = std::move(run.steps);
    result->trace.partition = std::move(run.partition);
    result->trace.features = std::move(features);
    *out = result.release();
  });
}

jule_status jule_run(const jule_dataset* dataset, const jule_params* params, jule_result** out) {
  if (dataset == nullptr || params == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto result = std::make_unique<jule_result>();
    result->trace = jule::run_jule(dataset->data.features, to_config(*params), labels_of(dataset));
    result->has_net = true;
    *out = result.release();
  });
}

jule_status jule_rerun(const jule_result* joint, const jule_dataset* dataset, const jule_params* params,
                       jule_result** out) {
  if (joint == nullptr || dataset == nullptr || params == nullptr || out == nullptr)
    return fail(JULE_ERR_ARGUMENT, "null argument");
  if (!joint->has_net) return fail(JULE_ERR_LOGIC, "result has no trained net");
  *out = nullptr;
  return guarded([&] {
    const jule::JuleConfig config = to_config(*params);
    jule::AgglomerativeResult run = jule::rerun_final_clustering(joint->trace.net, dataset->data.features, config);
    auto result = std::make_unique<jule_result>();
    result->trace.sample_count = dataset->data.features.rows();
    result->trace.initial_clusters = run.initial_clusters;
    result->trace.final_train = false;
    result->trace.steps = std::move(run.steps);
    result->trace.partition = std::move(run.partition);
    result->trace.features = joint->trace.features;
    result->trace.net = joint->trace.net;
    result->has_net = true;
    *out = result.release();
  });
}

jule_status jule_visualize(const jule_dataset* dataset, const jule_params* params, size_t out_dim,
                           jule_result** out) {
  if (dataset == nullptr || params == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto result = std::make_unique<jule_result>();
    result->trace =
        jule::run_visualization(dataset->data.features, to_config(*params), out_dim, labels_of(dataset)).trace;
    result->has_net = true;
    *out = result.release();
  });
}

void jule_result_free(jule_result* result) { delete result; }

size_t jule_result_samples(const jule_result* result) { return result ? result->trace.partition.sample_count() : 0; }

size_t jule_result_clusters(const jule_result* result) { return result ? result->trace.partition.live_count() : 0; }

size_t jule_result_initial_clusters(const jule_result* result) {
  return result ? result->trace.initial_clusters : 0;
}

size_t jule_result_merges(const jule_result* result) { return result ? result->trace.steps.size() : 0; }

jule_status jule_result_labels(const jule_result* result, int* out) {
  if (result == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  const auto labels = result->trace.partition.dense_labels();
  std::copy(labels.begin(), labels.end(), out);
  return JULE_OK;
}

size_t jule_result_feature_dim(const jule_result* result) { return result ? result->trace.features.cols() : 0; }

jule_status jule_result_features(const jule_result* result, double* out) {
  if (result == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  const auto& values = result->trace.features.data();
  std::copy(values.begin(), values.end(), out);
  return JULE_OK;
}

jule_status jule_result_trace_json(const jule_result* result, int with_timings, char** out) {
  if (result == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const std::string text = jule::trace_json(result->trace, with_timings != 0);
    char* buffer = new char[text.size() + 1];
    std::memcpy(buffer, text.c_str(), text.size() + 1);
    *out = buffer;
  });
}

jule_status jule_result_save_checkpoint(const jule_result* result, const char* path) {
  if (result == nullptr || path == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  if (!result->has_net) return fail(JULE_ERR_LOGIC, "result has no trained net");
  return guarded([&] { result->trace.net.save(std::filesystem::path(path)); });
}

void jule_string_free(char* text) { delete[] text; }

jule_status jule_nmi(const int* a, const int* b, size_t n, double* out) {
  if (a == nullptr || b == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  return guarded([&] { *out = jule::nmi({a, n}, {b, n}); });
}

jule_status jule_accuracy(const int* pred, const int* truth, size_t n, double* out) {
  if (pred == nullptr || truth == nullptr || out == nullptr) return fail(JULE_ERR_ARGUMENT, "null argument");
  return guarded([&] { *out = jule::accuracy({pred, n}, {truth, n}); });
}

jule_status jule_one_nn_error(const double* train, const int* train_labels, size_t n_train, const double* test,
                              const int* test_labels, size_t n_test, size_t d, double* out) {
  if (train == nullptr || train_labels == nullptr || test == nullptr || test_labels == nullptr || out == nullptr)
    return fail(JULE_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const jule::Matrix tr(n_train, d, std::vector<double>(train, train + n_train * d));
    const jule::Matrix te(n_test, d, std::vector<double>(test, test + n_test * d));
    *out = jule::one_nn_error(tr, {train_labels, n_train}, te, {test_labels, n_test});
  });
}

}  // extern "C"
