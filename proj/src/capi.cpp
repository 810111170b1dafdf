#include "muse/muse.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/corpus.hpp"
#include "core/metrics.hpp"
#include "core/pipeline.hpp"
#include "core/retrieval.hpp"
#include "core/text.hpp"

struct muse_config {
  muse::pipeline::RunConfig run;
};

namespace {

thread_local std::string g_last_error;

muse_status fail(muse_status status, const char* message) {
  g_last_error = message;
  return status;
}

template <typename F>
muse_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MUSE_OK;
  } catch (const muse::ArgumentError& e) {
    return fail(MUSE_ERR_ARGUMENT, e.what());
  } catch (const muse::IoError& e) {
    return fail(MUSE_ERR_IO, e.what());
  } catch (const muse::ParseError& e) {
    return fail(MUSE_ERR_PARSE, e.what());
  } catch (const muse::NumericError& e) {
    return fail(MUSE_ERR_NUMERIC, e.what());
  } catch (const muse::ConfigError& e) {
    return fail(MUSE_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MUSE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MUSE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MUSE_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw muse::ArgumentError(std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill(const muse::eval::MetricReport& r, muse_metrics* out) {
  out->map = r.map;
  out->mrr = r.mrr;
  out->p_at_1 = r.p_at.at(1);
  out->p_at_3 = r.p_at.at(3);
  out->n_evaluated = r.n_evaluated;
  out->n_skipped = r.n_skipped;
}

}  // namespace

extern "C" {

const char* muse_version(void) { return "1.0.0"; }

const char* muse_status_name(muse_status status) {
  switch (status) {
    case MUSE_OK: return "ok";
    case MUSE_ERR_ARGUMENT: return "argument";
    case MUSE_ERR_IO: return "io";
    case MUSE_ERR_PARSE: return "parse";
    case MUSE_ERR_NUMERIC: return "numeric";
    case MUSE_ERR_CONFIG: return "config";
    case MUSE_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* muse_last_error(void) { return g_last_error.c_str(); }

void muse_string_free(char* s) { std::free(s); }

muse_status muse_config_create(muse_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new muse_config();
  });
}

void muse_config_destroy(muse_config* config) { delete config; }

muse_status muse_config_set(muse_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->run.set(key, value);
  });
}

muse_status muse_config_load_file(muse_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->run.load_file(path);
  });
}

int muse_config_is_key(const char* key) {
  return key && muse::pipeline::RunConfig::is_key(key) ? 1 : 0;
}

muse_status muse_config_get(const muse_config* config, const char* key, char** value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    const auto& run = config->run;
    const std::string k = key;
    std::string v;
    if (muse::TrainingConfig::is_key(k)) {
      v = run.training.to_map().at(k);
    } else if (k == "test_fraction") {
      v = muse::pipeline::format_double(run.test_fraction);
    } else if (k == "val_fraction") {
      v = muse::pipeline::format_double(run.val_fraction);
    } else if (k == "bm25_k1") {
      v = muse::pipeline::format_double(run.bm25.k1);
    } else if (k == "bm25_b") {
      v = muse::pipeline::format_double(run.bm25.b);
    } else if (k == "split") {
      v = run.split;
    } else if (k == "ranker") {
      v = run.ranker;
    } else if (k == "iterations") {
      v = std::to_string(run.iterations);
    } else if (muse::pipeline::RunConfig::is_key(k)) {
      v = run.path(k);
    } else {
      throw muse::ConfigError("unknown config key '" + k + "'");
    }
    *value = duplicate(v);
  });
}

muse_status muse_prepare(const muse_config* config, char** summary) {
  return guarded([&] {
    require(config, "config");
    auto stats = muse::pipeline::run_prepare(config->run);
    if (summary) *summary = duplicate(muse::pipeline::format_prepare_stats(stats));
  });
}

muse_status muse_train(const muse_config* config, muse_train_summary* out) {
  return guarded([&] {
    require(config, "config");
    auto s = muse::pipeline::run_train(config->run);
    if (out) *out = {s.best_epoch, s.best_val_map, s.epochs_run, s.vocab_size};
  });
}

muse_status muse_evaluate(const muse_config* config, muse_metrics* out) {
  return guarded([&] {
    require(config, "config");
    auto report = muse::pipeline::run_evaluate(config->run);
    if (out) fill(report, out);
  });
}

muse_status muse_rank(const muse_config* config, size_t* questions_ranked) {
  return guarded([&] {
    require(config, "config");
    size_t n = muse::pipeline::run_rank(config->run);
    if (questions_ranked) *questions_ranked = n;
  });
}

muse_status muse_derive_label(int pos_votes, int neg_votes, int* label) {
  return guarded([&] {
    require(label, "label");
    *label = muse::corpus::derive_label(pos_votes, neg_votes);
  });
}

muse_status muse_evaluate_ranking(const int* labels, const size_t* lengths, size_t num_questions,
                                  muse_metrics* out) {
  return guarded([&] {
    require(lengths, "lengths");
    require(out, "out");
    std::vector<std::vector<int>> ranked(num_questions);
    size_t offset = 0;
    for (size_t q = 0; q < num_questions; ++q) {
      if (lengths[q] > 0) require(labels, "labels");
      ranked[q].assign(labels + offset, labels + offset + lengths[q]);
      offset += lengths[q];
    }
    fill(muse::eval::evaluate_ranking(ranked), out);
  });
}

muse_status muse_significance_test(const double* a, const double* b, size_t n, int iterations,
                                   uint64_t seed, double* p_value) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(p_value, "p_value");
    *p_value = muse::eval::significance_test({a, a + n}, {b, b + n}, iterations, seed);
  });
}

muse_status muse_bm25_scores(const char* query, const char* const* docs, size_t num_docs, double k1,
                             double b, double* scores) {
  return guarded([&] {
    require(query, "query");
    if (num_docs > 0) {
      require(docs, "docs");
      require(scores, "scores");
    }
    std::vector<muse::retrieval::Tokens> tokens;
    for (size_t i = 0; i < num_docs; ++i) {
      require(docs[i], "docs[i]");
      tokens.push_back(muse::text::tokenize(docs[i]));
    }
    const auto stats = muse::retrieval::CorpusStats::build(tokens);
    const auto q = muse::text::tokenize(query);
    for (size_t i = 0; i < num_docs; ++i) {
      scores[i] = muse::retrieval::bm25_score(q, tokens[i], stats, {k1, b});
    }
  });
}

}  // extern "C"
