// Command-line front end. Links only the C API.
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "muse/muse.h"

namespace {

struct Settings {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> assignments;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int report_error(muse_status status, const std::string& message) {
  std::fprintf(stderr, "error: code=%s message=%s\n", muse_status_name(status), one_line(message).c_str());
  return static_cast<int>(status);
}

void value_option(CLI::App* app, Settings& s, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&s, key](const std::string& v) { s.assignments.emplace_back(key, v); }, help);
}

void switch_option(CLI::App* app, Settings& s, const std::string& flag, const std::string& key,
                   const std::string& help) {
  app->add_flag_callback(flag, [&s, key] { s.assignments.emplace_back(key, "true"); }, help);
}

void common_options(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config_file, "key = value configuration file");
  app->add_option_function<std::vector<std::string>>(
         "--set",
         [&s](const std::vector<std::string>& items) {
           for (const auto& item : items) {
             auto eq = item.find('=');
             if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got " + item);
             s.assignments.emplace_back(item.substr(0, eq), item.substr(eq + 1));
           }
         },
         "override any configuration key (key=value, repeatable)")
      ->allow_extra_args(false);
  value_option(app, s, "--seed", "seed", "root random seed");
}

void model_options(CLI::App* app, Settings& s) {
  value_option(app, s, "--num-snippets", "num_snippets", "review snippets per question");
  value_option(app, s, "--k", "k", "clip-rescale attention budget");
  value_option(app, s, "--max-seq-len", "max_seq_len", "tokens kept per text (0 = all)");
  switch_option(app, s, "--no-relevance", "no_relevance", "drop the question relevance relation");
  switch_option(app, s, "--no-similarity", "no_similarity", "drop the similarity relation");
  switch_option(app, s, "--no-entailment", "no_entailment", "drop the entailment relation");
  switch_option(app, s, "--no-textual-feature", "no_textual_feature", "drop the textual answer feature");
  switch_option(app, s, "--no-interaction-feature", "no_interaction_feature",
                "drop the graph interaction feature");
}

void training_options(CLI::App* app, Settings& s) {
  value_option(app, s, "--loss", "loss", "pointwise, listwise or joint");
  value_option(app, s, "--lambda", "lambda", "listwise weight");
  value_option(app, s, "--eta", "eta", "regularization weight");
  value_option(app, s, "--epochs", "epochs", "maximum epochs");
  value_option(app, s, "--batch-size", "batch_size", "threads per batch");
  value_option(app, s, "--learning-rate", "learning_rate", "Adam step size");
  value_option(app, s, "--patience", "patience", "early-stopping patience (0 disables)");
  value_option(app, s, "--embed-dim", "embed_dim", "word vector width");
  value_option(app, s, "--hidden-size", "hidden_size", "LSTM size per direction");
  value_option(app, s, "--proj-dim", "proj_dim", "enriched answer width");
  value_option(app, s, "--gcn-dims", "gcn_dims", "comma-separated graph layer widths");
  value_option(app, s, "--mlp-hidden", "mlp_hidden", "prediction head hidden width");
}

muse_status build_config(const Settings& s, muse_config** out) {
  muse_config* cfg = nullptr;
  muse_status st = muse_config_create(&cfg);
  if (st != MUSE_OK) return st;
  if (!s.config_file.empty()) st = muse_config_load_file(cfg, s.config_file.c_str());
  for (const auto& [k, v] : s.assignments) {
    if (st != MUSE_OK) break;
    st = muse_config_set(cfg, k.c_str(), v.c_str());
  }
  if (st != MUSE_OK) {
    muse_config_destroy(cfg);
    return st;
  }
  *out = cfg;
  return MUSE_OK;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Answer ranking for product questions using review evidence"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(muse_version()));

  Settings prepare_s, train_s, eval_s, rank_s;

  auto* prepare = app.add_subcommand("prepare", "label answers, retrieve snippets and split the corpus");
  common_options(prepare, prepare_s);
  value_option(prepare, prepare_s, "--qa", "qa", "question/answer JSON-lines file");
  value_option(prepare, prepare_s, "--reviews", "reviews", "review JSON-lines file");
  value_option(prepare, prepare_s, "--out", "out", "prepared corpus to write");
  value_option(prepare, prepare_s, "--num-snippets", "num_snippets", "snippets retrieved per question");
  value_option(prepare, prepare_s, "--test-fraction", "test_fraction", "share of questions held out for test");
  value_option(prepare, prepare_s, "--val-fraction", "val_fraction", "share of questions held out for validation");

  auto* train = app.add_subcommand("train", "train a ranker on a prepared corpus");
  common_options(train, train_s);
  value_option(train, train_s, "--corpus", "corpus", "prepared corpus");
  value_option(train, train_s, "--embeddings", "embeddings", "pretrained word vectors (optional)");
  value_option(train, train_s, "--checkpoint", "checkpoint", "checkpoint to write");
  value_option(train, train_s, "--log", "log", "JSON-lines epoch log to write");
  model_options(train, train_s);
  training_options(train, train_s);

  auto* evaluate = app.add_subcommand("evaluate", "score a ranker on one split");
  common_options(evaluate, eval_s);
  value_option(evaluate, eval_s, "--corpus", "corpus", "prepared corpus");
  value_option(evaluate, eval_s, "--checkpoint", "checkpoint", "trained checkpoint");
  value_option(evaluate, eval_s, "--ranker", "ranker", "muse or bm25");
  value_option(evaluate, eval_s, "--split", "split", "train, val, test, none or all");
  value_option(evaluate, eval_s, "--report", "report", "JSON report to write");
  value_option(evaluate, eval_s, "--per-question", "per_question_tsv", "per-question TSV to write");
  value_option(evaluate, eval_s, "--compare", "compare", "rankings file of a second system");
  value_option(evaluate, eval_s, "--iterations", "iterations", "randomization test resamples");
  model_options(evaluate, eval_s);

  auto* rank = app.add_subcommand("rank", "write per-question answer rankings");
  common_options(rank, rank_s);
  value_option(rank, rank_s, "--corpus", "corpus", "prepared corpus");
  value_option(rank, rank_s, "--checkpoint", "checkpoint", "trained checkpoint");
  value_option(rank, rank_s, "--ranker", "ranker", "muse or bm25");
  value_option(rank, rank_s, "--split", "split", "train, val, test, none or all");
  value_option(rank, rank_s, "--out", "out", "rankings file to write");
  value_option(rank, rank_s, "--dump-graph", "dump_graph", "write each question's adjacency matrices");
  model_options(rank, rank_s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(MUSE_ERR_ARGUMENT, e.what());
  }

  muse_config* cfg = nullptr;
  muse_status st = MUSE_OK;
  if (*prepare) {
    if ((st = build_config(prepare_s, &cfg)) != MUSE_OK) return report_error(st, muse_last_error());
    char* summary = nullptr;
    st = muse_prepare(cfg, &summary);
    if (st == MUSE_OK) {
      std::fputs(summary, stdout);
      muse_string_free(summary);
    }
  } else if (*train) {
    if ((st = build_config(train_s, &cfg)) != MUSE_OK) return report_error(st, muse_last_error());
    muse_train_summary s{};
    st = muse_train(cfg, &s);
    if (st == MUSE_OK) {
      std::printf("best_epoch=%d best_val_map=%s epochs_run=%d vocab_size=%zu\n", s.best_epoch,
                  fmt(s.best_val_map).c_str(), s.epochs_run, s.vocab_size);
    }
  } else if (*evaluate) {
    if ((st = build_config(eval_s, &cfg)) != MUSE_OK) return report_error(st, muse_last_error());
    muse_metrics m{};
    st = muse_evaluate(cfg, &m);
    if (st == MUSE_OK) {
      std::printf("MAP=%s MRR=%s P@1=%s P@3=%s evaluated=%zu skipped=%zu\n", fmt(m.map).c_str(),
                  fmt(m.mrr).c_str(), fmt(m.p_at_1).c_str(), fmt(m.p_at_3).c_str(), m.n_evaluated,
                  m.n_skipped);
    }
  } else if (*rank) {
    if ((st = build_config(rank_s, &cfg)) != MUSE_OK) return report_error(st, muse_last_error());
    size_t n = 0;
    st = muse_rank(cfg, &n);
    if (st == MUSE_OK) std::printf("ranked %zu questions\n", n);
  }
  if (st != MUSE_OK) {
    const std::string message = muse_last_error();
    muse_config_destroy(cfg);
    return report_error(st, message);
  }
  muse_config_destroy(cfg);
  return 0;
}
