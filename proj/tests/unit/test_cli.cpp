#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "corpus.hpp"
#include "metrics.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MUSE_CLI_PATH;
const std::string kData = MUSE_TEST_DATA;
const std::string kSmallModel =
    " --embed-dim 12 --hidden-size 6 --proj-dim 12 --gcn-dims 8,6 --mlp-hidden 6 --epochs 3 --batch-size 4";

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Workspace {
 public:
  explicit Workspace(const std::string& name) : dir_(fs::temp_directory_path() / ("muse_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string path(const std::string& f) const { return (dir_ / f).string(); }

  Run run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + kCli + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout.txt");
    r.err = slurp(dir_ / "stderr.txt");
    return r;
  }

  void prepare(const std::string& extra = "") const {
    auto r = run("prepare --qa " + kData + "/qa.jsonl --reviews " + kData + "/reviews.jsonl --out prep.jsonl --seed 7" + extra);
    REQUIRE(r.code == 0);
  }

 private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("prepare writes labels, at most five snippets and a count table") {
  Workspace ws("prepare");
  auto r = ws.run("prepare --qa " + kData + "/qa.jsonl --reviews " + kData + "/reviews.jsonl --out prep.jsonl --seed 7");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Test") != std::string::npos);
  CHECK(r.out.find("# Pos A") != std::string::npos);
  auto threads = muse::corpus::read_prepared(ws.path("prep.jsonl"));
  CHECK(threads.size() == 21);
  size_t test = 0;
  for (const auto& t : threads) {
    CHECK(t.snippets.size() <= 5);
    CHECK(t.padded == (t.snippets.size() < 5));
    for (const auto& a : t.answers) CHECK(a.label == muse::corpus::derive_label(a.pos_votes, a.neg_votes));
    test += t.split == muse::corpus::Split::kTest;
  }
  CHECK(test == 2);

  const std::string first = slurp(ws.path("prep.jsonl"));
  REQUIRE(ws.run("prepare --qa " + kData + "/qa.jsonl --reviews " + kData + "/reviews.jsonl --out prep.jsonl --seed 7").code == 0);
  CHECK(slurp(ws.path("prep.jsonl")) == first);
}

TEST_CASE("errors are one machine-readable line with a nonzero exit") {
  Workspace ws("errors");
  auto missing = ws.run("prepare --qa " + kData + "/qa.jsonl --reviews nowhere.jsonl --out prep.jsonl");
  CHECK(missing.code != 0);
  CHECK(missing.err.rfind("error: code=io message=", 0) == 0);
  CHECK(missing.err.find("nowhere.jsonl") != std::string::npos);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

  auto unknown = ws.run("train --corpus x --checkpoint y --set nonsense=1");
  CHECK(unknown.code != 0);
  CHECK(unknown.err.rfind("error: code=config", 0) == 0);

  auto bad_flag = ws.run("train --frobnicate");
  CHECK(bad_flag.code != 0);
  CHECK(bad_flag.err.rfind("error: code=argument", 0) == 0);

  auto no_model = ws.run("evaluate --corpus " + kData + "/qa.jsonl --checkpoint none.ckpt");
  CHECK(no_model.code != 0);
  CHECK(no_model.err.rfind("error: code=io", 0) == 0);
}

TEST_CASE("config file values are overridden by flags") {
  Workspace ws("precedence");
  {
    std::ofstream conf(ws.path("run.conf"));
    conf << "qa = " << kData << "/qa.jsonl\nreviews = " << kData << "/reviews.jsonl\nout = prep.jsonl\nnum_snippets = 2\n";
  }
  REQUIRE(ws.run("prepare --config run.conf").code == 0);
  for (const auto& t : muse::corpus::read_prepared(ws.path("prep.jsonl"))) CHECK(t.snippets.size() <= 2);
  REQUIRE(ws.run("prepare --config run.conf --num-snippets 4").code == 0);
  size_t max_seen = 0;
  for (const auto& t : muse::corpus::read_prepared(ws.path("prep.jsonl"))) max_seen = std::max(max_seen, t.snippets.size());
  CHECK(max_seen == 4);
}

TEST_CASE("train, evaluate and rank") {
  Workspace ws("pipeline");
  ws.prepare();
  auto tr = ws.run("train --corpus prep.jsonl --checkpoint model.ckpt --log log.jsonl" + kSmallModel);
  REQUIRE(tr.code == 0);
  std::istringstream log(slurp(ws.path("log.jsonl")));
  std::string line;
  int epochs = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch").get<int>() == ++epochs);
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("val_map"));
    CHECK(j.contains("val_mrr"));
  }
  CHECK(epochs == 3);

  for (const char* loss : {"pointwise", "listwise"}) {
    CHECK(ws.run(std::string("train --corpus prep.jsonl --checkpoint other.ckpt --loss ") + loss + kSmallModel).code == 0);
  }

  REQUIRE(ws.run("rank --corpus prep.jsonl --checkpoint model.ckpt --split all --out rank.tsv").code == 0);
  REQUIRE(ws.run("evaluate --corpus prep.jsonl --checkpoint model.ckpt --split all --report report.json "
                 "--per-question pq.tsv").code == 0);

  // Recompute the metrics from the ranking file and the stored labels.
  auto threads = muse::corpus::read_prepared(ws.path("prep.jsonl"));
  std::map<std::string, const muse::corpus::QuestionThread*> by_id;
  for (const auto& t : threads) by_id[t.question_id] = &t;
  std::map<std::string, std::vector<int>> ranked;
  std::map<std::string, double> last_score;
  std::vector<std::string> order;
  std::istringstream rank(slurp(ws.path("rank.tsv")));
  while (std::getline(rank, line)) {
    std::istringstream f(line);
    std::string qid;
    size_t idx;
    double score;
    f >> qid >> idx >> score;
    if (!ranked.count(qid)) order.push_back(qid);
    else CHECK(last_score[qid] >= score);
    last_score[qid] = score;
    ranked[qid].push_back(by_id.at(qid)->answers.at(idx).label);
  }
  std::vector<std::vector<int>> lists;
  for (const auto& q : order) lists.push_back(ranked[q]);
  auto oracle = muse::eval::evaluate_ranking(lists);
  auto report = nlohmann::json::parse(slurp(ws.path("report.json")));
  CHECK(report.at("map").get<double>() == doctest::Approx(oracle.map).epsilon(1e-12));
  CHECK(report.at("mrr").get<double>() == doctest::Approx(oracle.mrr).epsilon(1e-12));
  CHECK(report.at("p_at").at("1").get<double>() == doctest::Approx(oracle.p_at.at(1)).epsilon(1e-12));
  CHECK(report.at("p_at").at("3").get<double>() == doctest::Approx(oracle.p_at.at(3)).epsilon(1e-12));
  CHECK(report.at("n_evaluated").get<size_t>() == oracle.n_evaluated);
  const std::string tsv = slurp(ws.path("pq.tsv"));
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == static_cast<long>(oracle.n_evaluated));

  auto mismatch = ws.run("evaluate --corpus prep.jsonl --checkpoint model.ckpt --set hidden_size=7");
  CHECK(mismatch.code != 0);
  CHECK(mismatch.err.find("hidden_size") != std::string::npos);
}

TEST_CASE("bm25 baseline needs no checkpoint and supports significance") {
  Workspace ws("bm25");
  ws.prepare();
  REQUIRE(ws.run("rank --corpus prep.jsonl --ranker bm25 --split all --out bm25.tsv").code == 0);
  auto r = ws.run("evaluate --corpus prep.jsonl --ranker bm25 --split all --compare bm25.tsv --report r.json");
  REQUIRE(r.code == 0);
  auto report = nlohmann::json::parse(slurp(ws.path("r.json")));
  CHECK(report.at("significance").at("p_value").get<double>() == 1.0);
  CHECK(r.out.find("MAP=") == 0);
}

TEST_CASE("snippet count sweep and ablation flags run end to end") {
  Workspace ws("sweep");
  ws.prepare(" --num-snippets 10");
  REQUIRE(ws.run("train --corpus prep.jsonl --checkpoint m.ckpt --num-snippets 10 --epochs 1" +
                 std::string(" --embed-dim 8 --hidden-size 4 --proj-dim 8 --gcn-dims 6,4 --mlp-hidden 4")).code == 0);
  for (int n = 1; n <= 10; ++n) {
    CAPTURE(n);
    CHECK(ws.run("evaluate --corpus prep.jsonl --checkpoint m.ckpt --split all --num-snippets " + std::to_string(n)).code == 0);
  }
  for (const char* flag : {"--no-relevance", "--no-similarity", "--no-entailment"}) {
    CAPTURE(flag);
    CHECK(ws.run(std::string("rank --corpus prep.jsonl --checkpoint m.ckpt --split all --out r.tsv ") + flag).code == 0);
  }
  for (const char* flag : {"--no-textual-feature", "--no-interaction-feature"}) {
    CAPTURE(flag);
    CHECK(ws.run(std::string("train --corpus prep.jsonl --checkpoint f.ckpt --epochs 1 ") + flag +
                 " --embed-dim 8 --hidden-size 4 --proj-dim 8 --gcn-dims 6,4 --mlp-hidden 4").code == 0);
  }
  REQUIRE(ws.run("rank --corpus prep.jsonl --checkpoint m.ckpt --split test --out r.tsv --dump-graph g.txt").code == 0);
  CHECK(slurp(ws.path("g.txt")).find("[entailment]") != std::string::npos);
}
