#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "config.hpp"
#include "pipeline.hpp"

using namespace muse;

TEST_CASE("defaults") {
  TrainingConfig c;
  CHECK(c.embed_dim == 300);
  CHECK(c.hidden_size == 100);
  CHECK(c.context_dim() == 200);
  CHECK(c.proj_dim == 200);
  CHECK(c.k == 8);
  CHECK(c.num_snippets == 5);
  CHECK(c.gcn_dims == std::vector<int>{150, 100});
  CHECK(c.lambda == 2.0);
  CHECK(c.eta == 0.001);
  CHECK(c.p == 1.0);
  CHECK(c.batch_size == 50);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.loss == LossMode::kJoint);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("set and to_map round trip") {
  TrainingConfig c;
  c.set("gcn_dims", "7,5,3");
  c.set("loss", "listwise");
  c.set("no_entailment", "true");
  c.set("lambda", "0.25");
  c.set("seed", "123456789012");
  TrainingConfig d;
  for (const auto& [k, v] : c.to_map()) d.set(k, v);
  CHECK(d.to_map() == c.to_map());
  CHECK(d.gcn_dims == std::vector<int>{7, 5, 3});
  CHECK_FALSE(d.use_entailment);
  CHECK(d.seed == 123456789012ULL);
  CHECK(TrainingConfig::is_key("k"));
  CHECK_FALSE(TrainingConfig::is_key("qa"));
}

TEST_CASE("invalid values are rejected with the key named") {
  TrainingConfig c;
  for (auto [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"k", "0"}, {"k", "two"}, {"lambda", "-1"}, {"eta", "nan"}, {"loss", "hinge"},
           {"batch_size", "0"}, {"gcn_dims", ""}, {"gcn_dims", "3,,4"}, {"bogus", "1"}, {"no_relevance", "maybe"}}) {
    CAPTURE(k);
    CAPTURE(v);
    try {
      c.set(k, v);
      c.validate();
      FAIL("accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(k) != std::string::npos);
    }
    c = TrainingConfig{};
  }
  TrainingConfig both_off;
  both_off.use_textual_feature = false;
  both_off.use_interaction_feature = false;
  CHECK_THROWS_AS(both_off.validate(), ConfigError);
  TrainingConfig bad_proj;
  bad_proj.proj_dim = 50;
  CHECK_THROWS_AS(bad_proj.validate(), ConfigError);
}

TEST_CASE("run configuration file and precedence") {
  const auto path = (std::filesystem::temp_directory_path() / "muse_run.conf").string();
  {
    std::ofstream out(path);
    out << "# comment\nqa = data/qa.jsonl\nnum_snippets = 3  # trailing\nranker=bm25\n\nlambda=0.5\n";
  }
  pipeline::RunConfig cfg;
  cfg.load_file(path);
  CHECK(cfg.path("qa") == "data/qa.jsonl");
  CHECK(cfg.training.num_snippets == 3);
  CHECK(cfg.ranker == "bm25");
  CHECK(cfg.explicit_training.at("lambda") == "0.5");
  cfg.set("num_snippets", "7");
  CHECK(cfg.training.num_snippets == 7);
  CHECK_THROWS_AS(cfg.set("nope", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("ranker", "magic"), ConfigError);
  CHECK_THROWS_AS(cfg.set("split", "dev"), ConfigError);

  {
    std::ofstream out(path);
    out << "qa = x\nthis line is wrong\n";
  }
  pipeline::RunConfig bad;
  try {
    bad.load_file(path);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(bad.load_file(path + ".missing"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("double formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0}) {
    CHECK(std::stod(pipeline::format_double(v)) == v);
  }
}
