#include <doctest.h>

#include <set>

#include "relgraph.hpp"
#include "test_support.hpp"

using namespace muse;
using namespace muse::relgraph;
namespace mt = muse::testing;

namespace {

std::set<std::pair<int, int>> support(const Matrix& a) {
  std::set<std::pair<int, int>> s;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) s.insert({static_cast<int>(i), static_cast<int>(j)});
  return s;
}

std::set<std::pair<int, int>> symmetric(std::initializer_list<std::pair<int, int>> pairs) {
  std::set<std::pair<int, int>> s;
  for (auto [i, j] : pairs) {
    s.insert({i, j});
    s.insert({j, i});
  }
  return s;
}

struct GcnFixture {
  ad::ParameterStore store;
  GcnParameters params;

  GcnFixture(const std::vector<int>& dims, Rng& rng) {
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
      LayerParameters layer;
      for (size_t r = 0; r < 3; ++r) {
        layer.relation[r] = &store.add("l" + std::to_string(l) + "r" + std::to_string(r),
                                       mt::random_matrix(dims[l], dims[l + 1], rng));
      }
      layer.self = &store.add("l" + std::to_string(l) + "s", mt::random_matrix(dims[l], dims[l + 1], rng));
      params.layers.push_back(layer);
    }
  }
};

SemanticGraph random_graph(ad::Tape& t, size_t na, size_t nc, Eigen::Index d, Rng& rng) {
  std::vector<ad::Var> answers, snippets;
  for (size_t i = 0; i < na; ++i) answers.push_back(t.constant(mt::random_matrix(1, d, rng)));
  for (size_t i = 0; i < nc; ++i) snippets.push_back(t.constant(mt::random_matrix(1, d, rng)));
  return build_graph(t.constant(mt::random_matrix(1, d, rng)), answers, snippets);
}

}  // namespace

TEST_CASE("adjacency supports for two answers and two snippets") {
  auto adj = build_adjacency(2, 2);
  CHECK(support(adj[0]) == symmetric({{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
  CHECK(support(adj[1]) == symmetric({{1, 2}, {3, 4}}));
  CHECK(support(adj[2]) == symmetric({{1, 3}, {1, 4}, {2, 3}, {2, 4}}));
}

TEST_CASE("degenerate single-answer graph") {
  auto adj = build_adjacency(1, 0);
  CHECK(adj[0].rows() == 2);
  CHECK(support(adj[0]) == symmetric({{0, 1}}));
  CHECK(adj[1].isZero(0.0));
  CHECK(adj[2].isZero(0.0));
}

TEST_CASE("adjacency invariants over many sizes") {
  for (size_t na = 1; na <= 6; ++na) {
    for (size_t nc = 0; nc <= 6; ++nc) {
      auto adj = build_adjacency(na, nc);
      for (const auto& a : adj) {
        CHECK(a.rows() == static_cast<Eigen::Index>(1 + na + nc));
        CHECK(a == a.transpose());
        CHECK(a.diagonal().isZero(0.0));
        auto n = normalize_adjacency(a);
        CHECK((n - n.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(n.minCoeff() >= 0.0);
        CHECK(n.maxCoeff() <= 1.0);
      }
      CHECK(adj[0].cwiseProduct(adj[1]).isZero(0.0));
      CHECK(adj[0].cwiseProduct(adj[2]).isZero(0.0));
      CHECK(adj[1].cwiseProduct(adj[2]).isZero(0.0));
    }
  }
}

TEST_CASE("symmetric normalization values") {
  Matrix pair(2, 2);
  pair << 0, 1, 1, 0;
  CHECK(normalize_adjacency(pair) == pair);

  Matrix star = Matrix::Zero(5, 5);
  for (int j = 1; j < 5; ++j) star(0, j) = star(j, 0) = 1;
  auto n = normalize_adjacency(star);
  for (int j = 1; j < 5; ++j) {
    CHECK(n(0, j) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n(j, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }

  Matrix isolated = Matrix::Zero(3, 3);
  isolated(0, 1) = isolated(1, 0) = 1;
  auto m = normalize_adjacency(isolated);
  CHECK(m.row(2).isZero(0.0));
  CHECK(m.col(2).isZero(0.0));

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = 1;
  CHECK_THROWS_AS(normalize_adjacency(bad), ArgumentError);
}

TEST_CASE("graph construction checks feature widths") {
  ad::Tape t(false);
  Rng rng(1);
  auto g = random_graph(t, 3, 2, 4, rng);
  CHECK(g.node_count() == 6);
  CHECK(g.features.rows() == 6);
  CHECK_THROWS_AS(build_graph(t.constant(Matrix::Zero(1, 4)), {t.constant(Matrix::Zero(1, 3))}, {}), ArgumentError);
  CHECK_THROWS_AS(build_graph(t.constant(Matrix::Zero(1, 4)), {}, {}), ArgumentError);
}

TEST_CASE("self connection identity") {
  ad::Tape t(false);
  Rng rng(2);
  auto g = random_graph(t, 2, 2, 3, rng);
  Matrix h = mt::random_matrix(5, 3, rng).cwiseAbs();
  ad::ParameterStore store;
  LayerParameters layer;
  for (size_t r = 0; r < 3; ++r) layer.relation[r] = &store.add("r" + std::to_string(r), Matrix::Zero(3, 3));
  layer.self = &store.add("s", Matrix::Identity(3, 3));
  CHECK(rgcn_layer(t.constant(h), g, layer).value() == h);
}

TEST_CASE("relational layer on a hand fixture") {
  // one answer, one snippet: nodes q, a, c
  ad::Tape t(false);
  Matrix xq(1, 2), xa(1, 2), xc(1, 2);
  xq << 1, 0;
  xa << 0, 1;
  xc << 1, 1;
  auto g = build_graph(t.constant(xq), {t.constant(xa)}, {t.constant(xc)});
  ad::ParameterStore store;
  LayerParameters layer;
  Matrix wr(2, 2), ws(2, 2), wsim(2, 2), we(2, 2);
  wr << 1, 0, 0, 2;
  wsim << 5, 5, 5, 5;  // unused: no answer or snippet pairs
  we << 0, 1, 1, 0;
  ws << 1, -1, 0, 1;
  layer.relation[0] = &store.add("rel", wr);
  layer.relation[1] = &store.add("sim", wsim);
  layer.relation[2] = &store.add("ent", we);
  layer.self = &store.add("self", ws);
  auto out = rgcn_layer(t.constant(g.features.value()), g, layer).value();
  // relevance: q-a, q-c; degrees q=2, a=1, c=1 -> weight 1/sqrt(2)
  const double w = 1.0 / std::sqrt(2.0);
  // node q: w*(xa Wr) + w*(xc Wr) + xq Ws = w*[0,2] + w*[1,2] + [1,-1]
  CHECK(out(0, 0) == doctest::Approx(w * 1 + 1));
  CHECK(out(0, 1) == doctest::Approx(w * 4 - 1));
  // node a: w*(xq Wr) + (xc We) + xa Ws = w*[1,0] + [1,1] + [0,1]
  CHECK(out(1, 0) == doctest::Approx(w + 1));
  CHECK(out(1, 1) == doctest::Approx(2.0));
  // node c: w*[1,0] + (xa We)=[1,0] + xc Ws=[1,0]
  CHECK(out(2, 0) == doctest::Approx(w + 2));
  CHECK(out(2, 1) == doctest::Approx(0.0));
}

TEST_CASE("interaction features shape, sign and zero weights") {
  Rng rng(3);
  GcnFixture fx({200, 150, 100}, rng);
  ad::Tape t(false);
  auto g = random_graph(t, 4, 5, 200, rng);
  auto out = interaction_features(g, fx.params);
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 100);
  CHECK(out.value().minCoeff() >= 0.0);

  for (auto& p : fx.store) p->value.setZero();
  auto g1 = random_graph(t, 1, 0, 200, rng);
  CHECK(interaction_features(g1, fx.params).value().isZero(0.0));
}

TEST_CASE("snippet order does not change answer outputs") {
  Rng rng(4);
  GcnFixture fx({3, 4, 2}, rng);
  ad::Tape t(false);
  auto xq = t.constant(mt::random_matrix(1, 3, rng));
  std::vector<ad::Var> answers, snippets;
  for (int i = 0; i < 3; ++i) answers.push_back(t.constant(mt::random_matrix(1, 3, rng)));
  for (int i = 0; i < 4; ++i) snippets.push_back(t.constant(mt::random_matrix(1, 3, rng)));
  auto base = interaction_features(build_graph(xq, answers, snippets), fx.params).value();
  std::vector<ad::Var> shuffled = {snippets[2], snippets[0], snippets[3], snippets[1]};
  auto perm = interaction_features(build_graph(xq, answers, shuffled), fx.params).value();
  CHECK((base - perm).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("disabling a relation equals zeroing its adjacency") {
  Rng rng(5);
  GcnFixture fx({3, 4, 2}, rng);
  ad::Tape t(false);
  auto g = random_graph(t, 3, 2, 3, rng);
  for (Relation r : kRelations) {
    RelationMask mask;
    mask[r] = false;
    auto ablated = interaction_features(g, fx.params, mask).value();
    SemanticGraph zeroed = g;
    zeroed.clear_relation(r);
    auto oracle = interaction_features(zeroed, fx.params).value();
    CHECK(mt::bitwise_equal(ablated, oracle));
  }
}

TEST_CASE("graph gradients match finite differences") {
  Rng rng(6);
  GcnFixture fx({3, 4, 2}, rng);
  ad::ParameterStore& ps = fx.store;
  auto& feats = ps.add("features", mt::random_matrix(5, 3, rng));
  ad::Tape builder(false);
  auto shape = random_graph(builder, 2, 2, 3, rng);
  auto loss = [&](ad::Tape& t) {
    SemanticGraph g = shape;
    g.features = t.param(feats);
    auto out = interaction_features(g, fx.params);
    Rng w(9);
    return ad::sum(ad::hadamard(out, t.constant(mt::random_matrix(out.rows(), out.cols(), w))));
  };
  ps.zero_grad();
  {
    ad::Tape t;
    t.backward(loss(t));
  }
  auto checks = mt::finite_difference_check(ps, [&] {
    ad::Tape t(false);
    return loss(t).scalar();
  });
  for (const auto& c : checks) {
    CAPTURE(c.name);
    CHECK(c.rel_error < 1e-3);
  }
}

TEST_CASE("adjacency dump") {
  auto adj = build_adjacency(1, 1);
  CHECK(dump_adjacency(adj[0]) == "0 1 1\n1 0 0\n1 0 0\n");
}
