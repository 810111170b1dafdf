#include "relgraph.hpp"

#include <cmath>
#include <sstream>

namespace muse::relgraph {

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::kRelevance: return "relevance";
    case Relation::kSimilarity: return "similarity";
    case Relation::kEntailment: return "entailment";
  }
  return "?";
}

void SemanticGraph::clear_relation(Relation r) {
  adjacency[static_cast<size_t>(r)].setZero();
  normalized[static_cast<size_t>(r)].setZero();
}

std::array<Matrix, 3> build_adjacency(size_t num_answers, size_t num_snippets) {
  const auto n = static_cast<Eigen::Index>(1 + num_answers + num_snippets);
  const auto a1 = static_cast<Eigen::Index>(1 + num_answers);  // one past last answer
  std::array<Matrix, 3> adj;
  for (auto& m : adj) m = Matrix::Zero(n, n);
  Matrix& rel = adj[static_cast<size_t>(Relation::kRelevance)];
  Matrix& sim = adj[static_cast<size_t>(Relation::kSimilarity)];
  Matrix& ent = adj[static_cast<size_t>(Relation::kEntailment)];
  for (Eigen::Index j = 1; j < n; ++j) rel(0, j) = rel(j, 0) = 1.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 1; j < n; ++j) {
      if (i == j) continue;
      const bool i_ans = i < a1, j_ans = j < a1;
      if (i_ans == j_ans) {
        sim(i, j) = 1.0;
      } else {
        ent(i, j) = 1.0;
      }
    }
  }
  return adj;
}

Matrix normalize_adjacency(const Matrix& a) {
  if (a.rows() != a.cols()) throw ArgumentError("normalize_adjacency: matrix must be square");
  if (a != a.transpose()) {
    throw ArgumentError("normalize_adjacency: adjacency must be symmetric");
  }
  const Eigen::VectorXd degree = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt(degree.size());
  for (Eigen::Index i = 0; i < degree.size(); ++i) {
    inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  }
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

SemanticGraph build_graph(const ad::Var& x_q, const std::vector<ad::Var>& answers,
                          const std::vector<ad::Var>& snippets) {
  if (answers.empty()) throw ArgumentError("build_graph: at least one answer is required");
  const Eigen::Index dim = x_q.cols();
  std::vector<ad::Var> rows;
  rows.reserve(1 + answers.size() + snippets.size());
  rows.push_back(x_q);
  for (const auto& v : answers) rows.push_back(v);
  for (const auto& v : snippets) rows.push_back(v);
  for (const auto& v : rows) {
    if (v.rows() != 1 || v.cols() != dim) {
      throw ArgumentError("build_graph: node features must all be 1 x " + std::to_string(dim));
    }
  }
  SemanticGraph g;
  g.num_answers = answers.size();
  g.num_snippets = snippets.size();
  g.features = ad::concat_rows(rows);
  g.adjacency = build_adjacency(g.num_answers, g.num_snippets);
  for (size_t r = 0; r < 3; ++r) g.normalized[r] = normalize_adjacency(g.adjacency[r]);
  return g;
}

ad::Var rgcn_layer(const ad::Var& h, const SemanticGraph& graph, const LayerParameters& params,
                   const RelationMask& mask) {
  ad::Tape& tape = *h.tape();
  if (h.rows() != static_cast<Eigen::Index>(graph.node_count())) {
    throw ArgumentError("rgcn_layer: feature rows do not match node count");
  }
  if (h.cols() != params.self->value.rows()) {
    throw ArgumentError("rgcn_layer: feature width does not match layer input size");
  }
  ad::Var total;
  for (Relation r : kRelations) {
    if (!mask[r]) continue;
    ad::Var msg = ad::matmul(tape.constant(graph.norm(r)),
                             ad::matmul(h, tape.param(*params.relation[static_cast<size_t>(r)])));
    total = total.valid() ? ad::add(total, msg) : msg;
  }
  ad::Var self = ad::matmul(h, tape.param(*params.self));
  total = total.valid() ? ad::add(total, self) : self;
  return ad::relu(total);
}

ad::Var interaction_features(const SemanticGraph& graph, const GcnParameters& params,
                             const RelationMask& mask) {
  ad::Var h = graph.features;
  for (const auto& layer : params.layers) h = rgcn_layer(h, graph, layer, mask);
  return ad::slice_rows(h, 1, static_cast<Eigen::Index>(graph.num_answers));
}

std::string dump_adjacency(const Matrix& a) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out << ' ';
      out << (a(i, j) != 0.0 ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace muse::relgraph
