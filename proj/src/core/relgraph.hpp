#pragma once

#include <array>
#include <string>
#include <vector>

#include "autodiff.hpp"

namespace muse::relgraph {

enum class Relation : int { kRelevance = 0, kSimilarity = 1, kEntailment = 2 };
inline constexpr std::array<Relation, 3> kRelations = {Relation::kRelevance, Relation::kSimilarity,
                                                      Relation::kEntailment};
const char* relation_name(Relation r);

/// Which relation terms take part in propagation.
struct RelationMask {
  std::array<bool, 3> enabled{true, true, true};
  bool operator[](Relation r) const { return enabled[static_cast<size_t>(r)]; }
  bool& operator[](Relation r) { return enabled[static_cast<size_t>(r)]; }
};

/// Nodes are ordered [question, answers..., snippets...].
struct SemanticGraph {
  size_t num_answers = 0;
  size_t num_snippets = 0;
  ad::Var features;                 // H^(0), node_count x d
  std::array<Matrix, 3> adjacency;  // binary, symmetric, zero diagonal
  std::array<Matrix, 3> normalized;

  size_t node_count() const { return 1 + num_answers + num_snippets; }
  const Matrix& adj(Relation r) const { return adjacency[static_cast<size_t>(r)]; }
  const Matrix& norm(Relation r) const { return normalized[static_cast<size_t>(r)]; }
  /// Zeroes one relation's adjacency and its normalized form.
  void clear_relation(Relation r);
};

/// The three binary adjacency matrices for a graph of the given size.
std::array<Matrix, 3> build_adjacency(size_t num_answers, size_t num_snippets);

/// D^{-1/2} A D^{-1/2}; zero-degree nodes get all-zero rows and columns.
Matrix normalize_adjacency(const Matrix& a);

/// Stacks the node features (each 1 x d) and builds every adjacency.
SemanticGraph build_graph(const ad::Var& x_q, const std::vector<ad::Var>& answers,
                          const std::vector<ad::Var>& snippets);

struct LayerParameters {
  std::array<ad::Parameter*, 3> relation{};  // in x out, indexed by Relation
  ad::Parameter* self = nullptr;             // in x out
};

struct GcnParameters {
  std::vector<LayerParameters> layers;
};

/// H' = ReLU(sum_r Lambda^r H W_r + H W_s). Disabled relations are skipped.
ad::Var rgcn_layer(const ad::Var& h, const SemanticGraph& graph, const LayerParameters& params,
                   const RelationMask& mask = {});

/// Runs every layer and returns the answer-node rows of the last one.
ad::Var interaction_features(const SemanticGraph& graph, const GcnParameters& params,
                             const RelationMask& mask = {});

/// Dense 0/1 text grid of one adjacency (rows separated by newlines).
std::string dump_adjacency(const Matrix& a);

}  // namespace muse::relgraph
