#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to its variables. Calling
// Tape::backward() on a 1x1 result walks the record in reverse and
// accumulates gradients; gradients of Parameter leaves land directly in
// Parameter::grad. One tape is used per forward pass and then discarded.

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace muse::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Parameter(std::string n, Matrix v);
  void zero_grad() { grad.setZero(); }
};

/// Owns parameters in registration order; names are unique.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad();
  /// Sum of squared entries over every parameter.
  double squared_norm() const;
  size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> index_;
};

class Tape;

/// Handle to a value on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  size_t id_ = 0;
};

class Tape {
 public:
  /// With record == false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same leaf.
  Var param(Parameter& p);

  const Matrix& value(const Var& v) const;
  /// Gradient buffer for v, allocated zeroed on first use.
  Matrix& grad(const Var& v);
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  bool recording() const { return record_; }

  /// Runs reverse accumulation from a 1x1 output, seeding d(out) = seed.
  void backward(const Var& out, double seed = 1.0);

  /// Appends a computed node. `backward` is dropped when not recording or
  /// when none of the inputs need gradients.
  Var push(Matrix value, std::initializer_list<Var> inputs, std::function<void()> backward);
  Var push(Matrix value, const std::vector<Var>& inputs, std::function<void()> backward);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    Parameter* param = nullptr;
    Matrix grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };
  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, size_t> param_nodes_;
};

// Elementwise and linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (n x c) plus a 1 x c row broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a plus a 1x1 scalar broadcast over all entries.
Var add_scalar(const Var& a, const Var& s);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
/// log(max(a, floor)); entries below the floor get zero gradient.
Var log(const Var& a, double floor = 1e-12);

// Shape manipulation.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);

// Reductions.
Var sum(const Var& a);
/// Column-wise maximum over the first `valid_rows` rows (1 x cols). Ties go to
/// the lowest row.
Var max_rows(const Var& a, Eigen::Index valid_rows);
/// Row-wise softmax. Columns with valid[c] == false get probability exactly 0.
Var softmax_rows(const Var& a, const std::vector<bool>& valid = {});
/// v / sum(|v|) over all entries.
Var rescale(const Var& v);
/// v / ||v||_p for a non-negative v; p = 1 is plain L1 rescaling.
Var normalize_lp(const Var& v, double p);
/// Gathers a[r, cols[r]] into an n x 1 column.
Var pick(const Var& a, const std::vector<int>& cols);

/// Rows of an embedding table; gradients scatter back into the parameter.
Var gather_rows(Tape& tape, Parameter& table, const std::vector<int>& ids);

/// Single-direction LSTM over the rows of x (T x d). Gate layout in the
/// 4H-wide weights is [input, forget, cell, output]; initial state is zero.
/// With reverse == true the sequence is read from the last row to the first
/// and outputs are written back at their original positions.
Var lstm(const Var& x, const Var& w_x, const Var& w_h, const Var& bias, bool reverse);

}  // namespace muse::ad
