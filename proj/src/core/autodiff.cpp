#include "autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace muse::ad {

Parameter::Parameter(std::string n, Matrix v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      adam_m(Matrix::Zero(value.rows(), value.cols())),
      adam_v(Matrix::Zero(value.rows(), value.cols())) {}

Parameter& ParameterStore::add(const std::string& name, Matrix value) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto* p = find(name);
  if (!p) throw ArgumentError("unknown parameter: " + name);
  return *p;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
  return *params_[it->second];
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

double ParameterStore::squared_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p->value.squaredNorm();
  return s;
}

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.param ? n.param->value : n.owned;
}

Matrix& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id()];
  if (n.param) {
    Parameter& p = *n.param;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    return p.grad;
  }
  if (n.grad.size() == 0 && n.owned.size() != 0) {
    n.grad = Matrix::Zero(n.owned.rows(), n.owned.cols());
  }
  return n.grad;
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, std::function<void()> backward) {
  return push(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, std::function<void()> backward) {
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (nodes_[in.id()].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& out, double seed) {
  if (!record_) throw ArgumentError("backward on a non-recording tape");
  if (value(out).rows() != 1 || value(out).cols() != 1) {
    throw ArgumentError("backward requires a 1x1 output");
  }
  if (!nodes_[out.id()].needs_grad) return;
  grad(out)(0, 0) += seed;
  for (size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward();
  }
}

namespace {

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ArgumentError("variables belong to different tapes");
}

void check_shape(bool ok, const char* op) {
  if (!ok) throw ArgumentError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value() * b.value(), {a, b}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a).noalias() += g * b.value().transpose();
    if (t.needs_grad(b)) t.grad(b).noalias() += a.value().transpose() * g;
  });
}

Var transpose(const Var& a) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value().transpose(), {a}, [=, &t] {
    t.grad(a) += t.grad(out).transpose();
  });
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value() + b.value(), {a, b}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value() - b.value(), {a, b}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) -= g;
  });
}

Var add_row(const Var& a, const Var& row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return t.push(std::move(v), {a, row}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(row)) t.grad(row) += g.colwise().sum();
  });
}

Var add_scalar(const Var& a, const Var& s) {
  check_same_tape(a, s);
  check_shape(s.rows() == 1 && s.cols() == 1, "add_scalar");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = a.value().array() + s.scalar();
  return t.push(std::move(v), {a, s}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(s)) t.grad(s)(0, 0) += g.sum();
  });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value().cwiseProduct(b.value()), {a, b}, [=, &t] {
    const Matrix& g = t.grad(out);
    if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(b.value());
    if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(a.value());
  });
}

Var scale(const Var& a, double c) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value() * c, {a}, [=, &t] { t.grad(a) += t.grad(out) * c; });
}

Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = a.value().array().tanh();
  return t.push(std::move(v), {a}, [=, &t] {
    const Matrix& y = t.value(out);
    t.grad(a).array() += t.grad(out).array() * (1.0 - y.array().square());
  });
}

Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = (1.0 + (-a.value().array()).exp()).inverse();
  return t.push(std::move(v), {a}, [=, &t] {
    const Matrix& y = t.value(out);
    t.grad(a).array() += t.grad(out).array() * y.array() * (1.0 - y.array());
  });
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = a.value().cwiseMax(0.0);
  return t.push(std::move(v), {a}, [=, &t] {
    t.grad(a).array() += (a.value().array() > 0.0).select(t.grad(out).array(), 0.0);
  });
}

Var log(const Var& a, double floor) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v = a.value().cwiseMax(floor).array().log();
  return t.push(std::move(v), {a}, [=, &t] {
    const auto& x = a.value().array();
    t.grad(a).array() += (x > floor).select(t.grad(out).array() / x, 0.0);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check_same_tape(parts.front(), p);
    check_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  Var out(&t, t.size());
  return t.push(std::move(v), parts, [=, &t] {
    const Matrix& g = t.grad(out);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleCols(off, p.cols());
      off += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    check_same_tape(parts.front(), p);
    check_shape(p.cols() == cols, "concat_rows");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  Var out(&t, t.size());
  return t.push(std::move(v), parts, [=, &t] {
    const Matrix& g = t.grad(out);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      if (t.needs_grad(p)) t.grad(p) += g.middleRows(off, p.rows());
      off += p.rows();
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value().middleRows(start, count), {a}, [=, &t] {
    t.grad(a).middleRows(start, count) += t.grad(out);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(a.value().middleCols(start, count), {a}, [=, &t] {
    t.grad(a).middleCols(start, count) += t.grad(out);
  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  Var out(&t, t.size());
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return t.push(std::move(v), {a}, [=, &t] { t.grad(a).array() += t.grad(out)(0, 0); });
}

Var max_rows(const Var& a, Eigen::Index valid_rows) {
  check_shape(valid_rows >= 1 && valid_rows <= a.rows(), "max_rows");
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix v(1, x.cols());
  std::vector<Eigen::Index> arg(static_cast<size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < valid_rows; ++r)
      if (x(r, c) > x(best, c)) best = r;
    arg[static_cast<size_t>(c)] = best;
    v(0, c) = x(best, c);
  }
  Var out(&t, t.size());
  return t.push(std::move(v), {a}, [=, &t] {
    const Matrix& g = t.grad(out);
    Matrix& ga = t.grad(a);
    for (size_t c = 0; c < arg.size(); ++c) {
      ga(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    }
  });
}

Var softmax_rows(const Var& a, const std::vector<bool>& valid) {
  const Matrix& x = a.value();
  if (!valid.empty()) check_shape(static_cast<Eigen::Index>(valid.size()) == x.cols(), "softmax_rows");
  auto ok = [&](Eigen::Index c) { return valid.empty() || valid[static_cast<size_t>(c)]; };
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (ok(c)) mx = std::max(mx, x(r, c));
    if (!std::isfinite(mx)) throw NumericError("softmax_rows: no finite unmasked logits");
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!ok(c)) continue;
      y(r, c) = std::exp(x(r, c) - mx);
      z += y(r, c);
    }
    y.row(r) /= z;
  }
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(std::move(y), {a}, [=, &t] {
    const Matrix& p = t.value(out);
    const Matrix& g = t.grad(out);
    Matrix& ga = t.grad(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).dot(p.row(r));
      ga.row(r).array() += p.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var rescale(const Var& v) {
  const double s = v.value().cwiseAbs().sum();
  if (!(s > 0.0)) throw NumericError("rescale: zero or non-finite L1 norm");
  Tape& t = *v.tape();
  Var out(&t, t.size());
  return t.push(v.value() / s, {v}, [=, &t] {
    const Matrix& x = v.value();
    const Matrix& g = t.grad(out);
    const double gx = g.cwiseProduct(x).sum();
    Matrix sign = x.unaryExpr([](double e) { return static_cast<double>((e > 0.0) - (e < 0.0)); });
    t.grad(v) += g / s - sign * (gx / (s * s));
  });
}

Var normalize_lp(const Var& v, double p) {
  if (p < 1.0) throw ArgumentError("normalize_lp: p must be >= 1");
  const Matrix& x = v.value();
  if ((x.array() < 0.0).any()) throw ArgumentError("normalize_lp: input must be non-negative");
  const double norm = p == 1.0 ? x.sum() : std::pow(x.array().pow(p).sum(), 1.0 / p);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("normalize_lp: zero or non-finite norm");
  Tape& t = *v.tape();
  Var out(&t, t.size());
  return t.push(x / norm, {v}, [=, &t] {
    const Matrix& xv = v.value();
    const Matrix& g = t.grad(out);
    const double gx = g.cwiseProduct(xv).sum();
    // d(x_i / N)/dx_j = delta_ij / N - x_i x_j^(p-1) N^(-1-p)
    const Matrix powp = p == 1.0 ? Matrix::Ones(xv.rows(), xv.cols()) : Matrix(xv.array().pow(p - 1.0));
    t.grad(v) += g / norm - powp * (gx * std::pow(norm, -1.0 - p));
  });
}

Var pick(const Var& a, const std::vector<int>& cols) {
  check_shape(static_cast<Eigen::Index>(cols.size()) == a.rows(), "pick");
  Matrix v(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int c = cols[static_cast<size_t>(r)];
    check_shape(c >= 0 && c < a.cols(), "pick");
    v(r, 0) = a.value()(r, c);
  }
  Tape& t = *a.tape();
  Var out(&t, t.size());
  return t.push(std::move(v), {a}, [=, &t] {
    const Matrix& g = t.grad(out);
    Matrix& ga = t.grad(a);
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, cols[static_cast<size_t>(r)]) += g(r, 0);
  });
}

Var gather_rows(Tape& tape, Parameter& table, const std::vector<int>& ids) {
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) throw ArgumentError("gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  Var leaf = tape.param(table);
  Tape& t = tape;
  Var out(&t, t.size());
  return t.push(std::move(v), {leaf}, [=, &t] {
    const Matrix& g = t.grad(out);
    Matrix& gt = t.grad(leaf);
    for (size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var lstm(const Var& x, const Var& w_x, const Var& w_h, const Var& bias, bool reverse) {
  check_same_tape(x, w_x);
  check_same_tape(x, w_h);
  check_same_tape(x, bias);
  const Eigen::Index steps = x.rows();
  const Eigen::Index hidden = w_h.rows();
  check_shape(steps >= 1, "lstm");
  check_shape(w_x.rows() == x.cols() && w_x.cols() == 4 * hidden, "lstm");
  check_shape(w_h.cols() == 4 * hidden && bias.rows() == 1 && bias.cols() == 4 * hidden, "lstm");

  // Per-step caches, stored by position in the original sequence.
  auto gates = std::make_shared<Matrix>(steps, 4 * hidden);  // post-activation i f g o
  auto cells = std::make_shared<Matrix>(steps, hidden);
  auto cell_tanh = std::make_shared<Matrix>(steps, hidden);
  Matrix h_out(steps, hidden);

  Matrix pre = x.value() * w_x.value();
  pre.rowwise() += bias.value().row(0);
  const Matrix& wh = w_h.value();
  RowVector h_prev = RowVector::Zero(hidden);
  RowVector c_prev = RowVector::Zero(hidden);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index pos = reverse ? steps - 1 - s : s;
    RowVector z = pre.row(pos) + h_prev * wh;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (Eigen::Index j = 0; j < hidden; ++j) {
      (*gates)(pos, j) = sig(z(j));
      (*gates)(pos, hidden + j) = sig(z(hidden + j));
      (*gates)(pos, 2 * hidden + j) = std::tanh(z(2 * hidden + j));
      (*gates)(pos, 3 * hidden + j) = sig(z(3 * hidden + j));
    }
    auto i = gates->row(pos).segment(0, hidden).array();
    auto f = gates->row(pos).segment(hidden, hidden).array();
    auto g = gates->row(pos).segment(2 * hidden, hidden).array();
    auto o = gates->row(pos).segment(3 * hidden, hidden).array();
    RowVector c = (f * c_prev.array() + i * g).matrix();
    cells->row(pos) = c;
    cell_tanh->row(pos) = c.array().tanh().matrix();
    h_out.row(pos) = (o * cell_tanh->row(pos).array()).matrix();
    h_prev = h_out.row(pos);
    c_prev = c;
  }

  Tape& t = *x.tape();
  Var out(&t, t.size());
  return t.push(std::move(h_out), {x, w_x, w_h, bias}, [=, &t] {
    const Matrix& G = t.grad(out);
    const Matrix& H = t.value(out);
    const Matrix& whv = w_h.value();
    Matrix dz(steps, 4 * hidden);
    Matrix h_prev_rows = Matrix::Zero(steps, hidden);
    RowVector dh_next = RowVector::Zero(hidden);
    RowVector dc_next = RowVector::Zero(hidden);
    for (Eigen::Index s = steps; s-- > 0;) {
      const Eigen::Index pos = reverse ? steps - 1 - s : s;
      const bool first = s == 0;
      const Eigen::Index prev = reverse ? pos + 1 : pos - 1;
      auto i = gates->row(pos).segment(0, hidden).array();
      auto f = gates->row(pos).segment(hidden, hidden).array();
      auto g = gates->row(pos).segment(2 * hidden, hidden).array();
      auto o = gates->row(pos).segment(3 * hidden, hidden).array();
      auto tc = cell_tanh->row(pos).array();
      Eigen::Array<double, 1, Eigen::Dynamic> c_prev_a = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(hidden);
      if (!first) c_prev_a = cells->row(prev).array();

      Eigen::Array<double, 1, Eigen::Dynamic> dh = G.row(pos).array() + dh_next.array();
      Eigen::Array<double, 1, Eigen::Dynamic> dc = dc_next.array() + dh * o * (1.0 - tc.square());
      dz.row(pos).segment(0, hidden) = (dc * g * i * (1.0 - i)).matrix();
      dz.row(pos).segment(hidden, hidden) = (dc * c_prev_a * f * (1.0 - f)).matrix();
      dz.row(pos).segment(2 * hidden, hidden) = (dc * i * (1.0 - g.square())).matrix();
      dz.row(pos).segment(3 * hidden, hidden) = (dh * tc * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();
      dh_next = dz.row(pos) * whv.transpose();
      if (!first) h_prev_rows.row(pos) = H.row(prev);
    }
    if (t.needs_grad(x)) t.grad(x).noalias() += dz * w_x.value().transpose();
    if (t.needs_grad(w_x)) t.grad(w_x).noalias() += x.value().transpose() * dz;
    if (t.needs_grad(w_h)) t.grad(w_h).noalias() += h_prev_rows.transpose() * dz;
    if (t.needs_grad(bias)) t.grad(bias) += dz.colwise().sum();
  });
}

}  // namespace muse::ad
