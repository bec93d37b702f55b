#include "padt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "padt/errors.hpp"

namespace padt::ag {

int ParamStore::add(const std::string& name, Mat init) {
  if (by_name_.count(name))
    throw ConfigError("ParamStore: duplicate parameter " + name);
  const int idx = static_cast<int>(entries_.size());
  Mat grad = Mat::Zero(init.rows(), init.cols());
  entries_.push_back({name, std::move(init), std::move(grad)});
  by_name_[name] = idx;
  return idx;
}

bool ParamStore::has(const std::string& name) const {
  return by_name_.count(name) != 0;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    throw ConfigError("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

long long ParamStore::num_scalars() const {
  long long n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Value Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size() - 1)};
}

Tape::Node& Tape::at(Value v) {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw IndexError("Tape: value does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::at(Value v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw IndexError("Tape: value does not belong to this tape");
  return nodes_[v.id];
}

void Tape::check_same_shape(const Value& a, const Value& b,
                            const char* where) const {
  const Mat& ma = at(a).val;
  const Mat& mb = at(b).val;
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    throw ShapeError(std::string(where) + ": shape mismatch " +
                     std::to_string(ma.rows()) + "x" +
                     std::to_string(ma.cols()) + " vs " +
                     std::to_string(mb.rows()) + "x" +
                     std::to_string(mb.cols()));
}

const Mat& Tape::val(Value v) const { return at(v).val; }

const Mat& Tape::grad(Value v) const {
  const Node& n = at(v);
  if (n.grad.size() == 0) {
    static const Mat kEmpty;
    if (n.val.size() == 0) return kEmpty;
    const_cast<Node&>(n).grad = Mat::Zero(n.val.rows(), n.val.cols());
  }
  return n.grad;
}

double Tape::scalar(Value v) const {
  const Mat& m = at(v).val;
  if (m.rows() != 1 || m.cols() != 1)
    throw ShapeError("Tape::scalar: value is " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected 1x1");
  return m(0, 0);
}

Value Tape::input(Mat m) {
  Node n;
  n.op = Op::kInput;
  n.val = std::move(m);
  return push(std::move(n));
}

Value Tape::param(ParamStore& ps, const std::string& name) {
  return param(ps, ps.index_of(name));
}

Value Tape::param(ParamStore& ps, int idx) {
  Node n;
  n.op = Op::kParam;
  n.val = ps.value(idx);
  n.store = &ps;
  n.store_idx = idx;
  return push(std::move(n));
}

Value Tape::add(Value a, Value b) {
  check_same_shape(a, b, "add");
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id};
  n.val = at(a).val + at(b).val;
  return push(std::move(n));
}

Value Tape::sub(Value a, Value b) {
  check_same_shape(a, b, "sub");
  Node n;
  n.op = Op::kSub;
  n.in = {a.id, b.id};
  n.val = at(a).val - at(b).val;
  return push(std::move(n));
}

Value Tape::mul(Value a, Value b) {
  check_same_shape(a, b, "mul");
  Node n;
  n.op = Op::kMul;
  n.in = {a.id, b.id};
  n.val = at(a).val.cwiseProduct(at(b).val);
  return push(std::move(n));
}

Value Tape::scale(Value a, double s) {
  Node n;
  n.op = Op::kScale;
  n.in = {a.id};
  n.dargs = {s};
  n.val = at(a).val * s;
  return push(std::move(n));
}

Value Tape::add_scalar(Value a, double s) {
  Node n;
  n.op = Op::kAddScalar;
  n.in = {a.id};
  n.dargs = {s};
  n.val = at(a).val.array() + s;
  return push(std::move(n));
}

Value Tape::add_rowvec(Value x, Value v) {
  const Mat& mx = at(x).val;
  const Mat& mv = at(v).val;
  if (mv.rows() != 1 || mv.cols() != mx.cols())
    throw ShapeError("add_rowvec: vector is " + std::to_string(mv.rows()) +
                     "x" + std::to_string(mv.cols()) + ", need 1x" +
                     std::to_string(mx.cols()));
  Node n;
  n.op = Op::kAddRowvec;
  n.in = {x.id, v.id};
  n.val = mx.rowwise() + mv.row(0);
  return push(std::move(n));
}

Value Tape::matmul(Value a, Value b) {
  const Mat& ma = at(a).val;
  const Mat& mb = at(b).val;
  if (ma.cols() != mb.rows())
    throw ShapeError("matmul: inner dims " + std::to_string(ma.cols()) +
                     " vs " + std::to_string(mb.rows()));
  Node n;
  n.op = Op::kMatmul;
  n.in = {a.id, b.id};
  n.val = ma * mb;
  return push(std::move(n));
}

Value Tape::matmul_nt(Value a, Value b) {
  const Mat& ma = at(a).val;
  const Mat& mb = at(b).val;
  if (ma.cols() != mb.cols())
    throw ShapeError("matmul_nt: inner dims " + std::to_string(ma.cols()) +
                     " vs " + std::to_string(mb.cols()));
  Node n;
  n.op = Op::kMatmulNT;
  n.in = {a.id, b.id};
  n.val = ma * mb.transpose();
  return push(std::move(n));
}

Value Tape::gather_rows(Value x, std::vector<int> idx) {
  const Mat& mx = at(x).val;
  Node n;
  n.op = Op::kGatherRows;
  n.in = {x.id};
  n.val.resize(static_cast<int>(idx.size()), mx.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= mx.rows())
      throw IndexError("gather_rows: row " + std::to_string(idx[i]) +
                       " out of range [0, " + std::to_string(mx.rows()) + ")");
    n.val.row(static_cast<int>(i)) = mx.row(idx[i]);
  }
  n.iargs = std::move(idx);
  return push(std::move(n));
}

Value Tape::slice_rows(Value x, int r0, int nr) {
  const Mat& mx = at(x).val;
  if (r0 < 0 || nr < 0 || r0 + nr > mx.rows())
    throw IndexError("slice_rows: [" + std::to_string(r0) + ", " +
                     std::to_string(r0 + nr) + ") out of " +
                     std::to_string(mx.rows()) + " rows");
  Node n;
  n.op = Op::kSliceRows;
  n.in = {x.id};
  n.iargs = {r0, nr};
  n.val = mx.middleRows(r0, nr);
  return push(std::move(n));
}

Value Tape::slice_cols(Value x, int c0, int nc) {
  const Mat& mx = at(x).val;
  if (c0 < 0 || nc < 0 || c0 + nc > mx.cols())
    throw IndexError("slice_cols: [" + std::to_string(c0) + ", " +
                     std::to_string(c0 + nc) + ") out of " +
                     std::to_string(mx.cols()) + " cols");
  Node n;
  n.op = Op::kSliceCols;
  n.in = {x.id};
  n.iargs = {c0, nc};
  n.val = mx.middleCols(c0, nc);
  return push(std::move(n));
}

Value Tape::concat_rows(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: empty list");
  int rows = 0;
  const int cols = static_cast<int>(at(xs[0]).val.cols());
  for (const auto& v : xs) {
    if (at(v).val.cols() != cols)
      throw ShapeError("concat_rows: column count mismatch");
    rows += static_cast<int>(at(v).val.rows());
  }
  Node n;
  n.op = Op::kConcatRows;
  n.val.resize(rows, cols);
  int r = 0;
  for (const auto& v : xs) {
    const Mat& m = at(v).val;
    n.val.middleRows(r, m.rows()) = m;
    r += static_cast<int>(m.rows());
    n.in.push_back(v.id);
  }
  return push(std::move(n));
}

Value Tape::concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: empty list");
  int cols = 0;
  const int rows = static_cast<int>(at(xs[0]).val.rows());
  for (const auto& v : xs) {
    if (at(v).val.rows() != rows)
      throw ShapeError("concat_cols: row count mismatch");
    cols += static_cast<int>(at(v).val.cols());
  }
  Node n;
  n.op = Op::kConcatCols;
  n.val.resize(rows, cols);
  int c = 0;
  for (const auto& v : xs) {
    const Mat& m = at(v).val;
    n.val.middleCols(c, m.cols()) = m;
    c += static_cast<int>(m.cols());
    n.in.push_back(v.id);
  }
  return push(std::move(n));
}

Value Tape::reshape_rowmajor(Value x, int r, int c) {
  const Mat& mx = at(x).val;
  if (static_cast<long long>(r) * c != mx.size())
    throw ShapeError("reshape_rowmajor: cannot view " +
                     std::to_string(mx.rows()) + "x" +
                     std::to_string(mx.cols()) + " as " + std::to_string(r) +
                     "x" + std::to_string(c));
  Node n;
  n.op = Op::kReshapeRowMajor;
  n.in = {x.id};
  n.iargs = {static_cast<int>(mx.rows()), static_cast<int>(mx.cols())};
  n.val.resize(r, c);
  const int c_in = static_cast<int>(mx.cols());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      const long long k = static_cast<long long>(i) * c + j;
      n.val(i, j) = mx(static_cast<int>(k / c_in), static_cast<int>(k % c_in));
    }
  return push(std::move(n));
}

Value Tape::relu(Value x) {
  Node n;
  n.op = Op::kRelu;
  n.in = {x.id};
  n.val = at(x).val.cwiseMax(0.0);
  return push(std::move(n));
}

Value Tape::gelu(Value x) {
  Node n;
  n.op = Op::kGelu;
  n.in = {x.id};
  n.val = at(x).val.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  });
  return push(std::move(n));
}

Value Tape::sigmoid(Value x) {
  Node n;
  n.op = Op::kSigmoid;
  n.in = {x.id};
  n.val = at(x).val.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  });
  return push(std::move(n));
}

Value Tape::cmin(Value a, Value b) {
  check_same_shape(a, b, "cmin");
  Node n;
  n.op = Op::kCMin;
  n.in = {a.id, b.id};
  n.val = at(a).val.cwiseMin(at(b).val);
  return push(std::move(n));
}

Value Tape::cmax(Value a, Value b) {
  check_same_shape(a, b, "cmax");
  Node n;
  n.op = Op::kCMax;
  n.in = {a.id, b.id};
  n.val = at(a).val.cwiseMax(at(b).val);
  return push(std::move(n));
}

Value Tape::softmax_rows(Value x) {
  const Mat& mx = at(x).val;
  Node n;
  n.op = Op::kSoftmaxRows;
  n.in = {x.id};
  n.val.resize(mx.rows(), mx.cols());
  for (int r = 0; r < mx.rows(); ++r) {
    const double m = mx.row(r).maxCoeff();
    Eigen::RowVectorXd e = (mx.row(r).array() - m).exp().matrix();
    n.val.row(r) = e / e.sum();
  }
  return push(std::move(n));
}

Value Tape::layer_norm(Value x, Value gamma, Value beta, double eps) {
  const Mat& mx = at(x).val;
  const Mat& mg = at(gamma).val;
  const Mat& mb = at(beta).val;
  if (mg.rows() != 1 || mg.cols() != mx.cols() || mb.rows() != 1 ||
      mb.cols() != mx.cols())
    throw ShapeError("layer_norm: gamma/beta must be 1x" +
                     std::to_string(mx.cols()));
  Node n;
  n.op = Op::kLayerNorm;
  n.in = {x.id, gamma.id, beta.id};
  n.dargs = {eps};
  const int d = static_cast<int>(mx.cols());
  Mat xhat(mx.rows(), d);
  Mat inv(mx.rows(), 1);
  for (int r = 0; r < mx.rows(); ++r) {
    const double mu = mx.row(r).mean();
    const double var = (mx.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv(r, 0) = is;
    xhat.row(r) = (mx.row(r).array() - mu) * is;
  }
  n.val = ((xhat.array().rowwise() * mg.row(0).array()).rowwise() +
           mb.row(0).array())
              .matrix();
  n.aux = {std::move(xhat), std::move(inv)};
  return push(std::move(n));
}

Value Tape::sum(Value x) {
  Node n;
  n.op = Op::kSum;
  n.in = {x.id};
  n.val = Mat::Constant(1, 1, at(x).val.sum());
  return push(std::move(n));
}

Value Tape::mean(Value x) {
  Node n;
  n.op = Op::kMean;
  n.in = {x.id};
  n.val = Mat::Constant(1, 1, at(x).val.mean());
  return push(std::move(n));
}

Value Tape::mse(Value pred, Value target) {
  check_same_shape(pred, target, "mse");
  Node n;
  n.op = Op::kMse;
  n.in = {pred.id, target.id};
  const Mat diff = at(pred).val - at(target).val;
  n.val = Mat::Constant(1, 1, diff.array().square().mean());
  return push(std::move(n));
}

Value Tape::ce_robust(Value logits, const std::vector<int>& targets,
                      const Mat& blocked) {
  const Mat& z = at(logits).val;
  const int T = static_cast<int>(z.rows());
  const int V = static_cast<int>(z.cols());
  if (static_cast<int>(targets.size()) != T)
    throw ShapeError("ce_robust: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(T) + " logit rows");
  if (blocked.rows() != T || blocked.cols() != V)
    throw ShapeError("ce_robust: blocked mask shape mismatch");

  Mat probs = Mat::Zero(T, V);
  double total = 0.0;
  int count = 0;
  for (int t = 0; t < T; ++t) {
    const int y = targets[t];
    if (y < 0) continue;
    if (y >= V)
      throw IndexError("ce_robust: target " + std::to_string(y) +
                       " out of vocabulary of " + std::to_string(V));
    if (blocked(t, y) != 0.0)
      throw MaskConsistencyError("ce_robust: target token " +
                                 std::to_string(y) + " is blocked at step " +
                                 std::to_string(t));
    double m = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < V; ++v)
      if (blocked(t, v) == 0.0) m = std::max(m, z(t, v));
    if (!std::isfinite(m))
      throw MaskConsistencyError("ce_robust: every entry blocked at step " +
                                 std::to_string(t));
    double denom = 0.0;
    for (int v = 0; v < V; ++v)
      if (blocked(t, v) == 0.0) denom += std::exp(z(t, v) - m);
    for (int v = 0; v < V; ++v)
      if (blocked(t, v) == 0.0) probs(t, v) = std::exp(z(t, v) - m) / denom;
    total += m + std::log(denom) - z(t, y);
    ++count;
  }
  Node n;
  n.op = Op::kCeRobust;
  n.in = {logits.id};
  n.iargs = targets;
  n.dargs = {static_cast<double>(count)};
  n.aux = {std::move(probs)};
  n.val = Mat::Constant(1, 1, count > 0 ? total / count : 0.0);
  return push(std::move(n));
}

Value Tape::bbox_giou_l1(Value pred, const Mat& gt, double w_giou,
                         double w_l1) {
  const Mat& p = at(pred).val;
  if (p.cols() != 4 || gt.cols() != 4 || p.rows() != gt.rows())
    throw ShapeError("bbox_giou_l1: expected matching n x 4 boxes");
  const int n_boxes = static_cast<int>(p.rows());
  if (n_boxes == 0) {
    Node n;
    n.op = Op::kBboxGiouL1;
    n.in = {pred.id};
    n.dargs = {w_giou, w_l1};
    n.aux = {gt};
    n.val = Mat::Zero(1, 1);
    return push(std::move(n));
  }
  double total = 0.0;
  for (int i = 0; i < n_boxes; ++i) {
    const double px0 = p(i, 0), py0 = p(i, 1), px1 = p(i, 2), py1 = p(i, 3);
    const double gx0 = gt(i, 0), gy0 = gt(i, 1), gx1 = gt(i, 2),
                 gy1 = gt(i, 3);
    const double iw = std::min(px1, gx1) - std::max(px0, gx0);
    const double ih = std::min(py1, gy1) - std::max(py0, gy0);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double ap = std::max(0.0, px1 - px0) * std::max(0.0, py1 - py0);
    const double agt = std::max(0.0, gx1 - gx0) * std::max(0.0, gy1 - gy0);
    const double uni = ap + agt - inter;
    const double cw = std::max(px1, gx1) - std::min(px0, gx0);
    const double ch = std::max(py1, gy1) - std::min(py0, gy0);
    const double hull = std::max(0.0, cw) * std::max(0.0, ch);
    double giou = 0.0;
    if (uni > 1e-12 && hull > 1e-12) giou = inter / uni - (hull - uni) / hull;
    const double l1 = std::abs(px0 - gx0) + std::abs(py0 - gy0) +
                      std::abs(px1 - gx1) + std::abs(py1 - gy1);
    total += w_giou * (1.0 - giou) + w_l1 * l1;
  }
  Node n;
  n.op = Op::kBboxGiouL1;
  n.in = {pred.id};
  n.dargs = {w_giou, w_l1};
  n.aux = {gt};
  n.val = Mat::Constant(1, 1, total / n_boxes);
  return push(std::move(n));
}

Value Tape::dice(Value probs, const Mat& gt, double eps) {
  const Mat& p = at(probs).val;
  if (p.rows() != gt.rows() || p.cols() != gt.cols())
    throw ShapeError("dice: prediction and target shape mismatch");
  const double s_pg = p.cwiseProduct(gt).sum();
  const double s_p = p.sum();
  const double s_g = gt.sum();
  const double coef = (2.0 * s_pg + eps) / (s_p + s_g + eps);
  Node n;
  n.op = Op::kDice;
  n.in = {probs.id};
  n.dargs = {eps, s_pg, s_p, s_g};
  n.aux = {gt};
  n.val = Mat::Constant(1, 1, 1.0 - coef);
  return push(std::move(n));
}

Value Tape::focal(Value probs, const Mat& gt, double gamma, double alpha) {
  const Mat& p = at(probs).val;
  if (p.rows() != gt.rows() || p.cols() != gt.cols())
    throw ShapeError("focal: prediction and target shape mismatch");
  double total = 0.0;
  for (int r = 0; r < p.rows(); ++r)
    for (int c = 0; c < p.cols(); ++c) {
      const bool pos = gt(r, c) != 0.0;
      const double pt =
          std::clamp(pos ? p(r, c) : 1.0 - p(r, c), 1e-12, 1.0 - 1e-12);
      const double at_ = pos ? alpha : 1.0 - alpha;
      total += -at_ * std::pow(1.0 - pt, gamma) * std::log(pt);
    }
  Node n;
  n.op = Op::kFocal;
  n.in = {probs.id};
  n.dargs = {gamma, alpha};
  n.aux = {gt};
  n.val = Mat::Constant(1, 1, total / p.size());
  return push(std::move(n));
}

Value Tape::bilinear_upsample(Value grid, int factor) {
  const Mat& g = at(grid).val;
  if (factor < 1) throw ShapeError("bilinear_upsample: factor must be >= 1");
  const int R = static_cast<int>(g.rows()) * factor;
  const int C = static_cast<int>(g.cols()) * factor;
  Node n;
  n.op = Op::kBilinearUpsample;
  n.in = {grid.id};
  n.iargs = {factor};
  n.val.resize(R, C);
  for (int y = 0; y < R; ++y) {
    double sy = (y + 0.5) / factor - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(g.rows() - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min<int>(y0 + 1, static_cast<int>(g.rows()) - 1);
    const double wy = sy - y0;
    for (int x = 0; x < C; ++x) {
      double sx = (x + 0.5) / factor - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(g.cols() - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min<int>(x0 + 1, static_cast<int>(g.cols()) - 1);
      const double wx = sx - x0;
      n.val(y, x) = (1 - wy) * ((1 - wx) * g(y0, x0) + wx * g(y0, x1)) +
                    wy * ((1 - wx) * g(y1, x0) + wx * g(y1, x1));
    }
  }
  return push(std::move(n));
}

void Tape::backward(Value loss) {
  Node& ln = at(loss);
  if (ln.val.rows() != 1 || ln.val.cols() != 1)
    throw ShapeError("backward: loss must be 1x1");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  ln.grad(0, 0) = 1.0;
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id)
    backward_node(id);
  for (auto& n : nodes_)
    if (n.op == Op::kParam) n.store->grad(n.store_idx) += n.grad;
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 || n.grad.isZero(0.0)) return;
  const Mat& g = n.grad;
  auto gin = [&](int k) -> Mat& { return nodes_[n.in[k]].grad; };
  auto vin = [&](int k) -> const Mat& { return nodes_[n.in[k]].val; };

  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
      break;
    case Op::kAdd:
      gin(0) += g;
      gin(1) += g;
      break;
    case Op::kSub:
      gin(0) += g;
      gin(1) -= g;
      break;
    case Op::kMul:
      gin(0) += g.cwiseProduct(vin(1));
      gin(1) += g.cwiseProduct(vin(0));
      break;
    case Op::kScale:
      gin(0) += g * n.dargs[0];
      break;
    case Op::kAddScalar:
      gin(0) += g;
      break;
    case Op::kAddRowvec:
      gin(0) += g;
      gin(1).row(0) += g.colwise().sum();
      break;
    case Op::kMatmul:
      gin(0).noalias() += g * vin(1).transpose();
      gin(1).noalias() += vin(0).transpose() * g;
      break;
    case Op::kMatmulNT:
      gin(0).noalias() += g * vin(1);
      gin(1).noalias() += g.transpose() * vin(0);
      break;
    case Op::kGatherRows:
      for (size_t i = 0; i < n.iargs.size(); ++i)
        gin(0).row(n.iargs[i]) += g.row(static_cast<int>(i));
      break;
    case Op::kSliceRows:
      gin(0).middleRows(n.iargs[0], n.iargs[1]) += g;
      break;
    case Op::kSliceCols:
      gin(0).middleCols(n.iargs[0], n.iargs[1]) += g;
      break;
    case Op::kConcatRows: {
      int r = 0;
      for (size_t k = 0; k < n.in.size(); ++k) {
        const int nr = static_cast<int>(vin(k).rows());
        gin(k) += g.middleRows(r, nr);
        r += nr;
      }
      break;
    }
    case Op::kConcatCols: {
      int c = 0;
      for (size_t k = 0; k < n.in.size(); ++k) {
        const int nc = static_cast<int>(vin(k).cols());
        gin(k) += g.middleCols(c, nc);
        c += nc;
      }
      break;
    }
    case Op::kReshapeRowMajor: {
      const int c_in = n.iargs[1];
      const int c_out = static_cast<int>(n.val.cols());
      for (int i = 0; i < n.val.rows(); ++i)
        for (int j = 0; j < c_out; ++j) {
          const long long k = static_cast<long long>(i) * c_out + j;
          gin(0)(static_cast<int>(k / c_in), static_cast<int>(k % c_in)) +=
              g(i, j);
        }
      break;
    }
    case Op::kRelu:
      gin(0) += g.cwiseProduct(
          vin(0).unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      break;
    case Op::kGelu:
      gin(0) += g.cwiseProduct(vin(0).unaryExpr([](double v) {
        const double phi = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf =
            std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return phi + v * pdf;
      }));
      break;
    case Op::kSigmoid:
      gin(0) += g.cwiseProduct(
          n.val.unaryExpr([](double s) { return s * (1.0 - s); }));
      break;
    case Op::kCMin:
      gin(0) += g.cwiseProduct((vin(0).array() <= vin(1).array())
                                   .cast<double>()
                                   .matrix());
      gin(1) += g.cwiseProduct(
          (vin(0).array() > vin(1).array()).cast<double>().matrix());
      break;
    case Op::kCMax:
      gin(0) += g.cwiseProduct((vin(0).array() >= vin(1).array())
                                   .cast<double>()
                                   .matrix());
      gin(1) += g.cwiseProduct(
          (vin(0).array() < vin(1).array()).cast<double>().matrix());
      break;
    case Op::kSoftmaxRows:
      for (int r = 0; r < n.val.rows(); ++r) {
        const double dot = g.row(r).dot(n.val.row(r));
        gin(0).row(r) +=
            n.val.row(r).cwiseProduct(g.row(r).array().matrix() -
                                      Eigen::RowVectorXd::Constant(
                                          n.val.cols(), dot));
      }
      break;
    case Op::kLayerNorm: {
      const Mat& xhat = n.aux[0];
      const Mat& inv = n.aux[1];
      const Mat& gamma = vin(1);
      for (int r = 0; r < n.val.rows(); ++r) {
        Eigen::RowVectorXd dyh = g.row(r).cwiseProduct(gamma.row(0));
        const double m1 = dyh.mean();
        const double m2 = dyh.cwiseProduct(xhat.row(r)).mean();
        gin(0).row(r) +=
            inv(r, 0) *
            (dyh.array() - m1 - xhat.row(r).array() * m2).matrix();
      }
      gin(1).row(0) += g.cwiseProduct(xhat).colwise().sum();
      gin(2).row(0) += g.colwise().sum();
      break;
    }
    case Op::kSum:
      gin(0).array() += g(0, 0);
      break;
    case Op::kMean:
      gin(0).array() += g(0, 0) / vin(0).size();
      break;
    case Op::kMse: {
      const Mat diff = vin(0) - vin(1);
      const double s = 2.0 * g(0, 0) / diff.size();
      gin(0) += s * diff;
      gin(1) -= s * diff;
      break;
    }
    case Op::kCeRobust: {
      const Mat& probs = n.aux[0];
      const double count = n.dargs[0];
      if (count == 0.0) break;
      const double s = g(0, 0) / count;
      gin(0) += s * probs;
      for (size_t t = 0; t < n.iargs.size(); ++t)
        if (n.iargs[t] >= 0) gin(0)(static_cast<int>(t), n.iargs[t]) -= s;
      break;
    }
    case Op::kBboxGiouL1: {
      const Mat& p = vin(0);
      const Mat& gt = n.aux[0];
      const int n_boxes = static_cast<int>(p.rows());
      if (n_boxes == 0) break;
      const double w_giou = n.dargs[0], w_l1 = n.dargs[1];
      const double s = g(0, 0) / n_boxes;
      for (int i = 0; i < n_boxes; ++i) {
        const double px0 = p(i, 0), py0 = p(i, 1), px1 = p(i, 2),
                     py1 = p(i, 3);
        const double gx0 = gt(i, 0), gy0 = gt(i, 1), gx1 = gt(i, 2),
                     gy1 = gt(i, 3);
        const double iw = std::min(px1, gx1) - std::max(px0, gx0);
        const double ih = std::min(py1, gy1) - std::max(py0, gy0);
        const bool overlap = iw > 0.0 && ih > 0.0;
        const double inter = overlap ? iw * ih : 0.0;
        const double pw = std::max(0.0, px1 - px0);
        const double ph = std::max(0.0, py1 - py0);
        const double ap = pw * ph;
        const double agt = std::max(0.0, gx1 - gx0) * std::max(0.0, gy1 - gy0);
        const double uni = ap + agt - inter;
        const double cw = std::max(px1, gx1) - std::min(px0, gx0);
        const double ch = std::max(py1, gy1) - std::min(py0, gy0);
        const double hull = std::max(0.0, cw) * std::max(0.0, ch);
        double dx[4] = {0, 0, 0, 0};
        if (uni > 1e-12 && hull > 1e-12) {
          // GIoU = I/U - (C - U)/C with U = Ap + Agt - I; collect partials
          // with respect to I, Ap and C, then chain into the coordinates.
          const double dI = 1.0 / uni + inter / (uni * uni) - 1.0 / hull;
          const double dAp = -inter / (uni * uni) + 1.0 / hull;
          const double dC = -uni / (hull * hull);
          double dI_dx[4] = {0, 0, 0, 0};
          if (overlap) {
            if (px0 >= gx0) dI_dx[0] = -ih;
            if (py0 >= gy0) dI_dx[1] = -iw;
            if (px1 <= gx1) dI_dx[2] = ih;
            if (py1 <= gy1) dI_dx[3] = iw;
          }
          double dAp_dx[4] = {0, 0, 0, 0};
          if (px1 > px0 && py1 > py0) {
            dAp_dx[0] = -ph;
            dAp_dx[1] = -pw;
            dAp_dx[2] = ph;
            dAp_dx[3] = pw;
          }
          double dC_dx[4] = {0, 0, 0, 0};
          if (px0 < gx0) dC_dx[0] = -ch;
          if (py0 < gy0) dC_dx[1] = -cw;
          if (px1 > gx1) dC_dx[2] = ch;
          if (py1 > gy1) dC_dx[3] = cw;
          for (int k = 0; k < 4; ++k) {
            const double dgiou =
                dI * dI_dx[k] + dAp * dAp_dx[k] + dC * dC_dx[k];
            dx[k] += -w_giou * dgiou;
          }
        }
        const double pc[4] = {px0, py0, px1, py1};
        const double gc[4] = {gx0, gy0, gx1, gy1};
        for (int k = 0; k < 4; ++k) {
          const double d = pc[k] - gc[k];
          dx[k] += w_l1 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
        }
        for (int k = 0; k < 4; ++k) gin(0)(i, k) += s * dx[k];
      }
      break;
    }
    case Op::kDice: {
      const Mat& gt = n.aux[0];
      const double eps = n.dargs[0], s_pg = n.dargs[1], s_p = n.dargs[2],
                   s_g = n.dargs[3];
      const double denom = s_p + s_g + eps;
      const double s = g(0, 0);
      // loss = 1 - (2*s_pg + eps)/denom with denom = s_p + s_g + eps;
      // d(loss)/dp_i = -(2*g_i*denom - (2*s_pg+eps)) / denom^2.
      for (int r = 0; r < gt.rows(); ++r)
        for (int c = 0; c < gt.cols(); ++c) {
          const double dcoef =
              (2.0 * gt(r, c) * denom - (2.0 * s_pg + eps)) / (denom * denom);
          gin(0)(r, c) += s * (-dcoef);
        }
      break;
    }
    case Op::kFocal: {
      const Mat& p = vin(0);
      const Mat& gt = n.aux[0];
      const double gamma = n.dargs[0], alpha = n.dargs[1];
      const double s = g(0, 0) / p.size();
      for (int r = 0; r < p.rows(); ++r)
        for (int c = 0; c < p.cols(); ++c) {
          const bool pos = gt(r, c) != 0.0;
          const double raw = pos ? p(r, c) : 1.0 - p(r, c);
          if (raw <= 1e-12 || raw >= 1.0 - 1e-12) continue;  // clamped flat
          const double pt = raw;
          const double at_ = pos ? alpha : 1.0 - alpha;
          // fl = -at * (1-pt)^gamma * log(pt)
          const double dfl_dpt =
              at_ * (gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt) -
                     std::pow(1.0 - pt, gamma) / pt);
          gin(0)(r, c) += s * dfl_dpt * (pos ? 1.0 : -1.0);
        }
      break;
    }
    case Op::kBilinearUpsample: {
      const int factor = n.iargs[0];
      const Mat& src = vin(0);
      for (int y = 0; y < n.val.rows(); ++y) {
        double sy = (y + 0.5) / factor - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(src.rows() - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min<int>(y0 + 1, static_cast<int>(src.rows()) - 1);
        const double wy = sy - y0;
        for (int x = 0; x < n.val.cols(); ++x) {
          double sx = (x + 0.5) / factor - 0.5;
          sx = std::clamp(sx, 0.0, static_cast<double>(src.cols() - 1));
          const int x0 = static_cast<int>(sx);
          const int x1 =
              std::min<int>(x0 + 1, static_cast<int>(src.cols()) - 1);
          const double wx = sx - x0;
          const double gv = g(y, x);
          gin(0)(y0, x0) += gv * (1 - wy) * (1 - wx);
          gin(0)(y0, x1) += gv * (1 - wy) * wx;
          gin(0)(y1, x0) += gv * wy * (1 - wx);
          gin(0)(y1, x1) += gv * wy * wx;
        }
      }
      break;
    }
  }
}

}  // namespace padt::ag
