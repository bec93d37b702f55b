#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace padt::ag {

using Mat = Eigen::MatrixXd;

// Named parameter tensors with persistent gradient buffers. Tapes are
// per-sample and short-lived; gradients accumulate here across tapes until
// the optimizer consumes them. Iteration order is insertion order so every
// run touches parameters in the same sequence.
class ParamStore {
 public:
  // Creates the entry; throws if the name exists.
  int add(const std::string& name, Mat init);
  bool has(const std::string& name) const;
  int index_of(const std::string& name) const;

  Mat& value(int idx) { return entries_[idx].value; }
  const Mat& value(int idx) const { return entries_[idx].value; }
  Mat& value(const std::string& name) { return entries_[index_of(name)].value; }
  const Mat& value(const std::string& name) const {
    return entries_[index_of(name)].value;
  }
  Mat& grad(int idx) { return entries_[idx].grad; }
  Mat& grad(const std::string& name) { return entries_[index_of(name)].grad; }
  const std::string& name(int idx) const { return entries_[idx].name; }

  int size() const { return static_cast<int>(entries_.size()); }
  void zero_grad();
  long long num_scalars() const;

 private:
  struct Entry {
    std::string name;
    Mat value;
    Mat grad;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

enum class Op : uint8_t {
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddRowvec,
  kMatmul,    // A * B
  kMatmulNT,  // A * B^T
  kGatherRows,
  kSliceRows,
  kSliceCols,
  kConcatRows,
  kConcatCols,
  kReshapeRowMajor,
  kRelu,
  kGelu,
  kSigmoid,
  kCMin,
  kCMax,
  kSoftmaxRows,
  kLayerNorm,
  kSum,
  kMean,
  kMse,
  kCeRobust,
  kBboxGiouL1,
  kDice,
  kFocal,
  kBilinearUpsample,
};

class Tape;

// Handle into a tape. Cheap to copy; valid for the tape's lifetime.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape over dense double matrices. Nodes are appended in
// topological order by construction; backward() walks them once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant leaf; receives no gradient.
  Value input(Mat m);
  // Parameter leaf; backward() adds its gradient into the store.
  Value param(ParamStore& ps, const std::string& name);
  Value param(ParamStore& ps, int idx);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // elementwise
  Value scale(Value a, double s);
  Value add_scalar(Value a, double s);
  // x (n x d) + broadcast row vector v (1 x d).
  Value add_rowvec(Value x, Value v);
  Value matmul(Value a, Value b);
  Value matmul_nt(Value a, Value b);
  Value gather_rows(Value x, std::vector<int> idx);
  Value slice_rows(Value x, int r0, int n);
  Value slice_cols(Value x, int c0, int n);
  Value concat_rows(const std::vector<Value>& xs);
  Value concat_cols(const std::vector<Value>& xs);
  // Reinterprets the elements in row-major reading order as an r x c matrix.
  Value reshape_rowmajor(Value x, int r, int c);
  Value relu(Value x);
  Value gelu(Value x);
  Value sigmoid(Value x);
  Value cmin(Value a, Value b);  // elementwise min; ties route grad to a
  Value cmax(Value a, Value b);
  Value softmax_rows(Value x);
  // Row-wise layer norm; gamma and beta are 1 x d.
  Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5);
  Value sum(Value x);
  Value mean(Value x);
  Value mse(Value pred, Value target);

  // Per-token cross entropy over rows of logits (T x V). targets[t] == -1
  // skips the row; blocked(t, v) == 1 removes vocabulary entry v from the
  // distribution at step t (probability and gradient are exactly zero
  // there). Mean over counted rows. Throws when a counted target is
  // blocked, or when a counted row blocks everything.
  Value ce_robust(Value logits, const std::vector<int>& targets,
                  const Mat& blocked);
  // Mean over box pairs of w_giou * (1 - GIoU) + w_l1 * sum |pred - gt|.
  // pred is n x 4 canonical corner boxes, gt a constant n x 4.
  Value bbox_giou_l1(Value pred, const Mat& gt, double w_giou = 1.0,
                     double w_l1 = 1.0);
  // Soft dice loss over probabilities in [0,1] against a binary target,
  // single region: 1 - (2 * sum(p*g) + eps) / (sum(p) + sum(g) + eps).
  Value dice(Value probs, const Mat& gt, double eps);
  // Mean focal loss over probability elements; p_t clamped away from 0/1.
  Value focal(Value probs, const Mat& gt, double gamma, double alpha);
  // Treats the value as a 2D grid and upsamples by an integer factor with
  // bilinear interpolation (half-pixel centers, border clamp).
  Value bilinear_upsample(Value grid, int factor);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // parameter leaf's store. loss must be 1 x 1.
  void backward(Value loss);

  const Mat& val(Value v) const;
  // Gradient of the last backward() at this node. Zero matrix when the
  // node was not reached.
  const Mat& grad(Value v) const;
  double scalar(Value v) const;
  int rows(Value v) const { return static_cast<int>(val(v).rows()); }
  int cols(Value v) const { return static_cast<int>(val(v).cols()); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    Op op = Op::kInput;
    std::vector<int> in;
    std::vector<int> iargs;
    std::vector<double> dargs;
    std::vector<Mat> aux;
    ParamStore* store = nullptr;
    int store_idx = -1;
  };

  Value push(Node n);
  Node& at(Value v);
  const Node& at(Value v) const;
  void check_same_shape(const Value& a, const Value& b,
                        const char* where) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
};

}  // namespace padt::ag
