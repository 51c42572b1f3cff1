#pragma once

#include <memory>
#include <unordered_map>
#include <vector>

#include "marc/matrix.hpp"

namespace marc {

// Handle into a Tape. A default-constructed Var belongs to no recording and
// any gradient/value request through it fails explicitly.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. One tape per forward pass; replaying it
// backward visits operations in exact reverse order of recording. Gradients
// accumulate additively across fan-out; unreached leaves stay exactly zero.
class Tape {
 public:
  // Leaf referencing external storage. The referenced matrix must outlive
  // any use of this tape. Repeated calls with the same matrix return the
  // same node, so its gradient accumulates in one place and can be fetched
  // by re-asking for the leaf after backward().
  Var leaf(const Matrix& m);
  // Leaf owning a copy.
  Var constant(Matrix m);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_col_broadcast(Var m, Var col);  // col is rows x 1, added to every column
  Var leaky_relu(Var a, double slope = 0.01);
  Var exp(Var a);
  Var log(Var a);
  Var softmax_rows(Var a);
  Var softmax_cols(Var a);
  // Numerically safe log(softmax_cols(a)); never produces log(0) overflow
  // for representable logits.
  Var log_softmax_cols(Var a);
  // Row-wise softmax restricted to entries where mask != 0; rows with no
  // unmasked entry come out all zero.
  Var masked_softmax_rows(Var a, std::shared_ptr<const Matrix> mask);
  Var sum(Var a);                      // 1x1
  Var max_cols(Var a);                 // rows x 1, feature-wise max over columns
  Var vstack(Var top, Var bottom);     // concat rows
  Var hstack(const std::vector<Var>& parts);
  Var slice_cols(Var a, int first, int count);
  // Per-sample Q-value selection: a is (k x S), idx[s] picks the row for
  // column s; output 1 x S.
  Var select_per_column(Var a, std::vector<int> idx);
  // Per-sample max-pool: columns [offsets[s], offsets[s+1]) of a pool to
  // output column s. Output rows x S where S = offsets.size()-1.
  Var group_max_pool(Var a, std::vector<int> offsets);
  // Per-sample right-multiplication: out block s = a block s * mats[s],
  // where block s spans columns [offsets[s], offsets[s+1]).
  Var group_matmul_right(Var a, std::shared_ptr<const std::vector<Matrix>> mats, std::vector<int> offsets);

  const Matrix& value(Var v) const;
  // Runs reverse-mode accumulation from a scalar loss produced on this tape.
  void backward(Var loss);
  // Gradient of the loss w.r.t. v; all-zero if v was unreached.
  const Matrix& grad(Var v);

  void reset();
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kConst,
    kMatMul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddColBroadcast,
    kLeakyRelu,
    kExp,
    kLog,
    kSoftmaxRows,
    kSoftmaxCols,
    kLogSoftmaxCols,
    kMaskedSoftmaxRows,
    kSum,
    kMaxCols,
    kVStack,
    kHStack,
    kSliceCols,
    kSelectPerColumn,
    kGroupMaxPool,
    kGroupMatmulRight,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    const Matrix* ext = nullptr;
    Matrix val;
    Matrix grad;
    bool has_grad = false;
    std::vector<int> args;  // hstack inputs / integer aux (argmax, offsets, indices)
    std::vector<int> iaux;
    std::shared_ptr<const Matrix> mask;
    std::shared_ptr<const std::vector<Matrix>> mats;
  };

  const Matrix& val_of(int id) const;
  Matrix& grad_of(int id);
  int push(Node n);
  void check(Var v) const;
  void backprop_node(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> leaf_ids_;
  bool ran_backward_ = false;
};

}  // namespace marc
