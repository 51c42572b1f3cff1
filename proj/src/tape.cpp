#include "marc/tape.hpp"

#include <cmath>
#include <limits>

namespace marc {

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}
}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check(Var v) const {
  if (!v.valid()) throw std::logic_error("Tape: handle is not recorded on a tape");
  if (v.id >= static_cast<int>(nodes_.size())) throw std::logic_error("Tape: handle from a different tape");
}

const Matrix& Tape::val_of(int id) const {
  const Node& n = nodes_[id];
  return n.op == Op::kLeaf ? *n.ext : n.val;
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = val_of(id);
    n.grad = Matrix(v.rows, v.cols);
    n.has_grad = true;
  }
  return n.grad;
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return val_of(v.id);
}

const Matrix& Tape::grad(Var v) {
  check(v);
  if (!ran_backward_) throw std::logic_error("Tape::grad: backward has not been run");
  return grad_of(v.id);
}

Var Tape::leaf(const Matrix& m) {
  auto it = leaf_ids_.find(&m);
  if (it != leaf_ids_.end()) return {it->second};
  Node n;
  n.op = Op::kLeaf;
  n.ext = &m;
  const int id = push(std::move(n));
  leaf_ids_.emplace(&m, id);
  return {id};
}

Var Tape::constant(Matrix m) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(m);
  return {push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  kernels::matmul(val_of(a.id), val_of(b.id), n.val);
  return {push(std::move(n))};
}

Var Tape::transpose(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.val = Matrix(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) n.val(j, i) = x(i, j);
  return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  const Matrix& x = val_of(a.id);
  const Matrix& y = val_of(b.id);
  check_same_shape(x, y, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.val = x;
  for (size_t i = 0; i < y.size(); ++i) n.val.data[i] += y.data[i];
  return {push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  const Matrix& x = val_of(a.id);
  const Matrix& y = val_of(b.id);
  check_same_shape(x, y, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.val = x;
  for (size_t i = 0; i < y.size(); ++i) n.val.data[i] -= y.data[i];
  return {push(std::move(n))};
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  const Matrix& x = val_of(a.id);
  const Matrix& y = val_of(b.id);
  check_same_shape(x, y, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.val = x;
  for (size_t i = 0; i < y.size(); ++i) n.val.data[i] *= y.data[i];
  return {push(std::move(n))};
}

Var Tape::scale(Var a, double c) {
  check(a);
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.scalar = c;
  n.val = val_of(a.id);
  for (double& v : n.val.data) v *= c;
  return {push(std::move(n))};
}

Var Tape::add_col_broadcast(Var m, Var col) {
  check(m);
  check(col);
  const Matrix& x = val_of(m.id);
  const Matrix& c = val_of(col.id);
  if (c.cols != 1 || c.rows != x.rows)
    throw std::invalid_argument("add_col_broadcast: bias " + c.shape_str() + " does not match " + x.shape_str());
  Node n;
  n.op = Op::kAddColBroadcast;
  n.a = m.id;
  n.b = col.id;
  n.val = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) n.val(i, j) += c(i, 0);
  return {push(std::move(n))};
}

Var Tape::leaky_relu(Var a, double slope) {
  check(a);
  if (!(slope > 0.0 && slope < 1.0)) throw std::invalid_argument("leaky_relu: slope must be in (0,1)");
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = a.id;
  n.scalar = slope;
  n.val = val_of(a.id);
  for (double& v : n.val.data)
    if (v < 0.0) v *= slope;
  return {push(std::move(n))};
}

Var Tape::exp(Var a) {
  check(a);
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.val = val_of(a.id);
  for (double& v : n.val.data) v = std::exp(v);
  return {push(std::move(n))};
}

Var Tape::log(Var a) {
  check(a);
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.val = val_of(a.id);
  for (double& v : n.val.data) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input (degenerate distribution?)");
    v = std::log(v);
  }
  return {push(std::move(n))};
}

namespace {
// In-place stable softmax over a contiguous strided slice.
void softmax_slice(double* p, int count, int stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    if (!std::isfinite(p[i * static_cast<size_t>(stride)]))
      throw std::domain_error("softmax: non-finite input");
    mx = std::max(mx, p[i * static_cast<size_t>(stride)]);
  }
  double z = 0.0;
  for (int i = 0; i < count; ++i) {
    double& v = p[i * static_cast<size_t>(stride)];
    v = std::exp(v - mx);
    z += v;
  }
  for (int i = 0; i < count; ++i) p[i * static_cast<size_t>(stride)] /= z;
}
}  // namespace

Var Tape::softmax_rows(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (x.cols < 1) throw std::invalid_argument("softmax_rows: needs at least one column");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a.id;
  n.val = x;
  for (int i = 0; i < x.rows; ++i) softmax_slice(&n.val.data[static_cast<size_t>(i) * x.cols], x.cols, 1);
  return {push(std::move(n))};
}

Var Tape::softmax_cols(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (x.rows < 1) throw std::invalid_argument("softmax_cols: needs at least one row");
  Node n;
  n.op = Op::kSoftmaxCols;
  n.a = a.id;
  n.val = x;
  for (int j = 0; j < x.cols; ++j) softmax_slice(&n.val.data[j], x.rows, x.cols);
  return {push(std::move(n))};
}

Var Tape::log_softmax_cols(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (x.rows < 1) throw std::invalid_argument("log_softmax_cols: needs at least one row");
  Node n;
  n.op = Op::kLogSoftmaxCols;
  n.a = a.id;
  n.val = x;
  for (int j = 0; j < x.cols; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < x.rows; ++i) {
      if (!std::isfinite(x(i, j))) throw std::domain_error("log_softmax_cols: non-finite input");
      mx = std::max(mx, x(i, j));
    }
    double z = 0.0;
    for (int i = 0; i < x.rows; ++i) z += std::exp(x(i, j) - mx);
    const double lz = mx + std::log(z);
    for (int i = 0; i < x.rows; ++i) n.val(i, j) = x(i, j) - lz;
  }
  return {push(std::move(n))};
}

Var Tape::masked_softmax_rows(Var a, std::shared_ptr<const Matrix> mask) {
  check(a);
  const Matrix& x = val_of(a.id);
  check_same_shape(x, *mask, "masked_softmax_rows");
  Node n;
  n.op = Op::kMaskedSoftmaxRows;
  n.a = a.id;
  n.mask = mask;
  n.val = Matrix(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < x.cols; ++j)
      if ((*mask)(i, j) != 0.0) {
        if (!std::isfinite(x(i, j))) throw std::domain_error("masked_softmax_rows: non-finite input");
        mx = std::max(mx, x(i, j));
      }
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked row -> zeros
    double z = 0.0;
    for (int j = 0; j < x.cols; ++j)
      if ((*mask)(i, j) != 0.0) {
        n.val(i, j) = std::exp(x(i, j) - mx);
        z += n.val(i, j);
      }
    for (int j = 0; j < x.cols; ++j) n.val(i, j) /= z;
  }
  return {push(std::move(n))};
}

Var Tape::sum(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.val = Matrix(1, 1);
  double acc = 0.0;
  for (double v : x.data) acc += v;
  n.val(0, 0) = acc;
  return {push(std::move(n))};
}

Var Tape::max_cols(Var a) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (x.cols < 1) throw std::invalid_argument("max_cols: empty input");
  Node n;
  n.op = Op::kMaxCols;
  n.a = a.id;
  n.val = Matrix(x.rows, 1);
  n.iaux.resize(x.rows);
  for (int i = 0; i < x.rows; ++i) {
    int arg = 0;
    double best = x(i, 0);
    for (int j = 1; j < x.cols; ++j)
      if (x(i, j) > best) {
        best = x(i, j);
        arg = j;
      }
    n.val(i, 0) = best;
    n.iaux[i] = arg;
  }
  return {push(std::move(n))};
}

Var Tape::vstack(Var top, Var bottom) {
  check(top);
  check(bottom);
  const Matrix& x = val_of(top.id);
  const Matrix& y = val_of(bottom.id);
  if (x.cols != y.cols)
    throw std::invalid_argument("vstack: column mismatch " + x.shape_str() + " vs " + y.shape_str());
  Node n;
  n.op = Op::kVStack;
  n.a = top.id;
  n.b = bottom.id;
  n.val = Matrix(x.rows + y.rows, x.cols);
  std::copy(x.data.begin(), x.data.end(), n.val.data.begin());
  std::copy(y.data.begin(), y.data.end(), n.val.data.begin() + x.size());
  return {push(std::move(n))};
}

Var Tape::hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no inputs");
  int rows = -1, cols = 0;
  for (Var p : parts) {
    check(p);
    const Matrix& x = val_of(p.id);
    if (rows < 0) rows = x.rows;
    if (x.rows != rows) throw std::invalid_argument("hstack: row mismatch");
    cols += x.cols;
  }
  Node n;
  n.op = Op::kHStack;
  n.val = Matrix(rows, cols);
  int at = 0;
  for (Var p : parts) {
    n.args.push_back(p.id);
    const Matrix& x = val_of(p.id);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < x.cols; ++j) n.val(i, at + j) = x(i, j);
    at += x.cols;
  }
  return {push(std::move(n))};
}

Var Tape::slice_cols(Var a, int first, int count) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (first < 0 || count < 0 || first + count > x.cols)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.iaux = {first, count};
  n.val = Matrix(x.rows, count);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < count; ++j) n.val(i, j) = x(i, first + j);
  return {push(std::move(n))};
}

Var Tape::select_per_column(Var a, std::vector<int> idx) {
  check(a);
  const Matrix& x = val_of(a.id);
  if (static_cast<int>(idx.size()) != x.cols)
    throw std::invalid_argument("select_per_column: index count mismatch");
  Node n;
  n.op = Op::kSelectPerColumn;
  n.a = a.id;
  n.val = Matrix(1, x.cols);
  for (int j = 0; j < x.cols; ++j) {
    if (idx[j] < 0 || idx[j] >= x.rows) throw std::invalid_argument("select_per_column: index out of range");
    n.val(0, j) = x(idx[j], j);
  }
  n.iaux = std::move(idx);
  return {push(std::move(n))};
}

Var Tape::group_max_pool(Var a, std::vector<int> offsets) {
  check(a);
  const Matrix& x = val_of(a.id);
  const int groups = static_cast<int>(offsets.size()) - 1;
  if (groups < 1 || offsets.front() != 0 || offsets.back() != x.cols)
    throw std::invalid_argument("group_max_pool: bad offsets");
  Node n;
  n.op = Op::kGroupMaxPool;
  n.a = a.id;
  n.val = Matrix(x.rows, groups);
  n.iaux.resize(static_cast<size_t>(x.rows) * groups);
  for (int s = 0; s < groups; ++s) {
    const int lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) throw std::invalid_argument("group_max_pool: empty group");
    for (int i = 0; i < x.rows; ++i) {
      int arg = lo;
      double best = x(i, lo);
      for (int j = lo + 1; j < hi; ++j)
        if (x(i, j) > best) {
          best = x(i, j);
          arg = j;
        }
      n.val(i, s) = best;
      n.iaux[static_cast<size_t>(i) * groups + s] = arg;
    }
  }
  n.args = std::move(offsets);
  return {push(std::move(n))};
}

Var Tape::group_matmul_right(Var a, std::shared_ptr<const std::vector<Matrix>> mats, std::vector<int> offsets) {
  check(a);
  const Matrix& x = val_of(a.id);
  const int groups = static_cast<int>(offsets.size()) - 1;
  if (groups != static_cast<int>(mats->size()) || offsets.front() != 0 || offsets.back() != x.cols)
    throw std::invalid_argument("group_matmul_right: bad offsets");
  Node n;
  n.op = Op::kGroupMatmulRight;
  n.a = a.id;
  n.mats = mats;
  n.val = Matrix(x.rows, x.cols);
  for (int s = 0; s < groups; ++s) {
    const int lo = offsets[s];
    const int w = offsets[s + 1] - lo;
    const Matrix& m = (*mats)[s];
    if (m.rows != w || m.cols != w)
      throw std::invalid_argument("group_matmul_right: block " + std::to_string(s) + " expects " +
                                  std::to_string(w) + "x" + std::to_string(w) + ", got " + m.shape_str());
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int u = 0; u < w; ++u) acc += x(i, lo + u) * m(u, j);
        n.val(i, lo + j) = acc;
      }
  }
  n.args = std::move(offsets);
  return {push(std::move(n))};
}

void Tape::backward(Var loss) {
  check(loss);
  const Matrix& lv = val_of(loss.id);
  if (lv.rows != 1 || lv.cols != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar, got " + lv.shape_str());
  ran_backward_ = true;
  grad_of(loss.id)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id)
    if (nodes_[id].has_grad) backprop_node(id);
}

void Tape::backprop_node(int id) {
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kMatMul: {
      kernels::matmul_nt(g, val_of(n.b), grad_of(n.a), true);
      kernels::matmul_tn(val_of(n.a), g, grad_of(n.b), true);
      break;
    }
    case Op::kTranspose: {
      Matrix& da = grad_of(n.a);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) da(j, i) += g(i, j);
      break;
    }
    case Op::kAdd: {
      Matrix& da = grad_of(n.a);
      Matrix& db = grad_of(n.b);
      for (size_t i = 0; i < g.size(); ++i) {
        da.data[i] += g.data[i];
        db.data[i] += g.data[i];
      }
      break;
    }
    case Op::kSub: {
      Matrix& da = grad_of(n.a);
      Matrix& db = grad_of(n.b);
      for (size_t i = 0; i < g.size(); ++i) {
        da.data[i] += g.data[i];
        db.data[i] -= g.data[i];
      }
      break;
    }
    case Op::kMul: {
      const Matrix& xa = val_of(n.a);
      const Matrix& xb = val_of(n.b);
      Matrix& da = grad_of(n.a);
      Matrix& db = grad_of(n.b);
      for (size_t i = 0; i < g.size(); ++i) {
        da.data[i] += g.data[i] * xb.data[i];
        db.data[i] += g.data[i] * xa.data[i];
      }
      break;
    }
    case Op::kScale: {
      Matrix& da = grad_of(n.a);
      for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.scalar;
      break;
    }
    case Op::kAddColBroadcast: {
      Matrix& da = grad_of(n.a);
      Matrix& db = grad_of(n.b);
      for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
      for (int i = 0; i < g.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < g.cols; ++j) acc += g(i, j);
        db(i, 0) += acc;
      }
      break;
    }
    case Op::kLeakyRelu: {
      const Matrix& x = val_of(n.a);
      Matrix& da = grad_of(n.a);
      // subgradient at 0 defined as the slope
      for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * (x.data[i] <= 0.0 ? n.scalar : 1.0);
      break;
    }
    case Op::kExp: {
      Matrix& da = grad_of(n.a);
      for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.val.data[i];
      break;
    }
    case Op::kLog: {
      const Matrix& x = val_of(n.a);
      Matrix& da = grad_of(n.a);
      for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] / x.data[i];
      break;
    }
    case Op::kSoftmaxRows:
    case Op::kMaskedSoftmaxRows: {
      // dX = Y .* (dY - rowsum(dY .* Y)); zero rows stay zero.
      Matrix& da = grad_of(n.a);
      for (int i = 0; i < g.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < g.cols; ++j) dot += g(i, j) * n.val(i, j);
        for (int j = 0; j < g.cols; ++j) da(i, j) += n.val(i, j) * (g(i, j) - dot);
      }
      break;
    }
    case Op::kSoftmaxCols: {
      Matrix& da = grad_of(n.a);
      for (int j = 0; j < g.cols; ++j) {
        double dot = 0.0;
        for (int i = 0; i < g.rows; ++i) dot += g(i, j) * n.val(i, j);
        for (int i = 0; i < g.rows; ++i) da(i, j) += n.val(i, j) * (g(i, j) - dot);
      }
      break;
    }
    case Op::kLogSoftmaxCols: {
      // dX[i,j] = dY[i,j] - exp(Y[i,j]) * colsum_j(dY)
      Matrix& da = grad_of(n.a);
      for (int j = 0; j < g.cols; ++j) {
        double colsum = 0.0;
        for (int i = 0; i < g.rows; ++i) colsum += g(i, j);
        for (int i = 0; i < g.rows; ++i) da(i, j) += g(i, j) - std::exp(n.val(i, j)) * colsum;
      }
      break;
    }
    case Op::kSum: {
      Matrix& da = grad_of(n.a);
      const double s = g(0, 0);
      for (double& v : da.data) v += s;
      break;
    }
    case Op::kMaxCols: {
      Matrix& da = grad_of(n.a);
      for (int i = 0; i < g.rows; ++i) da(i, n.iaux[i]) += g(i, 0);
      break;
    }
    case Op::kVStack: {
      Matrix& da = grad_of(n.a);
      Matrix& db = grad_of(n.b);
      for (size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i];
      for (size_t i = 0; i < db.size(); ++i) db.data[i] += g.data[da.size() + i];
      break;
    }
    case Op::kHStack: {
      int at = 0;
      for (int part : n.args) {
        Matrix& dp = grad_of(part);
        for (int i = 0; i < dp.rows; ++i)
          for (int j = 0; j < dp.cols; ++j) dp(i, j) += g(i, at + j);
        at += dp.cols;
      }
      break;
    }
    case Op::kSliceCols: {
      Matrix& da = grad_of(n.a);
      const int first = n.iaux[0], count = n.iaux[1];
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < count; ++j) da(i, first + j) += g(i, j);
      break;
    }
    case Op::kSelectPerColumn: {
      Matrix& da = grad_of(n.a);
      for (int j = 0; j < g.cols; ++j) da(n.iaux[j], j) += g(0, j);
      break;
    }
    case Op::kGroupMaxPool: {
      Matrix& da = grad_of(n.a);
      const int groups = n.val.cols;
      for (int i = 0; i < g.rows; ++i)
        for (int s = 0; s < groups; ++s) da(i, n.iaux[static_cast<size_t>(i) * groups + s]) += g(i, s);
      break;
    }
    case Op::kGroupMatmulRight: {
      Matrix& da = grad_of(n.a);
      const auto& offsets = n.args;
      for (size_t s = 0; s + 1 < offsets.size(); ++s) {
        const int lo = offsets[s];
        const int w = offsets[s + 1] - lo;
        const Matrix& m = (*n.mats)[s];
        for (int i = 0; i < g.rows; ++i)
          for (int u = 0; u < w; ++u) {
            double acc = 0.0;
            for (int j = 0; j < w; ++j) acc += g(i, lo + j) * m(u, j);
            da(i, lo + u) += acc;
          }
      }
      break;
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  leaf_ids_.clear();
  ran_backward_ = false;
}

}  // namespace marc
