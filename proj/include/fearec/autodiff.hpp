#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fearec/linalg.hpp"
#include "fearec/ramp.hpp"

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape owns every intermediate of one forward pass. Ops append a node with
// its value and a closure that pushes the node's gradient into its inputs.
// Parameters never live on the tape: ops take a ParamRef and write their
// contribution straight into the caller's gradient buffer.
namespace fearec::ad {

class Tape;

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first use
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
  bool has_grad() const { return grad.size() != 0; }
};

using Var = Node*;

struct ParamRef {
  const Matrix* value = nullptr;
  Matrix* grad = nullptr;  // null: parameter treated as constant

  const Matrix& v() const { return *value; }
};

class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var push(Matrix value, std::function<void(Node&)> backward);

  // Seeds d(loss)/d(root) and runs every recorded closure in reverse order.
  void backward(Var root, const Matrix& seed);

 private:
  bool record_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Elementwise and linear algebra.
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var axpby(Tape& t, double a, Var x, double b, Var y);
Var matmul(Tape& t, Var x, ParamRef w);
Var add_row_bias(Tape& t, Var x, ParamRef bias);
Var gelu(Tape& t, Var x);
Var layer_norm(Tape& t, Var x, ParamRef gamma, ParamRef beta, double eps);
Var mask_rows(Tape& t, Var x, const std::vector<bool>& keep);
// Elementwise product with a precomputed mask of 0 and 1/(1-p) entries.
Var dropout(Tape& t, Var x, const Matrix& mask);

Var slice_columns(Tape& t, Var x, Eigen::Index begin, Eigen::Index width);
Var concat_columns(Tape& t, std::span<const Var> parts);
Var select_row(Tape& t, Var x, Eigen::Index row);

// Rows item_table[ids[t]] + pos_table[t].
Var embed(Tape& t, std::span<const int> ids, ParamRef item_table, ParamRef pos_table);

// Column-wise band-pass along time. Self-adjoint, so backward reuses it.
Var band_filter(Tape& t, Var x, const ramp::Band& band);

// Scaled dot-product attention for one head. allowed(i, j) != 0 marks
// visible keys; a query with no visible key yields a zero row. The softmax
// weights are written to *weights_out when it is non-null.
Var attention_head(Tape& t, Var q, Var k, Var v, const Matrix& allowed, double scale,
                   Matrix* weights_out);

struct DelayChoice {
  int lag = 0;  // 1..N
  double weight = 0.0;
};

// Auto-correlation attention for one head. q, k and v are [N x d] matrices
// already band-limited to `band` (outputs of band_filter). Correlation is computed through the real FFT
// restricted to `band`; the k best lags (or `frozen_lags` when non-empty) are
// softmax-weighted and the rolled values aggregated.
Var delay_aggregate(Tape& t, Var q, Var k, Var v, const ramp::Band& band, int top_k,
                    std::span<const int> frozen_lags, std::vector<DelayChoice>* report);

// Row-wise logits against an item table: table * h^T with column 0 (padding) at -inf.
Var item_logits(Tape& t, Var h, ParamRef item_table);

// Circular shift: output row r = input row (r + tau) mod N.
Matrix roll_rows(const Matrix& x, int tau);

}  // namespace fearec::ad
