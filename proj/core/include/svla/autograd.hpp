#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "svla/tensor.hpp"

namespace svla {

// Reverse-mode autodiff over a fixed primitive set: matmul, row_softmax,
// attention, MLP, layer_norm, elementwise add/mul, concat, slice, gather and
// mean/sum reductions. Nodes form an ownership DAG via shared parents; calling
// backward() on a scalar accumulates grads into every reachable parameter.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated, same shape as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
  void zero_grad();
};

Var make_constant(Tensor value);
Var make_param(Tensor value);

const Tensor& val(const Var& v);

// ---- primitives -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_rowvec(const Var& x, const Var& row);  // [s,d] + [1,d]
Var mul_rowvec(const Var& x, const Var& row);  // [s,d] * [1,d]
Var add_scalar(const Var& x, double c);
Var scale(const Var& x, double c);
Var affine(const Var& x, const Var& w, const Var& b);  // x [s,i] * w [i,o] + b [1,o]
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const Var& a, const Var& b);
Var slice_rows(const Var& x, int begin, int end);
Var slice_cols(const Var& x, int begin, int end);
Var gather_rows(const Var& x, std::vector<int> indices);
Var row_softmax(const Var& x);
Var gelu(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Rows scaled to unit L2 norm; exact zero rows map to zero rows and bump
// *zero_guard if given.
Var row_l2_normalize(const Var& x, int* zero_guard = nullptr);
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_rows(const Var& x);  // [s,d] -> [1,d] column means
Var mse(const Var& a, const Var& b);

// ---- composite neural primitives ------------------------------------------

struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

// Per-head post-softmax probability matrices, recorded when requested.
struct AttentionTrace {
  std::vector<Tensor> head_probs;  // each [s,s]
};

// Full bidirectional multi-head self-attention; no positional signal inside.
Var multi_head_attention(const Var& x, const AttentionParams& p, int heads,
                         AttentionTrace* trace = nullptr);

struct MlpParams {
  Var w1, b1, w2, b2;
};

// Two affine layers with GELU between.
Var mlp_forward(const Var& x, const MlpParams& p);

// ---- backward and gradient checking ----------------------------------------

// Seeds d(loss)/d(loss) = 1 and accumulates grads into all reachable
// grad-requiring nodes. Hard error if loss is not 1x1.
void backward(const Var& loss);

struct ParamEntry {
  std::string name;
  Var var;
};

class ParamRegistry {
 public:
  Var add(const std::string& name, Tensor init);
  Var add_constant(const std::string& name, Tensor init);  // named but frozen
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const Var& find(const std::string& name) const;  // throws if absent
  void zero_grads();
  std::size_t total_scalars() const;

 private:
  std::vector<ParamEntry> entries_;
};

// Compares reverse-mode grads of make_loss() against central differences
// (f(x+eps) - f(x-eps)) / (2 eps) per coordinate, over the given params.
// Returns the max scaled error |a - n| / max(|a|, |n|, floor); the floor keeps
// finite-difference noise on near-zero coordinates from dominating.
double grad_check(const std::function<Var()>& make_loss, const std::vector<ParamEntry>& params,
                  double eps = 1e-5, double floor = 1e-4);

}  // namespace svla
