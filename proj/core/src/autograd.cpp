#include "svla/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace svla {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void expect_matrix(const Var& v, const char* op) {
  if (!v) {
    fail(std::string(op) + ": null operand");
  }
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

Var make_node(Tensor value, const char* op, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool req = false;
  for (const Var& p : parents) {
    req = req || p->requires_grad;
  }
  n->requires_grad = req;
  if (req) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// ---- raw tensor kernels (value level, no graph) ----

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
  return c;
}

// c += a * b
void t_matmul_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

// c += a * b^T
void t_matmul_nt_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        acc += arow[p] * brow[p];
      }
      crow[j] += acc;
    }
  }
}

Tensor t_matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.rows());
  t_matmul_nt_acc(c, a, b);
  return c;
}

// c += a^T * b
void t_matmul_tn_acc(Tensor& c, const Tensor& a, const Tensor& b) {
  const int m = a.cols(), k = a.rows(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c.row_ptr(i);
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

Tensor t_cols(const Tensor& x, int begin, int width) {
  Tensor out(x.rows(), width);
  for (int i = 0; i < x.rows(); ++i) {
    const double* src = x.row_ptr(i) + begin;
    double* dst = out.row_ptr(i);
    for (int j = 0; j < width; ++j) {
      dst[j] = src[j];
    }
  }
  return out;
}

void t_add_cols(Tensor& x, int begin, const Tensor& part) {
  for (int i = 0; i < x.rows(); ++i) {
    double* dst = x.row_ptr(i) + begin;
    const double* src = part.row_ptr(i);
    for (int j = 0; j < part.cols(); ++j) {
      dst[j] += src[j];
    }
  }
}

void t_colsum_acc(Tensor& acc, const Tensor& g) {
  double* out = acc.row_ptr(0);
  for (int i = 0; i < g.rows(); ++i) {
    const double* row = g.row_ptr(i);
    for (int j = 0; j < g.cols(); ++j) {
      out[j] += row[j];
    }
  }
}

// Numerically stable: row-max subtracted before exponentiation.
void t_softmax_rows_inplace(Tensor& x) {
  for (int i = 0; i < x.rows(); ++i) {
    double* row = x.row_ptr(i);
    double mx = row[0];
    for (int j = 1; j < x.cols(); ++j) {
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < x.cols(); ++j) {
      row[j] *= inv;
    }
  }
}

// dx += y . (g - rowdot(g, y)) for y = softmax rows
void t_softmax_backward_acc(Tensor& dx, const Tensor& y, const Tensor& g) {
  for (int i = 0; i < y.rows(); ++i) {
    const double* yrow = y.row_ptr(i);
    const double* grow = g.row_ptr(i);
    double* drow = dx.row_ptr(i);
    double dot = 0.0;
    for (int j = 0; j < y.cols(); ++j) {
      dot += yrow[j] * grow[j];
    }
    for (int j = 0; j < y.cols(); ++j) {
      drow[j] += yrow[j] * (grow[j] - dot);
    }
  }
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (grad.empty() && value.size() > 0) {
    grad = Tensor(value.rows(), value.cols());
  }
  return grad;
}

void Node::zero_grad() {
  if (!grad.empty()) {
    grad.fill(0.0);
  }
}

Var make_constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "const";
  return n;
}

Var make_param(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "param";
  n->requires_grad = true;
  return n;
}

const Tensor& val(const Var& v) { return v->value; }

Var matmul(const Var& a, const Var& b) {
  expect_matrix(a, "matmul");
  expect_matrix(b, "matmul");
  if (a->value.cols() != b->value.rows()) {
    fail("matmul: inner extents differ, " + a->value.shape_str() + " x " + b->value.shape_str());
  }
  return make_node(t_matmul(a->value, b->value), "matmul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Tensor& g = self.grad;
    if (pa.requires_grad) {
      t_matmul_nt_acc(pa.ensure_grad(), g, pb.value);  // dA += g . B^T
    }
    if (pb.requires_grad) {
      t_matmul_tn_acc(pb.ensure_grad(), pa.value, g);  // dB += A^T . g
    }
  });
}

Var transpose(const Var& x) {
  expect_matrix(x, "transpose");
  const Tensor& v = x->value;
  Tensor out(v.cols(), v.rows());
  for (int i = 0; i < v.rows(); ++i) {
    for (int j = 0; j < v.cols(); ++j) {
      out.at(j, i) = v.at(i, j);
    }
  }
  return make_node(std::move(out), "transpose", {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (int i = 0; i < self.grad.rows(); ++i) {
      for (int j = 0; j < self.grad.cols(); ++j) {
        d.at(j, i) += self.grad.at(i, j);
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  expect_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.vec()[i] += b->value.vec()[i];
  }
  return make_node(std::move(out), "add", {a, b}, [](Node& self) {
    for (int side = 0; side < 2; ++side) {
      Node& p = *self.parents[side];
      if (!p.requires_grad) {
        continue;
      }
      Tensor& d = p.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += self.grad.vec()[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  expect_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.vec()[i] -= b->value.vec()[i];
  }
  return make_node(std::move(out), "sub", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& d = pa.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += self.grad.vec()[i];
      }
    }
    if (pb.requires_grad) {
      Tensor& d = pb.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] -= self.grad.vec()[i];
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  expect_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.vec()[i] *= b->value.vec()[i];
  }
  return make_node(std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& d = pa.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += self.grad.vec()[i] * pb.value.vec()[i];
      }
    }
    if (pb.requires_grad) {
      Tensor& d = pb.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += self.grad.vec()[i] * pa.value.vec()[i];
      }
    }
  });
}

Var add_rowvec(const Var& x, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != x->value.cols()) {
    fail("add_rowvec: want [1," + std::to_string(x->value.cols()) + "], got " +
         row->value.shape_str());
  }
  Tensor out = x->value;
  for (int i = 0; i < out.rows(); ++i) {
    double* dst = out.row_ptr(i);
    const double* r = row->value.row_ptr(0);
    for (int j = 0; j < out.cols(); ++j) {
      dst[j] += r[j];
    }
  }
  return make_node(std::move(out), "add_rowvec", {x, row}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pr = *self.parents[1];
    if (px.requires_grad) {
      Tensor& d = px.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += self.grad.vec()[i];
      }
    }
    if (pr.requires_grad) {
      t_colsum_acc(pr.ensure_grad(), self.grad);
    }
  });
}

Var mul_rowvec(const Var& x, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != x->value.cols()) {
    fail("mul_rowvec: want [1," + std::to_string(x->value.cols()) + "], got " +
         row->value.shape_str());
  }
  Tensor out = x->value;
  for (int i = 0; i < out.rows(); ++i) {
    double* dst = out.row_ptr(i);
    const double* r = row->value.row_ptr(0);
    for (int j = 0; j < out.cols(); ++j) {
      dst[j] *= r[j];
    }
  }
  return make_node(std::move(out), "mul_rowvec", {x, row}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pr = *self.parents[1];
    const Tensor& g = self.grad;
    if (px.requires_grad) {
      Tensor& d = px.ensure_grad();
      const double* r = pr.value.row_ptr(0);
      for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < g.cols(); ++j) {
          d.at(i, j) += g.at(i, j) * r[j];
        }
      }
    }
    if (pr.requires_grad) {
      Tensor& d = pr.ensure_grad();
      for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < g.cols(); ++j) {
          d.at(0, j) += g.at(i, j) * px.value.at(i, j);
        }
      }
    }
  });
}

Var add_scalar(const Var& x, double c) {
  Tensor out = x->value;
  for (double& v : out.vec()) {
    v += c;
  }
  return make_node(std::move(out), "add_scalar", {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.vec()[i] += self.grad.vec()[i];
    }
  });
}

Var scale(const Var& x, double c) {
  Tensor out = x->value;
  for (double& v : out.vec()) {
    v *= c;
  }
  return make_node(std::move(out), "scale", {x}, [c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.vec()[i] += c * self.grad.vec()[i];
    }
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  if (x->value.cols() != w->value.rows()) {
    fail("affine: input width " + x->value.shape_str() + " vs weight " + w->value.shape_str());
  }
  if (b->value.rows() != 1 || b->value.cols() != w->value.cols()) {
    fail("affine: bias must be [1," + std::to_string(w->value.cols()) + "], got " +
         b->value.shape_str());
  }
  Tensor out = t_matmul(x->value, w->value);
  for (int i = 0; i < out.rows(); ++i) {
    double* dst = out.row_ptr(i);
    const double* bias = b->value.row_ptr(0);
    for (int j = 0; j < out.cols(); ++j) {
      dst[j] += bias[j];
    }
  }
  return make_node(std::move(out), "affine", {x, w, b}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const Tensor& g = self.grad;
    if (px.requires_grad) {
      t_matmul_nt_acc(px.ensure_grad(), g, pw.value);
    }
    if (pw.requires_grad) {
      t_matmul_tn_acc(pw.ensure_grad(), px.value, g);
    }
    if (pb.requires_grad) {
      t_colsum_acc(pb.ensure_grad(), g);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) {
    fail("concat_rows: no parts");
  }
  const int cols = parts[0]->value.cols();
  int rows = 0;
  for (const Var& p : parts) {
    if (p->value.cols() != cols) {
      fail("concat_rows: column mismatch " + parts[0]->value.shape_str() + " vs " +
           p->value.shape_str());
    }
    rows += p->value.rows();
  }
  Tensor out(rows, cols);
  int r = 0;
  for (const Var& p : parts) {
    for (int i = 0; i < p->value.rows(); ++i, ++r) {
      std::copy_n(p->value.row_ptr(i), cols, out.row_ptr(r));
    }
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), "concat_rows", std::move(parents), [](Node& self) {
    int r = 0;
    for (const Var& pv : self.parents) {
      Node& p = *pv;
      const int pr = p.value.rows();
      if (p.requires_grad) {
        Tensor& d = p.ensure_grad();
        for (int i = 0; i < pr; ++i) {
          const double* src = self.grad.row_ptr(r + i);
          double* dst = d.row_ptr(i);
          for (int j = 0; j < d.cols(); ++j) {
            dst[j] += src[j];
          }
        }
      }
      r += pr;
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a->value.rows() != b->value.rows()) {
    fail("concat_cols: row mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  }
  const int ca = a->value.cols(), cb = b->value.cols();
  Tensor out(a->value.rows(), ca + cb);
  for (int i = 0; i < out.rows(); ++i) {
    std::copy_n(a->value.row_ptr(i), ca, out.row_ptr(i));
    std::copy_n(b->value.row_ptr(i), cb, out.row_ptr(i) + ca);
  }
  return make_node(std::move(out), "concat_cols", {a, b}, [ca, cb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& d = pa.ensure_grad();
      for (int i = 0; i < d.rows(); ++i) {
        const double* src = self.grad.row_ptr(i);
        double* dst = d.row_ptr(i);
        for (int j = 0; j < ca; ++j) {
          dst[j] += src[j];
        }
      }
    }
    if (pb.requires_grad) {
      Tensor& d = pb.ensure_grad();
      for (int i = 0; i < d.rows(); ++i) {
        const double* src = self.grad.row_ptr(i) + ca;
        double* dst = d.row_ptr(i);
        for (int j = 0; j < cb; ++j) {
          dst[j] += src[j];
        }
      }
    }
  });
}

Var slice_rows(const Var& x, int begin, int end) {
  if (begin < 0 || end > x->value.rows() || begin > end) {
    fail("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
         ") out of " + x->value.shape_str());
  }
  const int cols = x->value.cols();
  Tensor out(end - begin, cols);
  for (int i = begin; i < end; ++i) {
    std::copy_n(x->value.row_ptr(i), cols, out.row_ptr(i - begin));
  }
  return make_node(std::move(out), "slice_rows", {x}, [begin](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (int i = 0; i < self.grad.rows(); ++i) {
      const double* src = self.grad.row_ptr(i);
      double* dst = d.row_ptr(begin + i);
      for (int j = 0; j < d.cols(); ++j) {
        dst[j] += src[j];
      }
    }
  });
}

Var slice_cols(const Var& x, int begin, int end) {
  if (begin < 0 || end > x->value.cols() || begin > end) {
    fail("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
         ") out of " + x->value.shape_str());
  }
  Tensor out = t_cols(x->value, begin, end - begin);
  return make_node(std::move(out), "slice_cols", {x}, [begin](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (int i = 0; i < self.grad.rows(); ++i) {
      const double* src = self.grad.row_ptr(i);
      double* dst = d.row_ptr(i) + begin;
      for (int j = 0; j < self.grad.cols(); ++j) {
        dst[j] += src[j];
      }
    }
  });
}

Var gather_rows(const Var& x, std::vector<int> indices) {
  const int rows = x->value.rows();
  for (int idx : indices) {
    if (idx < 0 || idx >= rows) {
      fail("gather_rows: index " + std::to_string(idx) + " out of " + x->value.shape_str());
    }
  }
  const int cols = x->value.cols();
  Tensor out(static_cast<int>(indices.size()), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(x->value.row_ptr(indices[i]), cols, out.row_ptr(static_cast<int>(i)));
  }
  return make_node(std::move(out), "gather_rows", {x}, [idx = std::move(indices)](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* src = self.grad.row_ptr(static_cast<int>(i));
      double* dst = d.row_ptr(idx[i]);
      for (int j = 0; j < d.cols(); ++j) {
        dst[j] += src[j];
      }
    }
  });
}

Var row_softmax(const Var& x) {
  Tensor out = x->value;
  t_softmax_rows_inplace(out);
  return make_node(std::move(out), "row_softmax", {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    t_softmax_backward_acc(p.ensure_grad(), self.value, self.grad);
  });
}

Var gelu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.vec()) {
    v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return make_node(std::move(out), "gelu", {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = p.value.vec()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      d.vec()[i] += self.grad.vec()[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int cols = x->value.cols();
  if (gamma->value.rows() != 1 || gamma->value.cols() != cols || !gamma->value.same_shape(beta->value)) {
    fail("layer_norm: gamma/beta must be [1," + std::to_string(cols) + "], got " +
         gamma->value.shape_str() + " and " + beta->value.shape_str());
  }
  const int rows = x->value.rows();
  Tensor xhat(rows, cols);
  Tensor inv_std(1, rows);
  for (int i = 0; i < rows; ++i) {
    const double* src = x->value.row_ptr(i);
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) {
      mean += src[j];
    }
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double c = src[j] - mean;
      var += c * c;
    }
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std.at(0, i) = inv;
    double* dst = xhat.row_ptr(i);
    for (int j = 0; j < cols; ++j) {
      dst[j] = (src[j] - mean) * inv;
    }
  }
  Tensor out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double* h = xhat.row_ptr(i);
    double* dst = out.row_ptr(i);
    const double* g = gamma->value.row_ptr(0);
    const double* b = beta->value.row_ptr(0);
    for (int j = 0; j < cols; ++j) {
      dst[j] = h[j] * g[j] + b[j];
    }
  }
  return make_node(std::move(out), "layer_norm", {x, gamma, beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     Node& px = *self.parents[0];
                     Node& pg = *self.parents[1];
                     Node& pb = *self.parents[2];
                     const Tensor& g = self.grad;
                     const int rows = g.rows(), cols = g.cols();
                     if (pg.requires_grad) {
                       Tensor& d = pg.ensure_grad();
                       for (int i = 0; i < rows; ++i) {
                         for (int j = 0; j < cols; ++j) {
                           d.at(0, j) += g.at(i, j) * xhat.at(i, j);
                         }
                       }
                     }
                     if (pb.requires_grad) {
                       t_colsum_acc(pb.ensure_grad(), g);
                     }
                     if (px.requires_grad) {
                       Tensor& d = px.ensure_grad();
                       const double* gam = pg.value.row_ptr(0);
                       for (int i = 0; i < rows; ++i) {
                         const double* grow = g.row_ptr(i);
                         const double* hrow = xhat.row_ptr(i);
                         double* drow = d.row_ptr(i);
                         double sum_dh = 0.0, sum_dh_h = 0.0;
                         for (int j = 0; j < cols; ++j) {
                           const double dh = grow[j] * gam[j];
                           sum_dh += dh;
                           sum_dh_h += dh * hrow[j];
                         }
                         const double inv = inv_std.at(0, i);
                         const double m1 = sum_dh / cols;
                         const double m2 = sum_dh_h / cols;
                         for (int j = 0; j < cols; ++j) {
                           const double dh = grow[j] * gam[j];
                           drow[j] += inv * (dh - m1 - hrow[j] * m2);
                         }
                       }
                     }
                   });
}

Var row_l2_normalize(const Var& x, int* zero_guard) {
  const int rows = x->value.rows(), cols = x->value.cols();
  Tensor out(rows, cols);
  Tensor inv_norm(1, rows);
  for (int i = 0; i < rows; ++i) {
    const double* src = x->value.row_ptr(i);
    double ss = 0.0;
    for (int j = 0; j < cols; ++j) {
      ss += src[j] * src[j];
    }
    double inv = 0.0;
    if (ss > 0.0) {
      inv = 1.0 / std::sqrt(ss);
    } else if (zero_guard != nullptr) {
      ++*zero_guard;
    }
    inv_norm.at(0, i) = inv;
    double* dst = out.row_ptr(i);
    for (int j = 0; j < cols; ++j) {
      dst[j] = src[j] * inv;
    }
  }
  return make_node(std::move(out), "row_l2_normalize", {x},
                   [inv_norm = std::move(inv_norm)](Node& self) {
                     Node& p = *self.parents[0];
                     if (!p.requires_grad) {
                       return;
                     }
                     Tensor& d = p.ensure_grad();
                     const int rows = self.grad.rows(), cols = self.grad.cols();
                     for (int i = 0; i < rows; ++i) {
                       const double inv = inv_norm.at(0, i);
                       if (inv == 0.0) {
                         continue;  // zero row stays flat
                       }
                       const double* y = self.value.row_ptr(i);
                       const double* g = self.grad.row_ptr(i);
                       double* dst = d.row_ptr(i);
                       double dot = 0.0;
                       for (int j = 0; j < cols; ++j) {
                         dot += y[j] * g[j];
                       }
                       for (int j = 0; j < cols; ++j) {
                         dst[j] += inv * (g[j] - y[j] * dot);
                       }
                     }
                   });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x->value.vec()) {
    s += v;
  }
  return make_node(Tensor::scalar(s), "sum_all", {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    const double g = self.grad.vec()[0];
    for (double& v : d.vec()) {
      v += g;
    }
  });
}

Var mean_all(const Var& x) {
  if (x->value.size() == 0) {
    fail("mean_all: empty tensor");
  }
  double s = 0.0;
  for (double v : x->value.vec()) {
    s += v;
  }
  const double n = static_cast<double>(x->value.size());
  return make_node(Tensor::scalar(s / n), "mean_all", {x}, [n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    const double g = self.grad.vec()[0] / n;
    for (double& v : d.vec()) {
      v += g;
    }
  });
}

Var mean_rows(const Var& x) {
  const int rows = x->value.rows(), cols = x->value.cols();
  if (rows == 0) {
    fail("mean_rows: empty tensor");
  }
  Tensor out(1, cols);
  for (int i = 0; i < rows; ++i) {
    const double* src = x->value.row_ptr(i);
    for (int j = 0; j < cols; ++j) {
      out.at(0, j) += src[j];
    }
  }
  for (int j = 0; j < cols; ++j) {
    out.at(0, j) /= rows;
  }
  return make_node(std::move(out), "mean_rows", {x}, [rows](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) {
      return;
    }
    Tensor& d = p.ensure_grad();
    const double inv = 1.0 / rows;
    for (int i = 0; i < d.rows(); ++i) {
      double* dst = d.row_ptr(i);
      const double* g = self.grad.row_ptr(0);
      for (int j = 0; j < d.cols(); ++j) {
        dst[j] += g[j] * inv;
      }
    }
  });
}

Var mse(const Var& a, const Var& b) {
  expect_same_shape(a->value, b->value, "mse");
  if (a->value.size() == 0) {
    fail("mse: empty tensors");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) {
    const double d = a->value.vec()[i] - b->value.vec()[i];
    s += d * d;
  }
  const double n = static_cast<double>(a->value.size());
  return make_node(Tensor::scalar(s / n), "mse", {a, b}, [n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double g = 2.0 * self.grad.vec()[0] / n;
    if (pa.requires_grad) {
      Tensor& d = pa.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] += g * (pa.value.vec()[i] - pb.value.vec()[i]);
      }
    }
    if (pb.requires_grad) {
      Tensor& d = pb.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) {
        d.vec()[i] -= g * (pa.value.vec()[i] - pb.value.vec()[i]);
      }
    }
  });
}

Var multi_head_attention(const Var& x, const AttentionParams& p, int heads,
                         AttentionTrace* trace) {
  const int s = x->value.rows(), d = x->value.cols();
  if (heads < 1 || d % heads != 0) {
    fail("multi_head_attention: width " + std::to_string(d) + " not divisible by " +
         std::to_string(heads) + " heads");
  }
  for (const Var* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    if ((*w)->value.rows() != d || (*w)->value.cols() != d) {
      fail("multi_head_attention: projection must be [" + std::to_string(d) + "x" +
           std::to_string(d) + "], got " + (*w)->value.shape_str());
    }
  }
  const int dh = d / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto project = [&](const Var& w, const Var& b) {
    Tensor out = t_matmul(x->value, w->value);
    for (int i = 0; i < s; ++i) {
      double* dst = out.row_ptr(i);
      const double* bias = b->value.row_ptr(0);
      for (int j = 0; j < d; ++j) {
        dst[j] += bias[j];
      }
    }
    return out;
  };
  Tensor q = project(p.wq, p.bq);
  Tensor k = project(p.wk, p.bk);
  Tensor v = project(p.wv, p.bv);

  std::vector<Tensor> probs(heads);
  Tensor ctx(s, d);
  for (int h = 0; h < heads; ++h) {
    const int o = h * dh;
    Tensor qh = t_cols(q, o, dh);
    Tensor kh = t_cols(k, o, dh);
    Tensor vh = t_cols(v, o, dh);
    Tensor sc = t_matmul_nt(qh, kh);
    for (double& e : sc.vec()) {
      e *= att_scale;
    }
    t_softmax_rows_inplace(sc);
    probs[h] = std::move(sc);
    Tensor ch = t_matmul(probs[h], vh);
    t_add_cols(ctx, o, ch);
  }
  if (trace != nullptr) {
    trace->head_probs = probs;
  }

  Tensor out = t_matmul(ctx, p.wo->value);
  for (int i = 0; i < s; ++i) {
    double* dst = out.row_ptr(i);
    const double* bias = p.bo->value.row_ptr(0);
    for (int j = 0; j < d; ++j) {
      dst[j] += bias[j];
    }
  }

  return make_node(
      std::move(out), "attention",
      {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo},
      [q = std::move(q), k = std::move(k), v = std::move(v), probs = std::move(probs),
       ctx = std::move(ctx), heads, dh, att_scale](Node& self) {
        Node& px = *self.parents[0];
        Node& pwq = *self.parents[1];
        Node& pbq = *self.parents[2];
        Node& pwk = *self.parents[3];
        Node& pbk = *self.parents[4];
        Node& pwv = *self.parents[5];
        Node& pbv = *self.parents[6];
        Node& pwo = *self.parents[7];
        Node& pbo = *self.parents[8];
        const Tensor& g = self.grad;
        const int s = g.rows(), d = g.cols();

        if (pwo.requires_grad) {
          t_matmul_tn_acc(pwo.ensure_grad(), ctx, g);
        }
        if (pbo.requires_grad) {
          t_colsum_acc(pbo.ensure_grad(), g);
        }
        Tensor dctx = t_matmul_nt(g, pwo.value);

        Tensor dq(s, d), dk(s, d), dv(s, d);
        for (int h = 0; h < heads; ++h) {
          const int o = h * dh;
          Tensor dch = t_cols(dctx, o, dh);
          Tensor qh = t_cols(q, o, dh);
          Tensor kh = t_cols(k, o, dh);
          Tensor vh = t_cols(v, o, dh);
          const Tensor& ph = probs[h];

          Tensor dp = t_matmul_nt(dch, vh);          // [s,s]
          Tensor dvh(s, dh);
          t_matmul_tn_acc(dvh, ph, dch);             // P^T . dC
          Tensor ds(s, s);
          t_softmax_backward_acc(ds, ph, dp);
          for (double& e : ds.vec()) {
            e *= att_scale;
          }
          Tensor dqh = t_matmul(ds, kh);
          Tensor dkh(s, dh);
          t_matmul_tn_acc(dkh, ds, qh);              // dS^T . Q
          t_add_cols(dq, o, dqh);
          t_add_cols(dk, o, dkh);
          t_add_cols(dv, o, dvh);
        }

        struct Path {
          Node* w;
          Node* b;
          const Tensor* dproj;
        };
        const Path paths[3] = {{&pwq, &pbq, &dq}, {&pwk, &pbk, &dk}, {&pwv, &pbv, &dv}};
        for (const Path& path : paths) {
          if (path.w->requires_grad) {
            t_matmul_tn_acc(path.w->ensure_grad(), px.value, *path.dproj);
          }
          if (path.b->requires_grad) {
            t_colsum_acc(path.b->ensure_grad(), *path.dproj);
          }
          if (px.requires_grad) {
            t_matmul_nt_acc(px.ensure_grad(), *path.dproj, path.w->value);
          }
        }
      });
}

Var mlp_forward(const Var& x, const MlpParams& p) {
  return affine(gelu(affine(x, p.w1, p.b1)), p.w2, p.b2);
}

void backward(const Var& loss) {
  if (!loss) {
    fail("backward: null loss");
  }
  if (loss->value.size() != 1) {
    fail("backward: loss must be scalar (1x1), got " + loss->value.shape_str());
  }
  if (!loss->requires_grad) {
    return;  // nothing trainable is reachable
  }

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    bool descended = false;
    while (i < n->parents.size()) {
      Node* parent = n->parents[i++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
        descended = true;
        break;
      }
    }
    if (!descended) {
      order.push_back(n);
      stack.pop_back();
    }
  }

  loss->ensure_grad().vec()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) {
      n->backward_fn(*n);
    }
  }
}

Var ParamRegistry::add(const std::string& name, Tensor init) {
  for (const ParamEntry& e : entries_) {
    if (e.name == name) {
      fail("ParamRegistry: duplicate name '" + name + "'");
    }
  }
  Var v = make_param(std::move(init));
  entries_.push_back({name, v});
  return v;
}

Var ParamRegistry::add_constant(const std::string& name, Tensor init) {
  for (const ParamEntry& e : entries_) {
    if (e.name == name) {
      fail("ParamRegistry: duplicate name '" + name + "'");
    }
  }
  Var v = make_constant(std::move(init));
  entries_.push_back({name, v});
  return v;
}

const Var& ParamRegistry::find(const std::string& name) const {
  for (const ParamEntry& e : entries_) {
    if (e.name == name) {
      return e.var;
    }
  }
  throw std::invalid_argument("ParamRegistry: no parameter named '" + name + "'");
}

void ParamRegistry::zero_grads() {
  for (ParamEntry& e : entries_) {
    e.var->zero_grad();
  }
}

std::size_t ParamRegistry::total_scalars() const {
  std::size_t n = 0;
  for (const ParamEntry& e : entries_) {
    n += e.var->value.size();
  }
  return n;
}

double grad_check(const std::function<Var()>& make_loss, const std::vector<ParamEntry>& params,
                  double eps, double floor) {
  for (const ParamEntry& e : params) {
    e.var->zero_grad();
  }
  Var loss = make_loss();
  backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamEntry& e : params) {
    if (e.var->grad.empty()) {
      analytic.emplace_back(e.var->value.rows(), e.var->value.cols());
    } else {
      analytic.push_back(e.var->grad);
    }
  }

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<double>& vals = params[pi].var->value.vec();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + eps;
      const double fp = make_loss()->value.item();
      vals[i] = orig - eps;
      const double fm = make_loss()->value.item();
      vals[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi].vec()[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
      max_err = std::max(max_err, std::fabs(a - numeric) / denom);
    }
  }
  return max_err;
}

}  // namespace svla
