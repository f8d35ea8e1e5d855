#pragma once

// Independent naive oracles for the numeric primitives. Everything here is
// written as plain elementwise loops against the published formulas, on
// purpose sharing no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "svla/autograd.hpp"
#include "svla/rng.hpp"
#include "svla/tensor.hpp"

namespace oracle {

using svla::Rng;
using svla::Tensor;

inline Tensor rand_tensor(int rows, int cols, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(rows, cols);
  for (double& v : t.vec()) {
    v = rng.uniform(lo, hi);
  }
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) {
        acc += a.at(i, k) * b.at(k, j);
      }
      c.at(i, j) = acc;
    }
  }
  return c;
}

inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  for (int i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < y.cols(); ++j) {
      y.at(i, j) += b.at(0, j);
    }
  }
  return y;
}

inline Tensor row_softmax(const Tensor& x) {
  Tensor y(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    double mx = x.at(i, 0);
    for (int j = 1; j < x.cols(); ++j) {
      mx = std::max(mx, x.at(i, j));
    }
    double z = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      z += std::exp(x.at(i, j) - mx);
    }
    for (int j = 0; j < x.cols(); ++j) {
      y.at(i, j) = std::exp(x.at(i, j) - mx) / z;
    }
  }
  return y;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

inline Tensor mlp(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                  const Tensor& b2) {
  Tensor h = affine(x, w1, b1);
  for (double& v : h.vec()) {
    v = gelu(v);
  }
  return affine(h, w2, b2);
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  Tensor y(x.rows(), x.cols());
  const int d = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) {
      mean += x.at(i, j);
    }
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    }
    var /= d;
    for (int j = 0; j < d; ++j) {
      y.at(i, j) = (x.at(i, j) - mean) / std::sqrt(var + eps) * gamma.at(0, j) + beta.at(0, j);
    }
  }
  return y;
}

struct AttnWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

// Per-head loops straight off the definition: scaled dot products, softmax
// over keys, weighted value sum, concat, output projection.
inline Tensor attention(const Tensor& x, const AttnWeights& w, int heads) {
  const int s = x.rows(), d = x.cols(), dh = d / heads;
  const Tensor q = affine(x, w.wq, w.bq);
  const Tensor k = affine(x, w.wk, w.bk);
  const Tensor v = affine(x, w.wv, w.bv);
  Tensor ctx(s, d);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < s; ++i) {
      std::vector<double> scores(s);
      for (int j = 0; j < s; ++j) {
        double dot = 0.0;
        for (int e = 0; e < dh; ++e) {
          dot += q.at(i, h * dh + e) * k.at(j, h * dh + e);
        }
        scores[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double& sc : scores) {
        sc = std::exp(sc - mx);
        z += sc;
      }
      for (int e = 0; e < dh; ++e) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) {
          acc += scores[j] / z * v.at(j, h * dh + e);
        }
        ctx.at(i, h * dh + e) = acc;
      }
    }
  }
  return affine(ctx, w.wo, w.bo);
}

// (1 + gamma) . Attn(x) + beta, the modulated-attention round.
inline Tensor film_attention(const Tensor& x, const AttnWeights& w, int heads,
                             const Tensor& gamma, const Tensor& beta) {
  Tensor y = attention(x, w, heads);
  for (int i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < y.cols(); ++j) {
      y.at(i, j) = (1.0 + gamma.at(0, j)) * y.at(i, j) + beta.at(0, j);
    }
  }
  return y;
}

// Cosine similarity per (visual row, projected instruction row) pair.
inline Tensor cosine_similarity(const Tensor& visual, const Tensor& instr, const Tensor& proj) {
  const int n = visual.rows(), m = instr.rows(), dv = visual.cols();
  Tensor s(n, m);
  for (int j = 0; j < m; ++j) {
    std::vector<double> p(dv, 0.0);
    for (int a = 0; a < dv; ++a) {
      for (int b = 0; b < instr.cols(); ++b) {
        p[a] += proj.at(a, b) * instr.at(j, b);
      }
    }
    double pn = 0.0;
    for (double v : p) {
      pn += v * v;
    }
    pn = std::sqrt(pn);
    for (int i = 0; i < n; ++i) {
      double dot = 0.0, vn = 0.0;
      for (int a = 0; a < dv; ++a) {
        dot += p[a] * visual.at(i, a);
        vn += visual.at(i, a) * visual.at(i, a);
      }
      vn = std::sqrt(vn);
      s.at(i, j) = (pn == 0.0 || vn == 0.0) ? 0.0 : dot / (pn * vn);
    }
  }
  return s;
}

// Repeated strict-max scan; lower index wins ties by scan order.
inline std::vector<int> top_k_scan(std::vector<double> scores, int k) {
  std::vector<int> out;
  std::vector<bool> used(scores.size(), false);
  for (int round = 0; round < k; ++round) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
      if (!used[i] && (best < 0 || scores[i] > scores[best])) {
        best = i;
      }
    }
    used[best] = true;
    out.push_back(best);
  }
  return out;
}

inline svla::AttentionParams to_params(const AttnWeights& w) {
  svla::AttentionParams p;
  p.wq = svla::make_param(w.wq);
  p.bq = svla::make_param(w.bq);
  p.wk = svla::make_param(w.wk);
  p.bk = svla::make_param(w.bk);
  p.wv = svla::make_param(w.wv);
  p.bv = svla::make_param(w.bv);
  p.wo = svla::make_param(w.wo);
  p.bo = svla::make_param(w.bo);
  return p;
}

inline AttnWeights rand_attn(int d, Rng& rng, double span = 0.5) {
  AttnWeights w;
  w.wq = rand_tensor(d, d, rng, -span, span);
  w.bq = rand_tensor(1, d, rng, -span, span);
  w.wk = rand_tensor(d, d, rng, -span, span);
  w.bk = rand_tensor(1, d, rng, -span, span);
  w.wv = rand_tensor(d, d, rng, -span, span);
  w.bv = rand_tensor(1, d, rng, -span, span);
  w.wo = rand_tensor(d, d, rng, -span, span);
  w.bo = rand_tensor(1, d, rng, -span, span);
  return w;
}

}  // namespace oracle
