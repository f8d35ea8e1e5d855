#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svla/autograd.hpp"
#include "svla/rng.hpp"
#include "svla/nn.hpp"
#include "svla/svt.hpp"
#include "test_support.hpp"

using namespace svla;

TEST_CASE("rng: identical seed gives identical stream") {
  Rng a(123456789), b(123456789);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(1), d(2);
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("rng: uniform in [0,1) and gaussian roughly standard") {
  Rng rng(7);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
  }
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(std::fabs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("tensor: shape and data invariants") {
  Tensor t(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor(2, 2, {1.0}), std::invalid_argument);
  CHECK(t.all_finite());
  CHECK(Tensor::scalar(4.5).item() == 4.5);
}

TEST_CASE("matmul: identity and zero cases") {
  Var a = make_constant(Tensor(2, 2, {1, 2, 3, 4}));
  Var eye = make_constant(Tensor::identity(2));
  CHECK(max_abs_diff(val(matmul(a, eye)), val(a)) == 0.0);

  Var z = make_constant(Tensor(2, 5));
  CHECK(val(matmul(a, slice_cols(z, 0, 2))).max_abs() == 0.0);
  CHECK_THROWS_AS(matmul(a, make_constant(Tensor(3, 2))), std::invalid_argument);
}

TEST_CASE("matmul: random case matches triple-loop oracle to 1e-12") {
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    const Tensor a = oracle::rand_tensor(5, 4, rng);
    const Tensor b = oracle::rand_tensor(4, 3, rng);
    const Tensor got = val(matmul(make_constant(a), make_constant(b)));
    CHECK(max_abs_diff(got, oracle::matmul(a, b)) <= 1e-12);
  }
}

TEST_CASE("row_softmax: closed-form and invariance properties") {
  // equal values -> uniform
  Var u = make_constant(Tensor::full(2, 5, 3.7));
  const Tensor uniform = val(row_softmax(u));
  for (double v : uniform.vec()) {
    CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
  // single column -> 1
  CHECK(val(row_softmax(make_constant(Tensor(3, 1)))).max_abs() == 1.0);
  // [0, ln 2] -> [1/3, 2/3]
  const Tensor r = val(row_softmax(make_constant(Tensor(1, 2, {0.0, std::log(2.0)}))));
  CHECK(std::fabs(r.at(0, 0) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::fabs(r.at(0, 1) - 2.0 / 3.0) <= 1e-12);

  Rng rng(5);
  const Tensor x = oracle::rand_tensor(6, 7, rng);
  const Tensor y = val(row_softmax(make_constant(x)));
  for (int i = 0; i < y.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < y.cols(); ++j) {
      s += y.at(i, j);
    }
    CHECK(std::fabs(s - 1.0) <= 1e-9);
  }
  // per-row constant shift leaves the result unchanged
  Tensor shifted = x;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      shifted.at(i, j) += 17.25;
    }
  }
  CHECK(max_abs_diff(val(row_softmax(make_constant(shifted))), y) <= 1e-9);
}

TEST_CASE("attention: single token reduces to value+output projection") {
  Rng rng(21);
  const oracle::AttnWeights w = oracle::rand_attn(8, rng);
  const Tensor x = oracle::rand_tensor(1, 8, rng);
  const AttentionParams p = oracle::to_params(w);
  const Tensor got = val(multi_head_attention(make_constant(x), p, 2));
  const Tensor want = oracle::affine(oracle::affine(x, w.wv, w.bv), w.wo, w.bo);
  CHECK(max_abs_diff(got, want) <= 1e-12);
}

TEST_CASE("attention: permuting rows permutes outputs") {
  Rng rng(22);
  const oracle::AttnWeights w = oracle::rand_attn(8, rng);
  const AttentionParams p = oracle::to_params(w);
  const Tensor x = oracle::rand_tensor(6, 8, rng);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Tensor xp(6, 8);
  for (int i = 0; i < 6; ++i) {
    std::copy_n(x.row_ptr(perm[i]), 8, xp.row_ptr(i));
  }
  const Tensor y = val(multi_head_attention(make_constant(x), p, 2));
  const Tensor yp = val(multi_head_attention(make_constant(xp), p, 2));
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(std::fabs(yp.at(i, j) - y.at(perm[i], j)) <= 1e-12);
    }
  }
}

TEST_CASE("attention: random case matches per-head naive oracle to 1e-10") {
  Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    const oracle::AttnWeights w = oracle::rand_attn(8, rng);
    const Tensor x = oracle::rand_tensor(6, 8, rng);
    const Tensor got = val(multi_head_attention(make_constant(x), oracle::to_params(w), 2));
    CHECK(max_abs_diff(got, oracle::attention(x, w, 2)) <= 1e-10);
  }
  CHECK_THROWS_AS(
      multi_head_attention(make_constant(Tensor(2, 8)), oracle::to_params(oracle::rand_attn(8, rng)), 3),
      std::invalid_argument);
}

TEST_CASE("mlp: zero and bias-only cases, oracle match") {
  Rng rng(31);
  MlpParams zero;
  zero.w1 = make_constant(Tensor(4, 8));
  zero.b1 = make_constant(Tensor(1, 8));
  zero.w2 = make_constant(Tensor(8, 3));
  zero.b2 = make_constant(Tensor(1, 3));
  const Tensor x = oracle::rand_tensor(5, 4, rng);
  CHECK(val(mlp_forward(make_constant(x), zero)).max_abs() == 0.0);

  // x = 0 with zero first bias: GELU(0) = 0, so only the output bias remains.
  MlpParams p;
  p.w1 = make_constant(oracle::rand_tensor(4, 8, rng));
  p.b1 = make_constant(Tensor(1, 8));
  p.w2 = make_constant(oracle::rand_tensor(8, 3, rng));
  p.b2 = make_constant(oracle::rand_tensor(1, 3, rng));
  const Tensor at_zero = val(mlp_forward(make_constant(Tensor(5, 4)), p));
  for (int i = 0; i < at_zero.rows(); ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(at_zero.at(i, j) == doctest::Approx(val(p.b2).at(0, j)).epsilon(1e-15));
    }
  }

  MlpParams q;
  q.w1 = make_constant(oracle::rand_tensor(4, 8, rng));
  q.b1 = make_constant(oracle::rand_tensor(1, 8, rng));
  q.w2 = make_constant(oracle::rand_tensor(8, 3, rng));
  q.b2 = make_constant(oracle::rand_tensor(1, 3, rng));
  const Tensor got = val(mlp_forward(make_constant(x), q));
  const Tensor want = oracle::mlp(x, val(q.w1), val(q.b1), val(q.w2), val(q.b2));
  CHECK(max_abs_diff(got, want) <= 1e-10);
}

TEST_CASE("layer_norm matches naive oracle") {
  Rng rng(41);
  const Tensor x = oracle::rand_tensor(5, 6, rng);
  const Tensor g = oracle::rand_tensor(1, 6, rng);
  const Tensor b = oracle::rand_tensor(1, 6, rng);
  const Tensor got =
      val(layer_norm(make_constant(x), make_constant(g), make_constant(b)));
  CHECK(max_abs_diff(got, oracle::layer_norm(x, g, b)) <= 1e-12);
}

TEST_CASE("backward: sum gives all-ones grad; mean of squares analytic") {
  Var x = make_param(Tensor(3, 4, std::vector<double>(12, 0.5)));
  backward(sum_all(x));
  for (double v : x->grad.vec()) {
    CHECK(v == 1.0);
  }

  Var y = make_param(Tensor::scalar(3.0));
  backward(mean_all(mul(y, y)));
  CHECK(y->grad.item() == doctest::Approx(6.0).epsilon(1e-12));

  CHECK_THROWS_AS(backward(make_param(Tensor(2, 2))), std::invalid_argument);
}

TEST_CASE("backward: unreachable params stay untouched") {
  Var used = make_param(Tensor::scalar(2.0));
  Var unused = make_param(Tensor::scalar(5.0));
  backward(mul(used, used));
  CHECK(used->grad.item() == doctest::Approx(4.0));
  CHECK(unused->grad.empty());
}

TEST_CASE("grad_check: analytic square, constant, attention layer") {
  Var x = make_param(Tensor::scalar(3.0));
  const double err = grad_check([&] { return mul(x, x); }, {{"x", x}});
  CHECK(err <= 1e-7);

  Var c = make_param(Tensor::scalar(1.0));
  const double cerr = grad_check([&] { return make_constant(Tensor::scalar(2.0)); }, {{"c", c}});
  CHECK(cerr == 0.0);

  Rng rng(51);
  ParamRegistry reg;
  AttentionParams p = make_attention_params(reg, "attn", 8, rng);
  const Tensor x48 = oracle::rand_tensor(4, 8, rng);
  const Tensor target = oracle::rand_tensor(4, 8, rng);
  const double aerr = grad_check(
      [&] {
        return mse(multi_head_attention(make_constant(x48), p, 2), make_constant(target));
      },
      reg.entries());
  CHECK(aerr <= 1e-4);
}

TEST_CASE("grad_check: every primitive over 20+ random shapes") {
  Rng rng(61);
  int shapes_tested = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const int s = 1 + static_cast<int>(rng.below(4));
    const int d = 2 + static_cast<int>(rng.below(5));
    ++shapes_tested;

    Var a = make_param(oracle::rand_tensor(s, d, rng));
    Var b = make_param(oracle::rand_tensor(s, d, rng));
    Var w = make_param(oracle::rand_tensor(d, 3, rng));
    Var bias = make_param(oracle::rand_tensor(1, 3, rng));
    Var row = make_param(oracle::rand_tensor(1, d, rng));
    Var g = make_param(oracle::rand_tensor(1, d, rng, 0.5, 1.5));
    Var bb = make_param(oracle::rand_tensor(1, d, rng));
    const Tensor tgt_sd = oracle::rand_tensor(s, d, rng);
    const Tensor tgt_s3 = oracle::rand_tensor(s, 3, rng);

    auto check = [&](const char* name, const std::function<Var()>& f,
                     std::vector<ParamEntry> params) {
      const double err = grad_check(f, params);
      INFO(name << " shape " << s << "x" << d);
      CHECK(err <= 1e-4);
    };

    check("matmul+affine", [&] { return mse(affine(a, w, bias), make_constant(tgt_s3)); },
          {{"a", a}, {"w", w}, {"bias", bias}});
    check("add/mul/scale", [&] {
      return mean_all(mul(add(a, b), scale(sub(a, b), 1.7)));
    }, {{"a", a}, {"b", b}});
    check("rowvec ops", [&] {
      return mean_all(add_rowvec(mul_rowvec(a, row), row));
    }, {{"a", a}, {"row", row}});
    check("softmax", [&] { return mse(row_softmax(a), make_constant(tgt_sd)); }, {{"a", a}});
    check("gelu", [&] { return mse(gelu(a), make_constant(tgt_sd)); }, {{"a", a}});
    check("layer_norm", [&] {
      return mse(layer_norm(a, g, bb), make_constant(tgt_sd));
    }, {{"a", a}, {"g", g}, {"bb", bb}});
    check("normalize", [&] { return mse(row_l2_normalize(a), make_constant(tgt_sd)); },
          {{"a", a}});
    check("concat+slice+gather", [&] {
      Var cat = concat_rows({a, b});
      Var sl = slice_rows(cat, 0, s);
      Var gathered = gather_rows(concat_cols(sl, b), {0, s - 1, 0});
      return mean_all(mul(gathered, gathered));
    }, {{"a", a}, {"b", b}});
    check("transpose+mean", [&] {
      return mean_all(add(mean_rows(transpose(a)), mean_rows(transpose(a))));
    }, {{"a", a}});
    check("slice_cols", [&] {
      return mean_all(mul(slice_cols(a, 0, d / 2 + 1), slice_cols(a, 0, d / 2 + 1)));
    }, {{"a", a}});
  }
  CHECK(shapes_tested >= 20);
}

TEST_CASE("forward primitives keep finite outputs on finite inputs") {
  Rng rng(71);
  const Tensor x = oracle::rand_tensor(6, 8, rng);
  const oracle::AttnWeights w = oracle::rand_attn(8, rng);
  CHECK(val(multi_head_attention(make_constant(x), oracle::to_params(w), 2)).all_finite());
  CHECK(val(row_softmax(make_constant(x))).all_finite());
  CHECK(val(gelu(make_constant(x))).all_finite());
}

TEST_CASE("svt: write/read round trip is exact") {
  svt::Writer w;
  w.add_f64("a/values", {2, 3}, {1.5, -2.25, 0.0, 1e-300, 3.14159, -0.5});
  w.add_u32("a/ids", {4}, {0, 7, 42, 4294967295u});
  w.add_u8("a/mask", {3}, {0, 1, 255});

  const svt::File f = svt::parse(w.bytes());
  CHECK(f.records.size() == 3);
  CHECK(f.get("a/values").as_f64()[3] == 1e-300);
  CHECK(f.get("a/ids").as_u32()[3] == 4294967295u);
  CHECK(f.get("a/mask").as_u8()[2] == 255);
  CHECK(f.get("a/values").extents == std::vector<std::uint64_t>{2, 3});
  CHECK(f.find("missing") == nullptr);
  CHECK_THROWS_AS(f.get("missing"), svt::ParseError);
}

TEST_CASE("svt: typed parse errors") {
  svt::Writer w;
  w.add_u32("x", {2}, {1, 2});
  std::vector<std::uint8_t> bytes = w.bytes();

  // corrupted magic
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  try {
    svt::parse(bad);
    FAIL("expected bad_magic");
  } catch (const svt::ParseError& e) {
    CHECK(e.kind() == svt::ParseError::Kind::bad_magic);
  }

  // unsupported version
  std::vector<std::uint8_t> v2 = bytes;
  v2[4] = 2;
  try {
    svt::parse(v2);
    FAIL("expected unsupported_version");
  } catch (const svt::ParseError& e) {
    CHECK(e.kind() == svt::ParseError::Kind::unsupported_version);
  }

  // truncated payload
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
  try {
    svt::parse(cut);
    FAIL("expected truncated");
  } catch (const svt::ParseError& e) {
    CHECK(e.kind() == svt::ParseError::Kind::truncated);
  }
}

TEST_CASE("zero-norm guard: zero rows give zero similarity entries") {
  int guard = 0;
  Tensor x(3, 4);
  x.at(0, 0) = 1.0;  // rows 1 and 2 are zero
  const Tensor y = val(row_l2_normalize(make_param(x), &guard));
  CHECK(guard == 2);
  CHECK(y.at(0, 0) == 1.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(y.at(1, j) == 0.0);
    CHECK(y.at(2, j) == 0.0);
  }
}
