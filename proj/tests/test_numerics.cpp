#include <doctest.h>

#include <cmath>

#include "sdmtl/gradcheck.hpp"
#include "sdmtl/ops.hpp"
#include "sdmtl/rng.hpp"
#include "test_helpers.hpp"

using namespace sdmtl;
using test::max_abs_diff;
using test::uniform_tensor;

namespace {

// Independent oracle: the convolution definition as plain nested loops.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Shape4 xs = x.shape();
  const Shape4 ws = w.shape();
  const int k = ws.j;
  const int pad = (k - 1) / 2;
  Tensor out({xs.b, ws.b, xs.j, xs.d});
  for (int bi = 0; bi < xs.b; ++bi)
    for (int oc = 0; oc < ws.b; ++oc)
      for (int y = 0; y < xs.j; ++y)
        for (int d = 0; d < xs.d; ++d) {
          double acc = b[oc];
          for (int ic = 0; ic < xs.c; ++ic)
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx) {
                const int sy = y + dy - pad;
                const int sx = d + dx - pad;
                if (sy < 0 || sy >= xs.j || sx < 0 || sx >= xs.d) continue;
                acc += static_cast<double>(x.at(bi, ic, sy, sx)) * w.at(oc, ic, dy, dx);
              }
          out.at(bi, oc, y, d) = static_cast<float>(acc);
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d identity through a unit 1x1 kernel") {
  Tape tape;
  Tensor x = uniform_tensor({2, 1, 4, 3}, 7, "x");
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0f);
  Tensor b = Tensor::zeros({1, 1, 1, 1});
  Value y = conv2d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  CHECK(tape.value(y) == x);
}

TEST_CASE("conv2d on zero input reproduces the bias per channel") {
  Tape tape;
  Tensor x = Tensor::zeros({1, 2, 5, 3});
  Tensor w = uniform_tensor({3, 2, 3, 3}, 3, "w");
  Tensor b({3, 1, 1, 1}, {0.5f, -1.25f, 2.0f});
  Value y = conv2d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  const Tensor& out = tape.value(y);
  for (int oc = 0; oc < 3; ++oc)
    for (int j = 0; j < 5; ++j)
      for (int d = 0; d < 3; ++d) CHECK(out.at(0, oc, j, d) == b[oc]);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Tensor x = uniform_tensor({2, 3, 4, 3}, 11, "x");
  Tensor w = uniform_tensor({5, 3, 3, 3}, 11, "w");
  Tensor b = uniform_tensor({5, 1, 1, 1}, 11, "b");
  Tape tape;
  Value y = conv2d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  CHECK(max_abs_diff(tape.value(y), conv2d_oracle(x, w, b)) < 1e-5);
}

TEST_CASE("conv2d same padding preserves spatial dims for all odd k") {
  for (int k : {1, 3, 5, 7}) {
    Tensor x = uniform_tensor({1, 2, 6, 3}, 5, "x" + std::to_string(k));
    Tensor w = uniform_tensor({4, 2, k, k}, 5, "w" + std::to_string(k));
    Tensor b = Tensor::zeros({4, 1, 1, 1});
    Tape tape;
    Value y = conv2d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
    CHECK(tape.value(y).shape() == Shape4{1, 4, 6, 3});
    CHECK(max_abs_diff(tape.value(y), conv2d_oracle(x, w, b)) < 1e-5);
  }
}

TEST_CASE("conv2d rejects mismatched channels naming both shapes") {
  Tape tape;
  Value x = tape.leaf(Tensor::zeros({1, 3, 4, 3}));
  Value w = tape.leaf(Tensor::zeros({2, 4, 3, 3}));
  Value b = tape.leaf(Tensor::zeros({2, 1, 1, 1}));
  try {
    conv2d(tape, x, w, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1,3,4,3)") != std::string::npos);
    CHECK(msg.find("(2,4,3,3)") != std::string::npos);
  }
}

TEST_CASE("leaky_relu values") {
  Tape tape;
  Tensor x({1, 1, 1, 3}, {2.0f, -1.0f, 0.0f});
  Value y = leaky_relu(tape, tape.leaf(x), 0.2f);
  CHECK(tape.value(y)[0] == 2.0f);
  CHECK(tape.value(y)[1] == doctest::Approx(-0.2f));
  CHECK(tape.value(y)[2] == 0.0f);
}

TEST_CASE("sigmoid at zero is one half and output stays inside (0,1)") {
  Tape tape;
  Tensor x({1, 1, 1, 4}, {0.0f, 80.0f, -80.0f, 3.0f});
  Value y = sigmoid(tape, tape.leaf(x));
  const Tensor& s = tape.value(y);
  CHECK(s[0] == 0.5f);
  for (std::int64_t i = 0; i < s.size(); ++i) {
    CHECK(s[i] > 0.0f);
    CHECK(s[i] < 1.0f);
  }
}

TEST_CASE("sub annihilates equal operands") {
  Tape tape;
  Tensor x = uniform_tensor({2, 3, 4, 3}, 9, "x");
  Value d = sub(tape, tape.leaf(x), tape.leaf(x));
  for (std::int64_t i = 0; i < tape.value(d).size(); ++i) CHECK(tape.value(d)[i] == 0.0f);
}

TEST_CASE("sub then add returns to the original within float rounding") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor a = uniform_tensor({1, 2, 4, 3}, seed, "a");
    Tensor b = uniform_tensor({1, 2, 4, 3}, seed, "b");
    Tape tape;
    Value r = add(tape, sub(tape, tape.leaf(a), tape.leaf(b)), tape.leaf(b));
    CHECK(max_abs_diff(tape.value(r), a) <= 4.0 * 1.19209290e-7);
  }
}

TEST_CASE("concat_channels adds channel counts") {
  Tape tape;
  Value a = tape.leaf(uniform_tensor({1, 64, 5, 3}, 2, "a"));
  Value b = tape.leaf(uniform_tensor({1, 64, 5, 3}, 2, "b"));
  const Value parts[] = {a, b};
  Value c = concat_channels(tape, parts);
  CHECK(tape.value(c).shape() == Shape4{1, 128, 5, 3});
  CHECK(tape.value(c).at(0, 64, 2, 1) == tape.value(b).at(0, 0, 2, 1));
}

TEST_CASE("backward of sum is all ones") {
  Tape tape;
  Value x = tape.leaf(uniform_tensor({2, 2, 3, 3}, 4, "x"));
  tape.backward(sum_all(tape, x));
  const Tensor g = tape.grad(x);
  for (std::int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 1.0f);
}

TEST_CASE("backward of half the squared norm is the input itself") {
  Tape tape;
  Tensor xv = uniform_tensor({1, 2, 4, 3}, 6, "x");
  Value x = tape.leaf(xv);
  tape.backward(scale(tape, sum_all(tape, mul(tape, x, x)), 0.5f));
  CHECK(max_abs_diff(tape.grad(x), xv) < 1e-6);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Value x = tape.leaf(Tensor::zeros({1, 2, 1, 1}));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("parameters unreachable from the loss get zero gradients") {
  Tape tape;
  Value x = tape.leaf(uniform_tensor({1, 1, 2, 3}, 8, "x"));
  Value unused = tape.leaf(uniform_tensor({1, 1, 2, 3}, 8, "unused"));
  tape.backward(sum_all(tape, x));
  const Tensor g = tape.grad(unused);
  CHECK(g.shape() == Shape4{1, 1, 2, 3});
  for (std::int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0f);
}

TEST_CASE("grad_check is exact for a linear functional") {
  Tensor p = uniform_tensor({1, 1, 2, 3}, 3, "p");
  const ParamRef refs[] = {{"p", &p}};
  auto build = [&p](Tape& tape, Binder& bind) { return sum_all(tape, bind(p)); };
  const auto report = grad_check(refs, build, 1e-3, 1, 0);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("grad_check on a single conv2d layer") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor x = uniform_tensor({2, 2, 4, 3}, seed, "x");
    Tensor w = seeded_init({3, 2, 3, 3}, 2 * 9, seed, "w");
    Tensor b = Tensor::zeros({3, 1, 1, 1});
    const ParamRef refs[] = {{"x", &x}, {"w", &w}, {"b", &b}};
    auto build = [&](Tape& tape, Binder& bind) {
      return mean_all(tape, conv2d(tape, bind(x), bind(w), bind(b)));
    };
    const auto report = grad_check(refs, build, 1e-3, seed, 0);
    CHECK(report.max_rel_err < 1e-3);
  }
}

TEST_CASE("grad_check per elementwise op over five seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor a = uniform_tensor({1, 2, 3, 3}, seed, "a");
    Tensor b = uniform_tensor({1, 2, 3, 3}, seed, "b");
    const ParamRef refs[] = {{"a", &a}, {"b", &b}};

    auto check = [&](const LossBuilder& build) {
      CHECK(grad_check(refs, build, 1e-3, seed, 0).max_rel_err < 1e-3);
    };
    check([&](Tape& t, Binder& bi) { return mean_all(t, leaky_relu(t, bi(a), 0.2f)); });
    check([&](Tape& t, Binder& bi) { return mean_all(t, sigmoid(t, bi(a))); });
    check([&](Tape& t, Binder& bi) { return mean_all(t, mul(t, add(t, bi(a), bi(b)), sub(t, bi(a), bi(b)))); });
    check([&](Tape& t, Binder& bi) {
      const Value parts[] = {bi(a), bi(b)};
      return mean_all(t, mul(t, concat_channels(t, parts), concat_channels(t, parts)));
    });
  }
}

TEST_CASE("grad_check through fully_connected and weighted_sum") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Tensor x = uniform_tensor({2, 6, 1, 1}, seed, "x");
    Tensor w = seeded_init({4, 6, 1, 1}, 6, seed, "w");
    Tensor b = Tensor::zeros({4, 1, 1, 1});
    const ParamRef fc_refs[] = {{"x", &x}, {"w", &w}, {"b", &b}};
    auto fc_build = [&](Tape& t, Binder& bi) {
      return mean_all(t, sigmoid(t, fully_connected(t, bi(x), bi(w), bi(b))));
    };
    CHECK(grad_check(fc_refs, fc_build, 1e-3, seed, 0).max_rel_err < 1e-3);

    Tensor f1 = uniform_tensor({2, 3, 2, 3}, seed, "f1");
    Tensor f2 = uniform_tensor({2, 3, 2, 3}, seed, "f2");
    Tensor alpha = uniform_tensor({2, 2, 1, 1}, seed, "alpha", 0.1f, 0.9f);
    const ParamRef ws_refs[] = {{"f1", &f1}, {"f2", &f2}, {"alpha", &alpha}};
    auto ws_build = [&](Tape& t, Binder& bi) {
      const Value feats[] = {bi(f1), bi(f2)};
      return mean_all(t, weighted_sum(t, feats, bi(alpha)));
    };
    CHECK(grad_check(ws_refs, ws_build, 1e-3, seed, 0).max_rel_err < 1e-3);
  }
}

TEST_CASE("forward outputs stay finite on finite inputs") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Tape tape;
    Value x = tape.leaf(uniform_tensor({2, 3, 5, 3}, seed, "x", -100.0f, 100.0f));
    Value w = tape.leaf(seeded_init({3, 3, 3, 3}, 27, seed, "w"));
    Value b = tape.leaf(seeded_init({3, 1, 1, 1}, 3, seed, "b"));
    Value y = sigmoid(tape, leaky_relu(tape, conv2d(tape, x, w, b), 0.2f));
    CHECK(tape.value(y).all_finite());
  }
}

TEST_CASE("seeded_init is deterministic and name-separated") {
  const Tensor a = seeded_init({2, 3, 3, 3}, 27, 42, "layer.w");
  const Tensor b = seeded_init({2, 3, 3, 3}, 27, 42, "layer.w");
  const Tensor c = seeded_init({2, 3, 3, 3}, 27, 42, "other.w");
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("seeded_init variance tracks 2/fan_in") {
  const Tensor t = seeded_init({10, 10, 10, 10}, 100, 5, "stats");
  double mean = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) mean += t[i];
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) var += (t[i] - mean) * (t[i] - mean);
  var /= static_cast<double>(t.size() - 1);
  CHECK(var == doctest::Approx(0.02).epsilon(0.2));
}
