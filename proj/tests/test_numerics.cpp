#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "roar/numerics/checkpoint.hpp"
#include "roar/numerics/grad_check.hpp"
#include "roar/numerics/ops.hpp"
#include "roar/numerics/rng.hpp"
#include "test_support.hpp"

using namespace roar;
using roar::testing::random_tensor;

namespace {

Tensor eval(const Tensor& x, Var (*op)(Var)) {
  Tape tape;
  return op(tape.constant(x)).value();
}

Var softmax_op(Var x) { return ops::softmax(x); }
Var layer_norm_op(Var x) { return ops::layer_norm(x); }

}  // namespace

TEST_CASE("matmul: identity and hand-computed product") {
  Tape tape;
  const Tensor a = random_tensor({3, 3}, 1);
  CHECK(ops::matmul(tape.constant(Tensor::identity(3)), tape.constant(a)).value() == a);
  const Tensor c = ops::matmul(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})), tape.constant(Tensor::matrix({{1}, {1}}))).value();
  CHECK(c == Tensor::matrix({{3}, {7}}));
}

TEST_CASE("matmul: shape mismatch throws") {
  Tape tape;
  CHECK_THROWS_AS(ops::matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))), ShapeError);
}

TEST_CASE("matmul: gradient matches central differences on 5x7 * 7x3") {
  const auto report = grad_check(
      [](Tape&, std::span<const Var> p) {
        return ops::sum(ops::mul(ops::matmul(p[0], p[1]), ops::matmul(p[0], p[1])));
      },
      {random_tensor({5, 7}, 2), random_tensor({7, 3}, 3)}, 1e-5);
  for (std::size_t p = 0; p < 2; ++p) CHECK(max_abs_diff(report.analytic[p], report.numeric[p]) < 1e-6);
}

TEST_CASE("softmax: symmetric, stable, and matches long-double evaluation") {
  CHECK(eval(Tensor::vector({0, 0}), softmax_op) == Tensor::vector({0.5, 0.5}));
  const Tensor big = eval(Tensor::vector({1000, 1000, 1000}), softmax_op);
  for (double v : big.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Tensor y = eval(Tensor::vector({1, 2, 3}), softmax_op);
  long double z = 0;
  for (int i = 1; i <= 3; ++i) z += std::exp(static_cast<long double>(i));
  for (int i = 0; i < 3; ++i) {
    const double ref = static_cast<double>(std::exp(static_cast<long double>(i + 1)) / z);
    CHECK(std::abs(y[i] - ref) <= 1e-12 * ref);
  }
}

TEST_CASE("softmax: rows sum to one and are shift invariant") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Tensor x = random_tensor({4, 6}, seed, -20, 20);
    Tensor shifted = x;
    const double c = 37.5 * static_cast<double>(seed % 7) - 100.0;
    for (double& v : shifted.data()) v += c;
    const Tensor y = eval(x, softmax_op);
    const Tensor ys = eval(shifted, softmax_op);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (double v : y.row(r)) s += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    CHECK(max_abs_diff(y, ys) < 1e-12);
  }
}

TEST_CASE("layer_norm: degenerate rows and direct formula") {
  CHECK(max_abs_diff(eval(Tensor::matrix({{2.5, 2.5, 2.5}}), layer_norm_op), Tensor({1, 3})) == 0.0);
  const Tensor pm = eval(Tensor::vector({1, -1}), layer_norm_op);
  CHECK(pm[0] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  CHECK(pm[1] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));

  const Tensor x = random_tensor({1, 9}, 11, -3, 3);
  const Tensor gain = random_tensor({9}, 12);
  const Tensor bias = random_tensor({9}, 13);
  Tape tape;
  const Tensor y = ops::layer_norm(tape.constant(x), tape.constant(gain), tape.constant(bias)).value();
  double mu = 0, var = 0;
  for (double v : x.data()) mu += v / 9.0;
  for (double v : x.data()) var += (v - mu) * (v - mu) / 9.0;
  for (std::size_t j = 0; j < 9; ++j) {
    const double ref = (x[j] - mu) / std::sqrt(var + 1e-5) * gain[j] + bias[j];
    CHECK(std::abs(y[j] - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("rms_norm: ones, zeros and direct formula") {
  Tape tape;
  const Var g = tape.constant(Tensor({5}, 1.0));
  const Tensor ones = ops::rms_norm(tape.constant(Tensor({5}, 1.0)), g).value();
  for (double v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  const Tensor zeros = ops::rms_norm(tape.constant(Tensor({5}, 0.0)), g).value();
  for (double v : zeros.data()) CHECK(v == 0.0);

  const Tensor x = random_tensor({7}, 21, -2, 2);
  const Tensor gain = random_tensor({7}, 22);
  const Tensor y = ops::rms_norm(tape.constant(x), tape.constant(gain)).value();
  double ms = 0;
  for (double v : x.data()) ms += v * v / 7.0;
  for (std::size_t j = 0; j < 7; ++j) {
    const double ref = x[j] / std::sqrt(ms + 1e-6) * gain[j];
    CHECK(std::abs(y[j] - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("norms are scale invariant away from epsilon") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = random_tensor({3, 8}, seed, -5, 5);
    Tensor scaled = x;
    for (double& v : scaled.data()) v *= 7.25;
    Tape tape;
    const Var gain = tape.constant(Tensor({8}, 1.0));
    CHECK(max_abs_diff(ops::layer_norm(tape.constant(x)).value(), ops::layer_norm(tape.constant(scaled)).value()) < 1e-5);
    CHECK(max_abs_diff(ops::rms_norm(tape.constant(x), gain).value(), ops::rms_norm(tape.constant(scaled), gain).value()) <
          1e-6);
  }
  // With the epsilon contribution negligible the match tightens to 1e-8.
  const Tensor x = random_tensor({2, 8}, 99, 100, 200);
  Tensor scaled = x;
  for (double& v : scaled.data()) v *= 3.0;
  Tape tape;
  const Var gain = tape.constant(Tensor({8}, 1.0));
  CHECK(max_abs_diff(ops::rms_norm(tape.constant(x), gain).value(), ops::rms_norm(tape.constant(scaled), gain).value()) <
        1e-8);
}

TEST_CASE("grad_check: simple functions") {
  const auto sq = grad_check([](Tape&, std::span<const Var> p) { return ops::sum(ops::mul(p[0], p[0])); },
                             {Tensor::vector({3.0})});
  CHECK(sq.analytic[0][0] == doctest::Approx(6.0));
  CHECK(sq.numeric[0][0] == doctest::Approx(6.0).epsilon(1e-8));
  CHECK(sq.worst() < 1e-8);

  const auto flat = grad_check([](Tape&, std::span<const Var> p) { return ops::sum(ops::softmax(p[0])); },
                               {random_tensor({2, 4}, 5)});
  for (double v : flat.analytic[0].data()) CHECK(std::abs(v) < 1e-12);
  CHECK(flat.worst() < 1e-4);

  CHECK_THROWS_AS(grad_check([](Tape&, std::span<const Var> p) { return ops::sum(p[0]); }, {Tensor::vector({1})}, 1e-2),
                  std::invalid_argument);
  CHECK_THROWS_AS(grad_check(
                      [](Tape& t, std::span<const Var> p) {
                        return ops::sum(ops::mul(p[0], t.constant(Tensor::vector({INFINITY}))));
                      },
                      {Tensor::vector({1})}),
                  std::domain_error);
}

namespace {

// One entry per primitive: builds a scalar from random inputs so that every
// input receives a non-trivial gradient.
struct PrimitiveCase {
  const char* name;
  std::vector<Shape> shapes;
  std::function<Var(Tape&, std::span<const Var>)> fn;
};

Var weighted(Tape& t, Var x, std::uint64_t seed) {
  return ops::sum(ops::mul(x, t.constant(random_tensor(x.shape(), seed + 1000))));
}

std::vector<PrimitiveCase> primitive_cases() {
  const std::vector<std::size_t> rows = {2, 0, 2, 1};
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::matmul(p[0], p[1]), 1); }},
      {"linear", {{3, 4}, {5, 4}, {5}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::linear(p[0], p[1], p[2]), 2); }},
      {"add/sub", {{2, 3}, {2, 3}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::sub(ops::add(p[0], p[1]), ops::scale(p[1], 0.3)), 3); }},
      {"mul", {{2, 3}, {2, 3}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::mul(p[0], p[1]), 4); }},
      {"add_row/mul_row", {{3, 4}, {4}, {4}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::add_row(ops::mul_row(p[0], p[1]), p[2]), 5); }},
      {"mul_col", {{3, 4}, {3}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::mul_col(p[0], p[1]), 6); }},
      {"softmax", {{3, 5}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::softmax(p[0]), 7); }},
      {"layer_norm", {{3, 6}, {6}, {6}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::layer_norm(p[0], p[1], p[2]), 8); }},
      {"rms_norm", {{3, 6}, {6}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::rms_norm(p[0], p[1]), 9); }},
      {"silu", {{2, 5}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::silu(p[0]), 10); }},
      {"reshape/slice", {{2, 6}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::slice_cols(ops::reshape(p[0], {4, 3}), 1, 2), 11); }},
      {"gather/scatter", {{3, 4}},
       [rows](Tape& t, std::span<const Var> p) {
         return weighted(t, ops::scatter_rows(ops::gather_rows(p[0], rows), std::vector<std::size_t>{4, 0, 2, 1}, 5), 12);
       }},
      {"concat/segment_mean", {{2, 3}, {4, 3}},
       [](Tape& t, std::span<const Var> p) {
         const Var parts[] = {p[0], p[1]};
         return weighted(t, ops::segment_mean(ops::concat_rows(parts), 3), 13);
       }},
      {"pick", {{3, 4}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::pick(p[0], std::vector<std::size_t>{3, 0, 2}), 14); }},
      {"head_dots", {{3, 6}, {2, 6}}, [](Tape& t, std::span<const Var> p) { return weighted(t, ops::head_dots(p[0], p[1], 2), 15); }},
      {"attention", {{3, 8}, {5, 8}, {5, 8}},
       [](Tape& t, std::span<const Var> p) { return weighted(t, ops::attention(p[0], p[1], p[2], 2), 16); }},
      {"segmented attention", {{4, 8}, {6, 8}, {6, 8}},
       [](Tape& t, std::span<const Var> p) {
         return weighted(t, ops::attention(p[0], p[1], p[2], 2, std::vector<std::size_t>{2, 0, 1, 2}, 2), 17);
       }},
      {"straight_through", {{2, 3}},
       [](Tape& t, std::span<const Var> p) {
         const Var s = ops::softmax(p[0]);
         // Forward value equal to the soft value keeps finite differences meaningful.
         return weighted(t, ops::straight_through(s, s.value()), 18);
       }},
      {"mse/mean", {{2, 3}, {2, 3}},
       [](Tape&, std::span<const Var> p) { return ops::add(ops::mse(p[0], p[1]), ops::mean(ops::mul(p[0], p[0]))); }},
  };
}

}  // namespace

TEST_CASE("every primitive matches central differences over 100 seeds") {
  for (const auto& c : primitive_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::vector<Tensor> theta;
      for (std::size_t i = 0; i < c.shapes.size(); ++i) theta.push_back(random_tensor(c.shapes[i], seed * 31 + i, -1.5, 1.5));
      worst = std::max(worst, grad_check(c.fn, theta, 1e-5).worst());
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward is bit-deterministic") {
  auto run = [] {
    const auto cases = primitive_cases();
    std::vector<Tensor> grads;
    for (const auto& c : cases) {
      Tape tape;
      std::vector<Var> vars;
      for (std::size_t i = 0; i < c.shapes.size(); ++i) vars.push_back(tape.leaf(random_tensor(c.shapes[i], 77 + i)));
      tape.backward(c.fn(tape, vars));
      for (const Var& v : vars) grads.push_back(tape.grad(v));
    }
    return grads;
  };
  CHECK(run() == run());
}

TEST_CASE("attention probe counts keys per query") {
  Tape tape;
  ops::AttentionProbe probe;
  const Var q = tape.constant(random_tensor({5, 4}, 1));
  const Var kv = tape.constant(random_tensor({12, 4}, 2));
  ops::attention(q, kv, kv, 2, std::vector<std::size_t>{0, 1, 2, 2, 0}, 4, &probe);
  CHECK(probe.queries == 5);
  CHECK(probe.min_keys == 4);
  CHECK(probe.max_keys == 4);
  CHECK_THROWS_AS(ops::attention(q, kv, kv, 2, std::vector<std::size_t>{0, 1, 3, 2, 0}, 4), ShapeError);
}

TEST_CASE("parameters accumulate into their sink") {
  const Tensor w = random_tensor({2, 3}, 4);
  Tensor sink({2, 3});
  Tape tape;
  const Var p = tape.parameter(w, &sink);
  const Var p2 = tape.parameter(w, &sink);
  tape.backward(ops::add(ops::sum(p), ops::sum(p2)));
  for (double v : sink.data()) CHECK(v == 2.0);
}

TEST_CASE("checkpoint round trip and corruption") {
  NamedTensors t;
  t["a.weight"] = random_tensor({3, 4}, 1);
  t["b"] = Tensor::scalar(2.5);
  t["c"] = Tensor({0, 4});
  std::stringstream buf;
  write_tensors(buf, t);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "ROAR");
  std::stringstream in(bytes);
  CHECK(read_tensors(in) == t);

  std::stringstream bad(std::string("RAOR") + bytes.substr(4));
  CHECK_THROWS_AS(read_tensors(bad), CheckpointError);
  std::stringstream trunc(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensors(trunc), CheckpointError);
}

TEST_CASE("random streams are pure functions of key and index") {
  const RandomStream a(42, "noise");
  const RandomStream b(42, "noise");
  const RandomStream c(42, "gumbel");
  CHECK(a.bits(7) == b.bits(7));
  CHECK(a.bits(7) != c.bits(7));
  CHECK(a.derive(3).bits(0) != a.derive(4).bits(0));
  double mean = 0, var = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = a.uniform(static_cast<std::uint64_t>(i));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u / n;
    const double z = a.normal(static_cast<std::uint64_t>(i));
    var += z * z / n;
  }
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
