#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "vl/diff/gradcheck.hpp"
#include "vl/diff/graph.hpp"
#include "vl/losses.hpp"
#include "vl/random.hpp"

using namespace vl;
using namespace vl::diff;

namespace {

DenseGrid random_grid(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  DenseGrid g(s);
  for (double& v : g.values()) v = uniform_real(rng, lo, hi);
  return g;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("eval_graph: identity, sigmoid and a 3x3 box filter") {
  {
    Graph g;
    const NodeId x = g.input("x", {1, 1, 1});
    g.set_output("y", x);
    CHECK(eval_graph(g, {{"x", DenseGrid::scalar(5.0)}}).at("y").item() == 5.0);
  }
  {
    Graph g;
    g.set_output("y", g.sigmoid(g.input("x", {1, 1, 1})));
    CHECK(eval_graph(g, {{"x", DenseGrid::scalar(0.0)}}).at("y").item() == 0.5);
  }
  {
    Graph g;
    const NodeId x = g.input("x", {3, 3, 1});
    const NodeId w = g.parameter("w", {3, 3, 1});
    const NodeId b = g.parameter("b", {1, 1, 1});
    g.set_output("y", g.conv2d(x, w, b));
    const auto out = eval_graph(g, {{"x", DenseGrid(3, 3, 1, 1.0)},
                                    {"w", DenseGrid(3, 3, 1, 1.0)},
                                    {"b", DenseGrid(1, 1, 1, 0.0)}})
                         .at("y");
    CHECK(out.at(1, 1, 0) == 9.0);
    CHECK(out.at(0, 0, 0) == 4.0);  // zero padding
    CHECK(out.at(0, 1, 0) == 6.0);
  }
}

TEST_CASE("backprop: product, sigmoid and mean") {
  SUBCASE("x * y as a 1x1 convolution of a 1x1 grid") {
    Graph g;
    const NodeId x = g.input("x", {1, 1, 1});
    const NodeId y = g.parameter("y", {1, 1, 1});
    const NodeId zero = g.parameter("zero", {1, 1, 1});
    const NodeId out = g.conv2d(x, y, zero);
    const auto grads = backprop(
        g, {{"x", DenseGrid::scalar(3.0)}, {"y", DenseGrid::scalar(4.0)}, {"zero", DenseGrid::scalar(0.0)}},
        out);
    CHECK(grads.at("x").item() == 4.0);
    CHECK(grads.at("y").item() == 3.0);
  }
  SUBCASE("sigmoid at 0") {
    Graph g;
    const NodeId x = g.input("x", {1, 1, 1});
    const auto grads = backprop(g, {{"x", DenseGrid::scalar(0.0)}}, g.sigmoid(x));
    CHECK(grads.at("x").item() == 0.25);
  }
  SUBCASE("mean of a 2x2 grid") {
    Graph g;
    const NodeId x = g.input("x", {2, 2, 1});
    const auto grads = backprop(g, {{"x", random_grid({2, 2, 1}, 1)}}, g.mean(x));
    for (double v : grads.at("x").values()) CHECK(v == 0.25);
  }
}

TEST_CASE("backprop errors") {
  Graph g;
  const NodeId x = g.input("x", {2, 2, 1});
  const NodeId s = g.sum(x);
  Tape tape(g);
  CHECK_THROWS_AS(tape.backward(s), std::logic_error);  // not evaluated yet
  tape.forward({{"x", DenseGrid(2, 2, 1, 1.0)}});
  CHECK(tape.backward(s).at("x").bit_equal(DenseGrid(2, 2, 1, 1.0)));
  CHECK_THROWS(tape.backward(x));  // not a scalar
}

TEST_CASE("shape errors name the node, unbound leaves are reported") {
  Graph g;
  const NodeId a = g.input("alpha", {2, 2, 1});
  const NodeId b = g.input("beta", {3, 3, 1});
  const std::string msg = error_of([&] { g.add(a, b); });
  CHECK(msg.find("alpha") != std::string::npos);
  CHECK(msg.find("beta") != std::string::npos);

  const std::string unbound = error_of([&] { eval_graph(g, {{"alpha", DenseGrid(2, 2, 1)}}); });
  CHECK(unbound.find("beta") != std::string::npos);

  const std::string wrong = error_of([&] {
    eval_graph(g, {{"alpha", DenseGrid(2, 3, 1)}, {"beta", DenseGrid(3, 3, 1)}});
  });
  CHECK(wrong.find("alpha") != std::string::npos);

  CHECK_THROWS(g.input("alpha", {1, 1, 1}));         // duplicate leaf name
  CHECK_THROWS(g.gather(a, {}));                      // empty gather
  CHECK_THROWS(g.gather(a, {Pixel{2, 0}}));           // out of range
  CHECK_THROWS(g.channel_select(a, 1));
}

TEST_CASE("backward with seeds leaves unreached leaves at zero") {
  Graph g;
  const NodeId x = g.input("x", {2, 2, 2});
  const NodeId unused = g.parameter("unused", {1, 1, 3});
  (void)unused;
  const NodeId y = g.scale(x, 2.0);
  Tape tape(g);
  tape.forward({{"x", random_grid({2, 2, 2}, 2)}, {"unused", DenseGrid(1, 1, 3, 7.0)}});
  const DenseGrid seed(2, 2, 2, 1.5);
  const Seed seeds[] = {{y, &seed}};
  const auto grads = tape.backward(seeds);
  CHECK(grads.at("x").bit_equal(DenseGrid(2, 2, 2, 3.0)));
  CHECK(grads.at("unused").bit_equal(DenseGrid(1, 1, 3, 0.0)));
}

TEST_CASE("non-smooth points: zero norm and hinge kink have zero gradient") {
  Graph g;
  const NodeId x = g.input("x", {1, 1, 3});
  const NodeId n = g.sum(g.norm(x));
  CHECK(backprop(g, {{"x", DenseGrid(1, 1, 3, 0.0)}}, n).at("x").bit_equal(DenseGrid(1, 1, 3, 0.0)));

  Graph h;
  const NodeId y = h.input("y", {1, 1, 1});
  const NodeId out = h.hinge(y, 2.0);
  CHECK(backprop(h, {{"y", DenseGrid::scalar(2.0)}}, out).at("y").item() == 0.0);
  CHECK(backprop(h, {{"y", DenseGrid::scalar(1.0)}}, out).at("y").item() == -1.0);
  CHECK(backprop(h, {{"y", DenseGrid::scalar(3.0)}}, out).at("y").item() == 0.0);
}

TEST_CASE("finite differences: x^2 at 3 and a constant graph") {
  Graph g;
  const NodeId x = g.input("x", {1, 1, 1});
  const NodeId zero = g.parameter("zero", {1, 1, 1});
  const NodeId sq = g.conv2d(x, x, zero);
  const Bindings b{{"x", DenseGrid::scalar(3.0)}, {"zero", DenseGrid::scalar(0.0)}};
  CHECK(backprop(g, b, sq).at("x").item() == 6.0);
  const auto report = finite_diff_check(g, b, sq, 1e-3, 1e-7, {"x"});
  CHECK(report.passed());
  CHECK(report.max_relative_error() < 1e-7);

  Graph c;
  const NodeId y = c.input("y", {2, 2, 1});
  const NodeId k = c.scale(c.sum(y), 0.0);
  const auto constant = finite_diff_check(c, {{"y", random_grid({2, 2, 1}, 3)}}, k, 1e-3, 1e-4);
  CHECK(constant.passed());
  CHECK(constant.max_relative_error() == 0.0);
}

TEST_CASE("finite differences: weighted BCE graph on a random 4x4 input") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> labels(16);
    for (auto& l : labels) l = uniform_real(rng, 0.0, 1.0) < 0.5;
    labels[0] = 1;
    labels[1] = 0;
    Graph g;
    const NodeId x = g.input("x", {4, 4, 1});
    const NodeId loss = loss_graph::weighted_bce(g, x, Mask(4, 4, labels));
    const auto report =
        finite_diff_check(g, {{"x", random_grid({4, 4, 1}, seed + 100, -2, 2)}}, loss, 1e-3, 1e-4);
    CHECK(report.passed());
    CHECK(report.max_relative_error() < 1e-4);
  }
}

TEST_CASE("every op passes the finite-difference check") {
  const Shape s{4, 5, 3};
  const std::vector<Pixel> pts{{0, 0}, {3, 4}, {1, 2}, {1, 2}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Graph g;
    const NodeId x = g.input("x", s);
    const NodeId y = g.input("y", s);
    const NodeId w = g.parameter("w", {3, 3, 3 * 2});
    const NodeId b = g.parameter("b", {1, 1, 2});
    NodeId total = g.sum(g.conv2d(x, w, b));
    total = g.add(total, g.sum(g.subtract(g.relu(x), g.scale(y, 0.5))));
    total = g.add(total, g.sum(g.clamped_log(g.sigmoid(y), kProbabilityEpsilon)));
    total = g.add(total, g.sum(g.mean(g.channel_select(x, 2))));
    total = g.add(total, g.sum(g.norm(g.gather(y, pts))));
    total = g.add(total, g.sum(g.hinge(g.norm(x), 1.2)));
    const Bindings bind{{"x", random_grid(s, seed)},
                        {"y", random_grid(s, seed + 10)},
                        {"w", random_grid({3, 3, 6}, seed + 20)},
                        {"b", random_grid({1, 1, 2}, seed + 30)}};
    const auto report = finite_diff_check(g, bind, total, 1e-3, 1e-4);
    for (const auto& leaf : report.leaves) {
      INFO(leaf.name << " worst " << leaf.max_relative_error);
      CHECK(leaf.passed);
    }
  }
}

TEST_CASE("entries whose step crosses a kink are skipped, not failed") {
  Graph g;
  const NodeId x = g.input("x", {1, 1, 2});
  const NodeId out = g.sum(g.relu(x));
  DenseGrid at(1, 1, 2);
  at[0] = 0.0;  // sits on the kink
  at[1] = 0.7;
  const auto report = finite_diff_check(g, {{"x", at}}, out, 1e-3, 1e-4);
  CHECK(report.passed());
  CHECK(report.skipped() == 1);
  CHECK(report.checked() == 1);
}

TEST_CASE("function route flags a wrong gradient") {
  const DenseGrid at(1, 1, 2, 1.0);
  const auto f = [](const DenseGrid& x) { return x[0] * x[0] + 3.0 * x[1]; };
  DenseGrid good(1, 1, 2);
  good[0] = 2.0;
  good[1] = 3.0;
  CHECK(finite_diff_check(f, at, good, 1e-3, 1e-6, "f").passed);
  DenseGrid bad = good;
  bad[1] = 3.1;
  const LeafCheck c = finite_diff_check(f, at, bad, 1e-3, 1e-6, "f");
  CHECK_FALSE(c.passed);
  CHECK(c.worst_index == 1);
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(1.0, 3.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 1e-10) == doctest::Approx(1e-2));  // floor 1e-8
}
