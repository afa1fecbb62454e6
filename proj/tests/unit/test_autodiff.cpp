#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "ganlip/autodiff.hpp"
#include "ganlip/error.hpp"

using namespace ganlip;
namespace ad = ganlip::ad;

TEST_CASE("forward values of elementwise ops and reductions") {
  ad::Tape t;
  const ad::Value a = t.leaf(Matrix(2, 2, std::vector<double>{1, -2, 3, -4}));
  const ad::Value b = t.leaf(Matrix(2, 2, std::vector<double>{2, 2, 2, 2}));
  CHECK((a + b).data().data == std::vector<double>{3, 0, 5, -2});
  CHECK((a * b).data().data == std::vector<double>{2, -4, 6, -8});
  CHECK(ad::abs(a).data().data == std::vector<double>{1, 2, 3, 4});
  CHECK(ad::relu(a).data().data == std::vector<double>{1, 0, 3, 0});
  CHECK(ad::sum(a).item() == -2);
  CHECK(ad::mean(a).item() == -0.5);
  CHECK(ad::row_sums(a).data().data == std::vector<double>{-1, -1});
  CHECK(ad::col_sums(a).data().data == std::vector<double>{4, -6});
  CHECK(ad::clamp(a, -1, 1).data().data == std::vector<double>{1, -1, 1, -1});
  CHECK(ad::l2_norm_rows(a).data().data[0] == doctest::Approx(std::sqrt(5.0)));
  CHECK(ad::matmul(a, b).data().data == std::vector<double>{-2, -2, -2, -2});
  CHECK(ad::concat(a, b).cols() == 4);
  CHECK(ad::slice(ad::concat(a, b), 2, 4).data() == b.data());
  const std::vector<double> flat = a.data().data;  // tape growth may move node storage
  CHECK(ad::reshape(a, 1, 4).data().data == flat);
  CHECK(ad::transpose(a).data().data == std::vector<double>{1, 3, -2, -4});
}

TEST_CASE("shape mismatches are rejected") {
  ad::Tape t;
  const ad::Value a = t.zeros(2, 3), b = t.zeros(3, 2);
  CHECK_THROWS_AS(ad::add(a, b), Error);
  CHECK_THROWS_AS(ad::matmul(a, a), Error);
  CHECK_THROWS_AS(ad::slice(a, 2, 5), Error);
  CHECK_THROWS_AS(ad::reshape(a, 4, 2), Error);
  CHECK_THROWS_AS(ad::add_bias(a, t.zeros(1, 2)), Error);
}

TEST_CASE("non-finite results raise numeric errors") {
  ad::Tape t;
  const ad::Value z = t.zeros(1, 1);
  try {
    ad::log(z);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
  CHECK_THROWS_AS(ad::div(t.scalar(1.0), z), Error);
}

TEST_CASE("grad reports unreached inputs with zero tensors") {
  ad::Tape t;
  const ad::Value x = t.leaf(Matrix(2, 3, 1.0)), y = t.leaf(Matrix(1, 4, 2.0));
  const auto g = ad::grad(ad::sum(ad::square(x)), std::vector{x, y});
  CHECK(g.reached[0]);
  CHECK_FALSE(g.reached[1]);
  CHECK(g.values[1].rows() == 1);
  CHECK(g.values[1].cols() == 4);
  for (double v : g.values[1].data().data) CHECK(v == 0.0);
  for (double v : g.values[0].data().data) CHECK(v == 2.0);
}

TEST_CASE("detached gradients do not extend the graph") {
  ad::Tape t;
  const ad::Value x = t.scalar(3.0);
  const ad::Value y = ad::mul(x, x);
  const ad::Value g = ad::grad(y, std::vector{x}, false).values[0];
  CHECK(g.item() == 6.0);
  CHECK(t.node(g.id()).op == ad::Op::Leaf);
  const auto gg = ad::grad(g, std::vector{x});
  CHECK_FALSE(gg.reached[0]);
}

TEST_CASE("third derivative through repeated create_graph") {
  ad::Tape t;
  const ad::Value x = t.scalar(1.3);
  const ad::Value y = ad::mul(ad::square(ad::square(x)), x);  // x^5
  const ad::Value d1 = ad::grad(y, std::vector{x}, true).values[0];
  const ad::Value d2 = ad::grad(d1, std::vector{x}, true).values[0];
  const ad::Value d3 = ad::grad(d2, std::vector{x}, true).values[0];
  CHECK(d1.item() == doctest::Approx(5 * std::pow(1.3, 4)).epsilon(1e-13));
  CHECK(d2.item() == doctest::Approx(20 * std::pow(1.3, 3)).epsilon(1e-13));
  CHECK(d3.item() == doctest::Approx(60 * 1.3 * 1.3).epsilon(1e-13));
}

TEST_CASE("second derivatives of nonlinear primitives match nested differences") {
  using Fn = std::function<ad::Value(ad::Value)>;
  using Ref = std::function<double(double)>;
  const std::vector<std::pair<Fn, Ref>> cases = {
      {[](ad::Value v) { return ad::tanh(v); }, [](double v) { return std::tanh(v); }},
      {[](ad::Value v) { return ad::sigmoid(v); }, [](double v) { return 1 / (1 + std::exp(-v)); }},
      {[](ad::Value v) { return ad::log(v); }, [](double v) { return std::log(v); }},
      {[](ad::Value v) { return ad::sqrt(v); }, [](double v) { return std::sqrt(v); }},
      {[](ad::Value v) { return ad::div(v.tape()->scalar(1.0), v); }, [](double v) { return 1 / v; }},
  };
  for (const auto& [fn, ref] : cases) {
    for (double x0 : {0.4, 1.1, 2.3}) {
      ad::Tape t;
      const ad::Value x = t.scalar(x0);
      const ad::Value d1 = ad::grad(fn(x), std::vector{x}, true).values[0];
      const double d2 = ad::grad(d1, std::vector{x}).values[0].item();
      const double want = oracle::derivative([&](double v) { return oracle::derivative(ref, v, 1e-3); }, x0, 1e-3);
      CHECK(d2 == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  // relu at its kink: central differences see slope 1/2, the analytic rule picks a side.
  const ad::ScalarFn f = [](ad::Tape&, ad::Value v) { return ad::sum(ad::relu(v)); };
  CHECK(ad::finite_diff_check(f, Matrix(1, 1, 0.0)) > 0.1);
  CHECK(ad::finite_diff_check(f, Matrix(1, 1, 0.5)) < 1e-8);
}
