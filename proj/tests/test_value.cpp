#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fgkf/common.hpp"
#include "fgkf/params.hpp"
#include "fgkf/rng.hpp"
#include "fgkf/value.hpp"
#include "testutil.hpp"

using namespace fgkf;
using testutil::fd_check;

TEST_CASE("value handles expose shape and data") {
  Value v = Value::constant(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(v.rows() == 2);
  CHECK(v.cols() == 3);
  CHECK(v.size() == 6);
  CHECK(v.at(1, 2) == 6.0);
  CHECK(Value::scalar(7.5).item() == 7.5);
  CHECK_THROWS_AS(v.item(), ShapeError);
}

TEST_CASE("matmul against identity returns its input") {
  Value eye = Value::constant(2, 2, {1, 0, 0, 1});
  Value col = Value::constant(2, 1, {3, 4});
  Value out = matmul(eye, col);
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 1);
  CHECK(out.at(0, 0) == doctest::Approx(3.0));
  CHECK(out.at(1, 0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(matmul(col, eye), ShapeError);
}

TEST_CASE("softmax of a constant row is uniform") {
  Value out = softmax(Value::constant(1, 3, {0, 0, 0}), 1);
  for (int c = 0; c < 3; ++c) CHECK(out.at(0, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("sigmoid at zero is one half") {
  CHECK(sigmoid(Value::scalar(0.0)).item() == doctest::Approx(0.5));
}

TEST_CASE("d(x*x)/dx at 3 is 6") {
  Value x = Value::param(1, 1, {3.0});
  backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sigmoid gradient at zero is 0.25") {
  Value x = Value::param(1, 1, {0.0});
  backward(sigmoid(x));
  CHECK(x.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("broadcast add covers row, column, and scalar") {
  Value m = Value::constant(2, 3, {1, 2, 3, 4, 5, 6});
  Value row = Value::constant(1, 3, {10, 20, 30});
  Value col = Value::constant(2, 1, {100, 200});
  Value s = Value::scalar(0.5);

  Value mr = add(m, row);
  CHECK(mr.at(0, 0) == 11.0);
  CHECK(mr.at(1, 2) == 36.0);
  Value mc = add(col, m);
  CHECK(mc.at(0, 2) == 103.0);
  CHECK(mc.at(1, 0) == 204.0);
  Value ms = add(m, s);
  CHECK(ms.at(1, 1) == 5.5);
  CHECK_THROWS_AS(add(m, Value::constant(3, 2, {1, 2, 3, 4, 5, 6})), ShapeError);
}

TEST_CASE("sub equals add of negation, with gradients") {
  Value a = Value::param(1, 2, {5, 7});
  Value b = Value::param(1, 2, {2, 10});
  Value d = sub(a, b);
  CHECK(d.at(0, 0) == 3.0);
  CHECK(d.at(0, 1) == -3.0);
  backward(sum(d));
  CHECK(a.grad()[0] == 1.0);
  CHECK(b.grad()[1] == -1.0);
}

TEST_CASE("logsumexp shapes and values per axis") {
  Value m = Value::constant(2, 3, {0, 0, 0, 1, 2, 3});
  Value r = logsumexp(m, 1);
  CHECK(r.rows() == 2);
  CHECK(r.cols() == 1);
  CHECK(r.at(0, 0) == doctest::Approx(std::log(3.0)));
  CHECK(r.at(1, 0) ==
        doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  Value c = logsumexp(m, 0);
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 3);
  CHECK(c.at(0, 0) == doctest::Approx(std::log(1.0 + std::exp(1.0))));
}

TEST_CASE("log_softmax rows agree with softmax") {
  Value m = Value::constant(2, 3, {0.3, -1.2, 2.0, 0.0, 0.0, 4.0});
  Value p = softmax(m, 1);
  Value lp = log_softmax(m, 1);
  for (int r = 0; r < 2; ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(std::exp(lp.at(r, c)) == doctest::Approx(p.at(r, c)));
      row_sum += p.at(r, c);
    }
    CHECK(row_sum == doctest::Approx(1.0));
  }
}

TEST_CASE("concat and slice are inverses") {
  Value a = Value::constant(2, 2, {1, 2, 3, 4});
  Value b = Value::constant(2, 3, {5, 6, 7, 8, 9, 10});
  Value cat = concat({a, b}, 1);
  CHECK(cat.cols() == 5);
  Value back = slice(cat, 1, 2, 3);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(back.at(r, c) == b.at(r, c));

  Value vcat = concat({a, Value::constant(1, 2, {-1, -2})}, 0);
  CHECK(vcat.rows() == 3);
  CHECK(slice(vcat, 0, 2, 1).at(0, 1) == -2.0);
}

TEST_CASE("transpose, reshape, and pick") {
  Value m = Value::constant(2, 3, {1, 2, 3, 4, 5, 6});
  Value t = transpose(m);
  CHECK(t.rows() == 3);
  CHECK(t.at(2, 1) == 6.0);
  Value r = reshape(m, 3, 2);
  CHECK(r.at(2, 0) == 5.0);
  CHECK(pick(m, 1, 1).item() == 5.0);
  CHECK_THROWS_AS(reshape(m, 4, 2), ShapeError);
}

TEST_CASE("gather_rows scatter-adds gradients on repeated ids") {
  Value table = Value::param(3, 2, {1, 2, 3, 4, 5, 6});
  std::vector<int> ids = {2, 0, 2};
  Value rows = gather_rows(table, ids);
  CHECK(rows.rows() == 3);
  CHECK(rows.at(0, 1) == 6.0);
  CHECK(rows.at(1, 0) == 1.0);
  backward(sum(rows));
  auto g = table.grad();
  CHECK(g[0] == 1.0);  // row 0 used once
  CHECK(g[2] == 0.0);  // row 1 never used
  CHECK(g[4] == 2.0);  // row 2 used twice
}

TEST_CASE("dropout applies the supplied mask exactly") {
  Value x = Value::param(1, 4, {1, 2, 3, 4});
  std::vector<double> mask = {2.0, 0.0, 2.0, 0.0};  // keep=0.5 inverted scale
  Value y = dropout(x, mask);
  CHECK(y.at(0, 0) == 2.0);
  CHECK(y.at(0, 1) == 0.0);
  CHECK(y.at(0, 2) == 6.0);
  backward(sum(y));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("three-layer composition matches central finite differences") {
  Rng rng(7);
  ParamSet ps;
  ps.create_uniform("w1", 4, 5, rng, 0.8);
  ps.create_uniform("b1", 1, 5, rng, 0.5);
  ps.create_uniform("w2", 5, 3, rng, 0.8);
  ps.create_uniform("b2", 1, 3, rng, 0.5);
  ps.create_uniform("w3", 3, 2, rng, 0.8);
  Value x = Value::constant(2, 4, {0.1, -0.4, 0.9, 0.2, -0.7, 0.3, 0.5, -0.1});

  auto loss = [&] {
    Value h1 = fgkf::tanh(add(matmul(x, ps.get("w1")), ps.get("b1")));
    Value h2 = sigmoid(add(matmul(h1, ps.get("w2")), ps.get("b2")));
    Value out = log_softmax(matmul(h2, ps.get("w3")), 1);
    return sub(sum(mul(out, out)), logsumexp(reshape(out, 1, 4), 1));
  };
  auto rep = fd_check(ps, ps.names(), loss);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err < 1e-4);
}

TEST_CASE("elementwise and reduction primitives pass finite differences") {
  Rng rng(11);
  ParamSet ps;
  ps.create_uniform("a", 3, 4, rng, 0.9);
  ps.create_uniform("b", 3, 4, rng, 0.9);
  ps.create_uniform("row", 1, 4, rng, 0.9);
  ps.create_uniform("col", 3, 1, rng, 0.9);

  auto loss = [&] {
    Value a = ps.get("a");
    Value b = add_scalar(mul(ps.get("b"), ps.get("b")), 1.1);  // positive divisor
    Value t1 = div(a, b);
    Value t2 = mul(add(a, ps.get("row")), add(a, ps.get("col")));
    Value t3 = fgkf::exp(scale(a, 0.3));
    Value t4 = fgkf::log(add_scalar(mul(a, a), 0.7));
    Value t5 = fgkf::sqrt(add_scalar(mul(b, b), 0.2));
    Value t6 = logsumexp(t2, 0);
    Value acc = add(add(sum(t1), sum(t3)), add(sum(t4), sum(t5)));
    return add(acc, add(sum(t6), sum(mul(softmax(t2, 1), t3))));
  };
  auto rep = fd_check(ps, ps.names(), loss);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err < 1e-4);
}

TEST_CASE("backward rejects a non-finite loss and NaN gradients name the producer") {
  Value x = Value::param(1, 1, {-2.0});
  CHECK_THROWS_AS(backward(fgkf::log(x)), NumericError);
  // sqrt'(0) is infinite; a zero upstream grad turns it into 0*inf = NaN.
  Value zero = Value::param(1, 1, {0.0});
  CHECK_THROWS_WITH_AS(backward(mul(fgkf::sqrt(zero), Value::scalar(0.0))),
                       doctest::Contains("sqrt"), NumericError);
}

TEST_CASE("gradients from an earlier step are not current") {
  Value a = Value::param(1, 1, {2.0});
  Value b = Value::param(1, 1, {3.0});
  backward(mul(a, b));
  CHECK(a.grad_current());
  CHECK(b.grad_current());
  backward(mul(a, a));
  CHECK(a.grad_current());
  CHECK_FALSE(b.grad_current());
}

TEST_CASE("paramset gradients report zeros for unreachable entries") {
  Rng rng(3);
  ParamSet ps;
  ps.create("p", 1, 2, {1.0, 2.0});
  ps.create("q", 1, 2, {3.0, 4.0});
  backward(sum(mul(ps.get("p"), ps.get("p"))));
  GradMap full = ps.gradients(ps.names());
  CHECK(full.at("p")[1] == doctest::Approx(4.0));
  CHECK(full.at("q")[0] == 0.0);
  GradMap live = ps.current_gradients(ps.names());
  CHECK(live.count("p") == 1);
  CHECK(live.count("q") == 0);
}

TEST_CASE("sgd leaves parameters alone for zero gradients or zero lr") {
  ParamSet ps;
  ps.create("p", 1, 2, {1.5, -2.5});
  std::vector<std::string> names = {"p"};
  GradMap grads;
  grads["p"] = {0.0, 0.0};
  sgd_update(ps, names, grads, 0.1, 0.0, 5.0);
  CHECK(ps.get("p").at(0, 0) == 1.5);
  CHECK(ps.get("p").at(0, 1) == -2.5);

  grads["p"] = {10.0, -3.0};
  sgd_update(ps, names, grads, 0.0, 0.4, 5.0);
  CHECK(ps.get("p").at(0, 0) == 1.5);
  CHECK(ps.get("p").at(0, 1) == -2.5);
}

TEST_CASE("global-norm clip rescales the step") {
  ParamSet ps;
  ps.create("p", 1, 2, {0.0, 0.0});
  std::vector<std::string> names = {"p"};
  GradMap grads;
  grads["p"] = {3.0, 4.0};  // norm 5, clip 2.5 -> effective [1.5, 2.0]
  sgd_update(ps, names, grads, 1.0, 0.0, 2.5);
  CHECK(ps.get("p").at(0, 0) == doctest::Approx(-1.5));
  CHECK(ps.get("p").at(0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("l2 decay pulls toward zero and map updates touch only their keys") {
  ParamSet ps;
  ps.create("u", 1, 1, {2.0});
  ps.create("v", 1, 1, {8.0});
  GradMap grads;
  grads["u"] = {0.0};
  sgd_update_map(ps, grads, 0.1, 0.5, 100.0);
  CHECK(ps.get("u").item() == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  CHECK(ps.get("v").item() == 8.0);
}

TEST_CASE("frozen parameters receive no update") {
  ParamSet ps;
  ps.create("p", 1, 1, {1.0});
  ps.set_trainable("p", false);
  std::vector<std::string> names = {"p"};
  GradMap grads;
  grads["p"] = {4.0};
  sgd_update(ps, names, grads, 0.5, 0.0, 100.0);
  CHECK(ps.get("p").item() == 1.0);
}

TEST_CASE("prefix copy, hash, snapshot, and save/load round-trip") {
  Rng rng(5);
  ParamSet ps;
  ps.create_uniform("src.a", 2, 3, rng, 1.0);
  ps.create_uniform("src.b.c", 1, 4, rng, 1.0);
  ps.create_zeros("tgt.a", 2, 3);
  ps.create_zeros("tgt.b.c", 1, 4);

  const uint64_t before = ps.hash_prefix("src.");
  ps.copy_prefix("src.", "tgt.");
  CHECK(ps.hash_prefix("src.") == before);
  CHECK(ps.get("tgt.a").at(1, 2) == ps.get("src.a").at(1, 2));
  for (const char* suffix : {"a", "b.c"}) {
    auto src = ps.get(std::string("src.") + suffix).data();
    auto tgt = ps.get(std::string("tgt.") + suffix).data();
    REQUIRE(src.size() == tgt.size());
    for (size_t i = 0; i < src.size(); ++i) CHECK(src[i] == tgt[i]);
  }

  ParamSnapshot snap = ps.snapshot();
  ps.get("src.a").leaf_data()[0] += 1.0;
  CHECK(ps.hash_prefix("src.") != before);
  ps.restore(snap);
  CHECK(ps.hash_prefix("src.") == before);

  std::stringstream buf;
  ps.save(buf);
  ParamSet other;
  other.load(buf);
  CHECK(other.count() == ps.count());
  CHECK(other.hash_prefix("") == ps.hash_prefix(""));
  CHECK(other.get("src.b.c").at(0, 3) == ps.get("src.b.c").at(0, 3));
}
