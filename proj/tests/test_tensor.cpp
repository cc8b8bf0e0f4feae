#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "molvae/core/checkpoint.hpp"
#include "molvae/core/ops.hpp"
#include "molvae/core/optim.hpp"
#include "molvae/core/rng.hpp"
#include "molvae/core/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace molvae;
namespace op = molvae::ops;
using testing::check_gradients;

namespace {

Tensor<double> random_tensor(long r, long c, Rng& rng, double scl = 1.0) {
  Tensor<double> t(r, c);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.normal() * scl;
  return t;
}

// Builds a loss runner for check_gradients from a tape program.
testing::LossFn runner(
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)> program) {
  return [program](const std::vector<Tensor<double>>& inputs,
                   std::vector<Tensor<double>>* grads_out) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t.clone(), true));
    Var<double> loss = program(tape, vars);
    double value = loss.val().value();
    if (grads_out) {
      tape.backward(loss);
      grads_out->clear();
      for (auto v : vars) grads_out->push_back(tape.grad(v.id).clone());
    }
    return value;
  };
}

}  // namespace

TEST_CASE("d/dx of x*x at 3 is 6") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::scalar(3.0), true);
  auto y = op::mul(x, x);
  t.backward(y);
  CHECK(t.grad(x.id)[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::from(1, 4, {1.7, 1.7, 1.7, 1.7}), true);
  Tensor<double> mask(1, 4);
  for (long i = 0; i < 4; ++i) mask[i] = 1.0;
  auto y = op::softmax_masked(x, mask);
  for (long i = 0; i < 4; ++i) CHECK(y.val()[i] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("masked softmax entries are exactly zero with zero gradient") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::from(1, 4, {5.0, 1.0, -2.0, 0.5}), true);
  Tensor<double> mask = Tensor<double>::from(1, 4, {1.0, 0.0, 1.0, 0.0});
  auto y = op::softmax_masked(x, mask);
  CHECK(y.val()[1] == 0.0);
  CHECK(y.val()[3] == 0.0);
  CHECK(y.val()[0] + y.val()[2] == doctest::Approx(1.0).epsilon(1e-12));
  auto loss = op::sum_all(op::mul(y, y));
  t.backward(loss);
  CHECK(t.grad(x.id)[1] == 0.0);
  CHECK(t.grad(x.id)[3] == 0.0);
  CHECK(t.grad(x.id)[0] != 0.0);
}

TEST_CASE("every primitive matches central finite differences") {
  Rng rng(2024);

  SUBCASE("matmul") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          return op::sum_all(op::matmul(v[0], v[1]));
        }),
        {random_tensor(3, 4, rng), random_tensor(4, 2, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("add, sub, mul, scale, add_const") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          auto s = op::add(v[0], v[1]);
          s = op::sub(s, op::scale(v[1], 0.3));
          s = op::mul(s, v[0]);
          s = op::add_const(s, 0.7);
          return op::sum_all(op::mul(s, s));
        }),
        {random_tensor(3, 3, rng), random_tensor(3, 3, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("add_rowvec") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          return op::sum_all(op::mul(op::add_rowvec(v[0], v[1]), op::add_rowvec(v[0], v[1])));
        }),
        {random_tensor(4, 3, rng), random_tensor(1, 3, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("concat and slice") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          auto c = op::concat_cols<double>({v[0], v[1]});
          auto r = op::concat_rows<double>({c, c});
          auto s = op::slice_rows(r, 1, 2);
          return op::sum_all(op::mul(s, s));
        }),
        {random_tensor(3, 2, rng), random_tensor(3, 3, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("gather and scatter") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          auto g = op::gather_rows(v[0], {2, 0, 2, 1});
          auto s = op::scatter_add_rows(g, {0, 1, 1, 0}, 2);
          return op::sum_all(op::mul(s, s));
        }),
        {random_tensor(3, 3, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("exp log tanh sigmoid leaky_relu") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          auto a = op::exp_(v[0]);
          auto b = op::log_(op::add_const(op::mul(v[0], v[0]), 1.0));
          auto c = op::tanh_(v[0]);
          auto d = op::sigmoid_(v[0]);
          auto e = op::leaky_relu(v[0]);
          return op::sum_all(op::mul(op::add(op::add(a, b), op::add(c, d)), e));
        }),
        {random_tensor(4, 4, rng, 0.8)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("clamp") {
    // keep inputs away from the clamp boundaries, where the derivative jumps
    Tensor<double> x = Tensor<double>::from(2, 3, {-3.0, -0.5, 0.2, 0.9, 2.0, 3.5});
    auto res = check_gradients(runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
                                 (void)t;
                                 auto c = op::clamp(v[0], -1.0, 2.5);
                                 return op::sum_all(op::mul(c, c));
                               }),
                               {x});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("masked softmax") {
    Tensor<double> mask = Tensor<double>::from(3, 4, {1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 1, 0});
    auto res = check_gradients(
        runner([mask](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          auto y = op::softmax_masked(v[0], mask);
          return op::sum_all(op::mul(y, op::exp_(y)));
        }),
        {random_tensor(3, 4, rng)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("bce_logits") {
    Tensor<double> targets = Tensor<double>::from(2, 3, {1, 0, 1, 0, 0, 1});
    auto res = check_gradients(
        runner([targets](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          return op::sum_all(op::bce_logits(v[0], targets));
        }),
        {random_tensor(2, 3, rng, 2.0)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("clamped_log") {
    Tensor<double> x = Tensor<double>::from(1, 4, {0.5, 1.5, 2.0, 0.01});
    auto res = check_gradients(runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
                                 (void)t;
                                 return op::sum_all(op::clamped_log(v[0], 1e-12));
                               }),
                               {x});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("batch_norm training mode") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          Tensor<double> rm(1, 3), rv(1, 3);
          for (long i = 0; i < 3; ++i) rv[i] = 1.0;
          auto y = op::batch_norm(v[0], v[1], v[2], rm, rv, true);
          return op::sum_all(op::mul(y, op::sigmoid_(y)));
        }),
        {random_tensor(5, 3, rng), random_tensor(1, 3, rng, 0.5),
         random_tensor(1, 3, rng, 0.5)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
  SUBCASE("batch_norm eval mode") {
    auto res = check_gradients(
        runner([](Tape<double>& t, const std::vector<Var<double>>& v) {
          (void)t;
          Tensor<double> rm(1, 3), rv(1, 3);
          for (long i = 0; i < 3; ++i) {
            rm[i] = 0.2 * i;
            rv[i] = 1.0 + 0.1 * i;
          }
          auto y = op::batch_norm(v[0], v[1], v[2], rm, rv, false);
          return op::sum_all(op::mul(y, y));
        }),
        {random_tensor(4, 3, rng), random_tensor(1, 3, rng, 0.5),
         random_tensor(1, 3, rng, 0.5)});
    CHECK_MESSAGE(res.ok, res.worst_where);
  }
}

TEST_CASE("backward bookkeeping") {
  SUBCASE("constant loss gives zero gradients") {
    Tape<double> t;
    auto p = t.leaf(Tensor<double>::from(1, 3, {1, 2, 3}), true);
    auto c = t.constant(Tensor<double>::scalar(5.0));
    auto loss = op::sum_all(c);
    t.backward(loss);
    CHECK_FALSE(t.has_grad(p.id));  // unreachable parameter: zero by absence
  }
  SUBCASE("sum of parameters gives unit gradients") {
    Tape<double> t;
    auto p = t.leaf(Tensor<double>::from(2, 2, {1, 2, 3, 4}), true);
    auto loss = op::sum_all(p);
    t.backward(loss);
    for (long i = 0; i < 4; ++i) CHECK(t.grad(p.id)[i] == 1.0);
  }
  SUBCASE("backward twice throws") {
    Tape<double> t;
    auto p = t.leaf(Tensor<double>::scalar(2.0), true);
    auto loss = op::mul(p, p);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape<double> t;
    auto p = t.leaf(Tensor<double>::from(1, 2, {1, 2}), true);
    CHECK_THROWS_AS(t.backward(p), std::logic_error);
  }
}

TEST_CASE("adam optimizer") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore<double> store;
    store.add("w", Tensor<double>::from(1, 2, {1.0, -2.0}));
    AdamOptimizer<double> adam;
    std::map<std::string, Tensor<double>> grads;
    grads["w"] = Tensor<double>(1, 2);  // zeros
    adam.step(store, grads);
    CHECK(store.at("w")[0] == 1.0);
    CHECK(store.at("w")[1] == -2.0);
  }
  SUBCASE("repeated unit gradients decrease a scalar") {
    ParamStore<double> store;
    store.add("x", Tensor<double>::scalar(1.0));
    AdamOptimizer<double> adam;
    double prev = 1.0;
    for (int i = 0; i < 50; ++i) {
      std::map<std::string, Tensor<double>> grads;
      grads["x"] = Tensor<double>::scalar(1.0);
      adam.step(store, grads);
      CHECK(store.at("x")[0] < prev);
      prev = store.at("x")[0];
    }
  }
  SUBCASE("non-finite gradient aborts with parameter name") {
    ParamStore<double> store;
    store.add("bad_param", Tensor<double>::scalar(1.0));
    AdamOptimizer<double> adam;
    std::map<std::string, Tensor<double>> grads;
    grads["bad_param"] = Tensor<double>::scalar(std::nan(""));
    CHECK_THROWS_WITH_AS(adam.step(store, grads), doctest::Contains("bad_param"),
                         std::runtime_error);
  }
  SUBCASE("two identical runs are bit-identical after 100 steps") {
    auto run = [] {
      Rng rng(99);
      ParamStore<float> store;
      store.add("w", xavier_init<float>(4, 4, rng));
      AdamOptimizer<float> adam;
      for (int i = 0; i < 100; ++i) {
        Tape<float> t;
        auto w = t.leaf(store.at("w"), true);
        auto loss = op::sum_all(op::mul(op::sigmoid_(w), w));
        t.backward(loss);
        std::map<std::string, Tensor<float>> grads;
        grads["w"] = t.grad(w.id).clone();
        adam.step(store, grads);
      }
      return store.at("w");
    };
    auto a = run(), b = run();
    for (long i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("batch norm updates running statistics in training only") {
  Tape<float> t;
  Tensor<float> rm(1, 2), rv(1, 2);
  rv[0] = rv[1] = 1.0f;
  auto x = t.leaf(Tensor<float>::from(4, 2, {1, 10, 2, 10, 3, 10, 4, 10}), false);
  auto gamma = t.leaf(Tensor<float>::from(1, 2, {1, 1}), false);
  auto beta = t.leaf(Tensor<float>::from(1, 2, {0, 0}), false);
  op::batch_norm(x, gamma, beta, rm, rv, true);
  CHECK(rm[0] == doctest::Approx(0.25f));   // 0.9*0 + 0.1*2.5
  CHECK(rm[1] == doctest::Approx(1.0f));    // 0.9*0 + 0.1*10
  CHECK(rv[1] == doctest::Approx(0.9f));    // 0.9*1 + 0.1*0
  Tensor<float> rm2 = rm.clone(), rv2 = rv.clone();
  auto y = op::batch_norm(x, gamma, beta, rm, rv, false);
  CHECK(rm[0] == rm2[0]);  // eval mode leaves stats alone
  CHECK(y.val().at(0, 0) != 0.0f);
}

TEST_CASE("checkpoint round trip preserves payloads") {
  Checkpoint ck;
  ck["enc.embed"] = {{3, 4}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
  ck["meta.seed"] = {{1}, std::vector<std::uint64_t>{123456789}};
  ck["stats"] = {{2}, std::vector<double>{0.5, -0.25}};
  auto path = std::filesystem::temp_directory_path() / "molvae_ck_test.rgcv";
  save_checkpoint(path.string(), ck);
  auto loaded = load_checkpoint(path.string());
  REQUIRE(loaded.size() == 3);
  CHECK(std::get<std::vector<float>>(loaded["enc.embed"].payload) ==
        std::get<std::vector<float>>(ck["enc.embed"].payload));
  CHECK(std::get<std::vector<std::uint64_t>>(loaded["meta.seed"].payload)[0] == 123456789);
  CHECK(loaded["stats"].dims == std::vector<std::uint64_t>{2});
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/nothing.rgcv"), std::runtime_error);
}

TEST_CASE("rng streams are deterministic and roughly normal") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng n(13);
  double sum = 0, sumsq = 0;
  const int kN = 200000;
  for (int i = 0; i < kN; ++i) {
    double x = n.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / kN) < 0.01);
  CHECK(std::abs(sumsq / kN - 1.0) < 0.02);

  auto d1 = Rng::derive(5, 0), d2 = Rng::derive(5, 1);
  CHECK(d1.next_u64() != d2.next_u64());
}
