// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "storyforge/adam.hpp"
#include "storyforge/checkpoint.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/grad_check.hpp"
#include "storyforge/gru.hpp"
#include "storyforge/math.hpp"
#include "storyforge/tape.hpp"

using namespace storyforge;

TEST_CASE("shape and storage") {
  NumArray m = NumArray::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6);
  CHECK_THROWS_AS(NumArray::matrix(2, 2, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(NumArray(Shape{1, 1, 1, 1, 1}), DimensionError);
  CHECK_FALSE(m.has_grad());
  m.grad()[0] = 3;
  CHECK(m.has_grad());
  m.zero_grad();
  CHECK(m.grad()[0] == 0);
}

TEST_CASE("masked softmax") {
  SUBCASE("equal logits") {
    const auto p = masked_softmax(NumArray::vector({2, 2, 2, 2}), Mask{1, 1, 1, 1});
    for (double v : p.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("single valid position") {
    const auto p = masked_softmax(NumArray::vector({5, -1, 3}), Mask{0, 1, 0});
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 1.0);
    CHECK(p[2] == 0.0);
  }
  SUBCASE("exp and normalize") {
    const auto p = masked_softmax(NumArray::vector({1, 2, 3}), Mask{1, 1, 0});
    const double e1 = std::exp(1.0), e2 = std::exp(2.0);
    CHECK(p[0] == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(e2 / (e1 + e2)).epsilon(1e-14));
    CHECK(p[2] == 0.0);
  }
  CHECK_THROWS_AS(masked_softmax(NumArray::vector({1, 2}), Mask{0, 0}), InvalidMaskError);
  CHECK_THROWS_AS(masked_softmax(NumArray::vector({1, 2}), Mask{1}), DimensionError);
}

TEST_CASE("log_softmax_at is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_softmax_at(big, 0) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("tanh derivative against central differences") {
  ParamStore p;
  p.add("x", "g", NumArray::vector({0.3}));
  Tape tape;
  Binder bind(tape, p);
  tape.backward(ops::tanh(bind("x")));
  const double h = 1e-6;
  const double numeric = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h);
  CHECK(std::abs(p.at("x").grad()[0] - numeric) / std::abs(numeric) < 1e-6);
}

TEST_CASE("tape accumulates a reused parameter") {
  ParamStore p;
  p.add("a", "g", NumArray::vector({2.0, -1.0}));
  Tape tape;
  Binder bind(tape, p);
  const Var a = bind("a");
  tape.backward(ops::dot(a, a));
  CHECK(p.at("a").grad()[0] == 4.0);
  CHECK(p.at("a").grad()[1] == -2.0);
}

TEST_CASE("operand shape mismatch names the operation") {
  Tape tape;
  const Var a = tape.constant({1.0, 2.0});
  const Var b = tape.constant({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(ops::add(a, b), DimensionError);
  try {
    ops::dot(a, b);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("dot") != std::string::npos);
  }
}

TEST_CASE("gru zero parameters") {
  ParamStore p;
  add_gru(p, "g", "grp", 3, 2);
  const auto w = gru_weights(p, "g");
  const auto h = gru_cell(NumArray::vector({0.7, -2.0, 5.0}), NumArray::vector({1.0, -1.0}), w);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == -0.5);
  const auto zero = gru_cell(NumArray::vector({0, 0, 0}), NumArray::vector({0, 0}), w);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("gru matches the gate-by-gate recurrence") {
  ParamStore p;
  add_gru(p, "g", "grp", 3, 2);
  oracle::randomize(p, 11, 1.0);
  const auto w = gru_weights(p, "g");
  oracle::Vec h{0.1, -0.4};
  NumArray hv = NumArray::vector(h);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int step = 0; step < 4; ++step) {
    const oracle::Vec x{n(rng), n(rng), n(rng)};
    h = oracle::gru(p.at("g.w_ih"), p.at("g.w_hh"), p.at("g.b"), x, h);
    hv = gru_cell(NumArray::vector(x), hv, w);
    CHECK(oracle::max_abs_diff(oracle::values(hv), h) < 1e-14);
  }
}

TEST_CASE("gru rejects inconsistent weights") {
  ParamStore p;
  add_gru(p, "g", "grp", 3, 2);
  const auto w = gru_weights(p, "g");
  CHECK_THROWS_AS(gru_cell(NumArray::vector({1, 2}), NumArray::vector({0, 0}), w), DimensionError);
  CHECK_THROWS_AS(gru_cell(NumArray::vector({1, 2, 3}), NumArray::vector({0}), w), DimensionError);
}

TEST_CASE("gru tape gradient") {
  ParamStore p;
  add_gru(p, "g", "grp", 3, 4);
  p.add("x", "in", NumArray::vector({0.2, -0.5, 0.9}));
  p.add("h", "in", NumArray::vector({0.1, 0.3, -0.2, 0.6}));
  oracle::randomize(p, 5, 0.8);
  const auto report = grad_check(
      [](const Binder& bind) {
        const Var h1 = ops::gru_cell(bind("x"), bind("h"), bind_gru(bind, "g"));
        const Var h2 = ops::gru_cell(bind("x"), h1, bind_gru(bind, "g"));
        return ops::dot(h2, h2);
      },
      p);
  CHECK(report.max_relative_error < 1e-7);
  CHECK(report.max_coordinate_error < 1e-5);
}

TEST_CASE("adam") {
  CHECK(AdamConfig{}.lr == 4e-4);
  ParamStore p;
  p.add("w", "a", NumArray::vector({1.0}));
  p.add("still", "a", NumArray::vector({2.0}));
  p.add("frozen", "b", NumArray::vector({3.0}));
  p.at("w").grad()[0] = 0.5;
  p.at("still").grad()[0] = 0.0;
  p.at("frozen").grad()[0] = 1.0;
  p.freeze("b");
  Adam adam;
  adam.step(p);

  // m = 0.05, v = 0.00025, both bias corrections divide by 0.1 and 0.001
  const double m_hat = (1 - 0.9) * 0.5 / (1 - 0.9);
  const double v_hat = (1 - 0.999) * 0.25 / (1 - 0.999);
  CHECK(p.at("w")[0] == doctest::Approx(1.0 - 4e-4 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-15));
  CHECK(p.at("w")[0] == doctest::Approx(1.0 - 4e-4).epsilon(1e-10));
  CHECK(p.at("still")[0] == 2.0);
  CHECK(p.at("frozen")[0] == 3.0);
  CHECK(adam.moments().count("frozen") == 0);

  p.at("w").grad()[0] = std::numeric_limits<double>::quiet_NaN();
  const double before = p.at("w")[0];
  try {
    adam.step(p);
    FAIL("expected a non-finite gradient error");
  } catch (const NonFiniteGradientError& e) {
    CHECK(e.param() == "w");
  }
  CHECK(p.at("w")[0] == before);
}

TEST_CASE("grad_check error formula") {
  ParamStore p;
  p.add("w", "a", NumArray::vector({0.3, -1.2, 2.0}));
  const ValueFn value = [](ParamStore& s) {
    double t = 0;
    for (double v : s.at("w").data()) t += v * v;
    return t;
  };
  SUBCASE("correct gradient") {
    const auto r = grad_check(value, [](ParamStore& s) {
      for (std::size_t i = 0; i < 3; ++i) s.at("w").grad()[i] = 2 * s.at("w")[i];
    }, p);
    CHECK(r.max_relative_error < 1e-9);
  }
  SUBCASE("doubled gradient") {
    const auto r = grad_check(value, [](ParamStore& s) {
      for (std::size_t i = 0; i < 3; ++i) s.at("w").grad()[i] = 4 * s.at("w")[i];
    }, p);
    // ‖2n − n‖ / ‖2n‖
    CHECK(r.max_relative_error == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(r.max_coordinate_error == doctest::Approx(0.5).epsilon(1e-8));
  }
  SUBCASE("constant function") {
    const auto r = grad_check([](ParamStore&) { return 7.0; }, [](ParamStore&) {}, p);
    CHECK(r.max_relative_error == 0.0);
  }
  SUBCASE("non-finite value") {
    CHECK_THROWS_AS(grad_check([](ParamStore&) { return std::nan(""); }, [](ParamStore&) {}, p), EvaluationError);
  }
  CHECK(p.at("w")[1] == -1.2);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "storyforge_test_ckpt";
  std::filesystem::create_directories(dir);
  ParamStore p;
  p.add("a.w", "enc", NumArray::matrix(2, 2, {1.5, -0.0, 1e-300, 3.0}));
  p.add("b", "dec", NumArray::vector({std::nextafter(1.0, 2.0)}));
  save_checkpoint(dir / "m.ckpt", p, "{\"k\":1}");
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.params.same_values(p));
  CHECK(back.metadata == "{\"k\":1}");
  CHECK(back.params.group_of("b") == "dec");

  {
    std::ofstream f(dir / "bad.ckpt", std::ios::binary);
    f << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), FormatError);
  const auto size = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::copy_file(dir / "m.ckpt", dir / "cut.ckpt", std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "cut.ckpt", size - 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("param store freeze flags") {
  ParamStore p;
  p.add("x", "g1", NumArray::vector({1}));
  p.add("y", "g2", NumArray::vector({1}));
  CHECK_THROWS(p.add("x", "g1", NumArray::vector({2})));
  p.freeze("g1");
  CHECK(p.is_frozen("x"));
  CHECK_FALSE(p.is_frozen("y"));
  p.unfreeze_all();
  CHECK_FALSE(p.is_frozen("x"));
}
