// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracle.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/grad_check.hpp"
#include "storyforge/losses.hpp"

using namespace storyforge;

namespace {

std::vector<Var> scalars(Tape& tape, const std::vector<double>& xs) {
  std::vector<Var> out;
  for (double x : xs) out.push_back(tape.scalar(x));
  return out;
}

}  // namespace

TEST_CASE("negative log-likelihood") {
  Tape tape;
  CHECK(nll_loss(tape, scalars(tape, {0.0, 0.0, 0.0}), Mask{1, 1, 1}).scalar() == 0.0);
  const double uniform = std::log(1.0 / 32.0);
  CHECK(nll_loss(tape, scalars(tape, std::vector<double>(10, uniform)), Mask(10, 1)).scalar() ==
        doctest::Approx(10 * std::log(32.0)).epsilon(1e-14));
  const double a = nll_loss(tape, scalars(tape, {-1.0, -2.0, -7.0}), Mask{1, 1, 0}).scalar();
  const double b = nll_loss(tape, scalars(tape, {-1.0, -2.0, -0.5}), Mask{1, 1, 0}).scalar();
  CHECK(a == b);
  CHECK(a == 3.0);
  CHECK_THROWS_AS(nll_loss(tape, scalars(tape, {-1.0}), Mask{1, 1}), DimensionError);
}

TEST_CASE("ranking loss arithmetic") {
  Tape tape;
  CHECK(kRankMargin == 1.0);
  CHECK(rank_loss(tape, scalars(tape, {-2.0}), scalars(tape, {-5.0})).scalar() == 0.0);
  CHECK(rank_loss(tape, scalars(tape, {-5.0}), scalars(tape, {-2.0})).scalar() == 4.0);
  CHECK(rank_loss(tape, scalars(tape, {-3.0, -1.5, -9.0}), scalars(tape, {-3.0, -1.5, -9.0})).scalar() == 3.0);
  CHECK_THROWS_AS(rank_loss(tape, scalars(tape, {-1.0}), scalars(tape, {})), DimensionError);
}

TEST_CASE("ranking loss gradient pushes true sentences up") {
  ParamStore p;
  p.add("pos", "g", NumArray::vector({-5.0}));
  p.add("neg", "g", NumArray::vector({-2.0}));
  Tape tape;
  Binder bind(tape, p);
  const Var pos[] = {bind("pos")};
  const Var neg[] = {bind("neg")};
  tape.backward(rank_loss(tape, pos, neg));
  CHECK(p.at("pos").grad()[0] == -1.0);
  CHECK(p.at("neg").grad()[0] == 1.0);
}

TEST_CASE("reconstruction loss") {
  Tape tape;
  const std::vector<Var> z{tape.constant({1.0, 2.0}), tape.constant({0.5, -1.0})};
  CHECK(recon_loss(tape, z, z).scalar() == 0.0);
  const std::vector<Var> one_off{tape.constant({1.0, 3.0}), tape.constant({0.5, -1.0})};
  CHECK(recon_loss(tape, z, one_off).scalar() == 1.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<Var> a, b;
  double expected = 0;
  for (int j = 0; j < 4; ++j) {
    std::vector<double> x(6), y(6);
    for (int k = 0; k < 6; ++k) {
      x[k] = n(rng);
      y[k] = n(rng);
      expected += (x[k] - y[k]) * (x[k] - y[k]);
    }
    a.push_back(tape.constant(x));
    b.push_back(tape.constant(y));
  }
  CHECK(recon_loss(tape, a, b).scalar() == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(recon_loss(tape, z, std::vector<Var>{z[0]}), DimensionError);
  CHECK_THROWS_AS(recon_loss(tape, std::vector<Var>{tape.constant({1.0})}, std::vector<Var>{z[0]}), DimensionError);
}

TEST_CASE("total loss") {
  CHECK(kDefaultLambda == 0.2);
  CHECK(kDefaultMu == 0.8);
  Tape tape;
  const Var nll = tape.scalar(3.0), rank = tape.scalar(2.0), recon = tape.scalar(5.0);
  CHECK(total_loss(nll, rank, recon, 0.0, 0.0).scalar() == 3.0);
  CHECK(total_loss(nll, rank, recon, 0.2, 0.8).scalar() == doctest::Approx(3.0 + 0.4 + 4.0));
  LossReport r{3.0, 2.0, 5.0, 0.0, 4};
  CHECK(total_loss(r, 0.2, 0.8) == doctest::Approx(7.4));
  CHECK(r.per_word_nll() == 0.75);
  CHECK_THROWS_AS(total_loss(r, -0.1, 0.0), ConfigError);
  CHECK_THROWS_AS(total_loss(nll, rank, recon, 0.0, -1.0), ConfigError);
}

TEST_CASE("derangements") {
  std::mt19937_64 rng(5);
  CHECK(sample_derangement(1, rng).empty());
  CHECK(sample_derangement(0, rng).empty());
  std::set<std::vector<std::size_t>> seen;
  for (int t = 0; t < 400; ++t) {
    const auto d = sample_derangement(4, rng);
    CHECK(is_derangement(d));
    seen.insert(d);
  }
  // D(4) = 9
  CHECK(seen.size() == 9);
  CHECK_FALSE(is_derangement(std::vector<std::size_t>{1, 0, 2}));
  CHECK_FALSE(is_derangement(std::vector<std::size_t>{1, 1, 0}));
}
