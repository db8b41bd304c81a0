// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "storyforge/decoder.hpp"
#include "storyforge/diagnostics.hpp"
#include "storyforge/errors.hpp"
#include "storyforge/grad_check.hpp"
#include "storyforge/photo_encoder.hpp"
#include "storyforge/reconstructor.hpp"
#include "storyforge/scene_encoder.hpp"
#include "storyforge/synth.hpp"

using namespace storyforge;
using oracle::Vec;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.feature_dim = 3;
  c.photo_hidden = 2;
  c.attn_hidden = 3;
  c.dec_hidden = 3;
  c.embed_dim = 2;
  c.vocab_size = 7;
  c.max_photos = 4;
  c.max_words = 5;
  c.sentences = 3;
  return c;
}

std::vector<NumArray> random_photos(std::size_t m, std::size_t f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  std::vector<NumArray> out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> v(f);
    for (auto& x : v) x = n(rng);
    out.push_back(NumArray::vector(v));
  }
  return out;
}

std::vector<Var> constants(Tape& tape, const std::vector<NumArray>& xs) {
  std::vector<Var> out;
  for (const auto& x : xs) out.push_back(tape.constant(x));
  return out;
}

}  // namespace

TEST_CASE("photo encoder zero parameters") {
  const auto c = small_config();
  const auto enc = encode_photos(zero_params(c), random_photos(4, 3, 1));
  for (double v : enc.columns.data()) CHECK(v == 0.0);
  CHECK(enc.columns.rows() == 4);
  CHECK(enc.columns.cols() == c.scene_dim());
}

TEST_CASE("photo encoder matches step-by-step recurrences") {
  const auto c = small_config();
  ParamStore p = zero_params(c);
  oracle::randomize(p, 21);
  for (std::size_t m : {1, 3}) {
    const auto photos = random_photos(m, 3, m);
    const auto enc = encode_photos(p, photos);
    std::vector<Vec> fwd(m), bwd(m);
    Vec h(2, 0.0);
    for (std::size_t i = 0; i < m; ++i) fwd[i] = h = oracle::gru(p, names::kPhotoForward, oracle::values(photos[i]), h);
    h.assign(2, 0.0);
    for (std::size_t i = m; i-- > 0;) bwd[i] = h = oracle::gru(p, names::kPhotoBackward, oracle::values(photos[i]), h);
    for (std::size_t i = 0; i < m; ++i) {
      Vec v = oracle::concat(fwd[i], bwd[i]);
      const auto x = oracle::values(photos[i]);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::max(0.0, v[k] + oracle::row_dot(p.at(names::kPhotoSkip), k, x));
      CHECK(oracle::max_abs_diff(oracle::row(enc.columns, i), v) < 1e-14);
    }
    CHECK(oracle::max_abs_diff(oracle::values(enc.forward_final), fwd[m - 1]) < 1e-14);
    CHECK(oracle::max_abs_diff(oracle::values(enc.backward_final), bwd[0]) < 1e-14);
  }
  CHECK_THROWS_AS(encode_photos(p, random_photos(2, 4, 1)), DimensionError);
  CHECK_THROWS_AS(encode_photos(p, std::vector<NumArray>{}), Error);
}

TEST_CASE("boundary detector saturation") {
  const auto c = small_config();
  ParamStore p = zero_params(c);
  const auto v = NumArray::zeros(c.scene_dim());
  p.at(names::kDetectorBias)[0] = -10;
  auto s = detect_boundary(v, v, p);
  CHECK(s.soft < 1e-4);
  CHECK(s.flag == 0);
  p.at(names::kDetectorBias)[0] = 10;
  s = detect_boundary(v, v, p);
  CHECK(s.soft > 1 - 1e-4);
  CHECK(s.flag == 1);
}

TEST_CASE("scene encoder with forced decisions") {
  const auto c = small_config();
  ParamStore p = zero_params(c);
  oracle::randomize(p, 4);
  const std::size_t m = 4, dv = c.scene_dim();
  const auto photos = encode_photos(p, random_photos(m, 3, 9)).columns;
  std::vector<Vec> v;
  for (std::size_t i = 0; i < m; ++i) v.push_back(oracle::row(photos, i));

  SUBCASE("no boundary") {
    const auto seg = encode_scenes(p, photos, forced_decision({0, 0, 0, 0}));
    CHECK(seg.scene_count == 1);
    Vec h(dv, 0.0);
    for (const auto& x : v) h = oracle::gru(p, names::kSceneGru, x, h);
    CHECK(oracle::max_abs_diff(oracle::row(seg.slots, m), h) < 1e-14);
    for (std::size_t s = 0; s < m; ++s) {
      CHECK(seg.scene_mask[s] == 0);
      for (double x : oracle::row(seg.slots, s)) CHECK(x == 0.0);
    }
  }
  SUBCASE("boundary at every photo after the first") {
    const auto seg = encode_scenes(p, photos, forced_decision({1, 1, 1, 1}));
    CHECK(seg.scene_count == m);
    CHECK(seg.scene_mask[0] == 0);
    for (std::size_t s = 1; s <= m; ++s) {
      CHECK(seg.scene_mask[s] == 1);
      const Vec one_step = oracle::gru(p, names::kSceneGru, v[s - 1], Vec(dv, 0.0));
      CHECK(oracle::max_abs_diff(oracle::row(seg.slots, s), one_step) < 1e-14);
    }
  }
  SUBCASE("reset clears the state") {
    const auto seg = encode_scenes(p, photos, forced_decision({0, 0, 1, 0}));
    CHECK(seg.scene_count == 2);
    Vec h(dv, 0.0);
    h = oracle::gru(p, names::kSceneGru, v[0], h);
    h = oracle::gru(p, names::kSceneGru, v[1], h);
    CHECK(oracle::max_abs_diff(oracle::row(seg.slots, 2), h) < 1e-14);
    h = oracle::gru(p, names::kSceneGru, v[2], Vec(dv, 0.0));
    h = oracle::gru(p, names::kSceneGru, v[3], h);
    CHECK(oracle::max_abs_diff(oracle::row(seg.slots, 4), h) < 1e-14);
  }
}

TEST_CASE("hand-set detector recovers synthetic boundaries") {
  const auto c = oracle::detector_config(4);
  const auto p = oracle::detector_params(c);
  SynthSpec spec;
  spec.albums = 40;
  spec.feature_dim = 4;
  spec.noise_scale = 0.0;
  spec.photos_max = 4;
  spec.scenes_max = 4;
  spec.seed = 13;
  std::size_t boundaries = 0;
  for (const auto& album : synth_dataset(spec).albums) {
    std::vector<NumArray> photos;
    for (const auto& f : album.features) photos.push_back(NumArray::vector(f));
    const auto seg = encode_scenes(p, encode_photos(p, photos).columns);
    const auto& gold = *album.gold_boundaries;
    CHECK(seg.flags[0] == 0);
    for (std::size_t i = 1; i < gold.size(); ++i) {
      CHECK(int(seg.flags[i]) == gold[i]);
      boundaries += gold[i];
    }
  }
  CHECK(boundaries > 40);
}

TEST_CASE("straight-through gradients equal a soft relaxation with the same forward pass") {
  const auto c = small_config();
  ParamStore base = zero_params(c);
  oracle::randomize(base, 8, 1.0);
  const auto features = random_photos(4, 3, 2);
  // k = soft + (hard − soft) carries the hard value forward and d k / d soft = 1
  const BoundaryDecision relaxed = [](Var soft, std::size_t) {
    const double hard = soft.scalar() > 0.5 ? 1.0 : 0.0;
    return ops::add(soft, soft.tape().scalar(hard - soft.scalar()));
  };
  const auto grads = [&](const BoundaryDecision& decide) {
    ParamStore p = base;
    Tape tape;
    Binder bind(tape, p);
    const auto photos = encode_photos(bind, features);
    const auto scenes = encode_scenes(bind, photos.columns, decide);
    std::vector<Var> rows(scenes.slots.begin(), scenes.slots.end());
    Var loss = ops::squared_distance(ops::sum(rows), tape.zeros(c.scene_dim()));
    tape.backward(loss);
    Vec g;
    for (const auto& name : {names::kDetectorPhoto, names::kDetectorHidden, names::kDetectorBias}) {
      const auto s = p.at(name).grad();
      g.insert(g.end(), s.begin(), s.end());
    }
    return g;
  };
  const Vec straight = grads(straight_through_decision());
  const Vec soft = grads(relaxed);
  CHECK(oracle::max_abs_diff(straight, soft) <= 1e-10);
  double norm = 0;
  for (double x : straight) norm += std::abs(x);
  CHECK(norm > 0);
}

TEST_CASE("scene slot layout") {
  CHECK(scene_slot_position(0, 3, 5) == 5);
  CHECK(scene_slot_position(2, 3, 5) == 7);
  CHECK(scene_slot_position(3, 3, 5) == 10);
  CHECK(small_config().attention_length() == 9);
}

TEST_CASE("attention") {
  auto c = small_config();
  c.max_photos = 2;
  const std::size_t length = c.attention_length(), dv = c.scene_dim();
  ParamStore p = zero_params(c);
  oracle::randomize(p, 6);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> data(length * dv);
  for (auto& x : data) x = n(rng);
  const auto columns = NumArray::matrix(length, dv, data);
  std::vector<double> hv(c.attn_hidden), av(length);
  for (auto& x : hv) x = n(rng);
  for (auto& x : av) x = std::abs(n(rng));
  const auto hidden = NumArray::vector(hv), alpha_prev = NumArray::vector(av);

  SUBCASE("one valid column") {
    const auto r = attend(p, columns, Mask{0, 0, 1, 0, 0}, hidden, alpha_prev);
    CHECK(r.alpha[2] == 1.0);
    CHECK(oracle::max_abs_diff(oracle::values(r.z), oracle::row(columns, 2)) == 0.0);
  }
  SUBCASE("zero score vector gives the mean") {
    ParamStore q = p;
    for (auto& x : q.at(names::kAttnScore).data()) x = 0;
    const Mask mask{1, 1, 0, 1, 0};
    const auto r = attend(q, columns, mask, hidden, alpha_prev);
    for (std::size_t l = 0; l < length; ++l) CHECK(r.alpha[l] == doctest::Approx(mask[l] / 3.0).epsilon(1e-15));
    for (std::size_t k = 0; k < dv; ++k)
      CHECK(r.z[k] == doctest::Approx((columns.at(0, k) + columns.at(1, k) + columns.at(3, k)) / 3).epsilon(1e-13));
  }
  SUBCASE("direct evaluation") {
    const Mask mask{1, 0, 1, 1, 1};
    const auto r = attend(p, columns, mask, hidden, alpha_prev);
    const Vec h = oracle::gru(p, names::kAttnGru, av, hv);
    CHECK(oracle::max_abs_diff(oracle::values(r.hidden), h) < 1e-14);
    Vec score(length, 0.0);
    double total = 0;
    for (std::size_t l = 0; l < length; ++l) {
      if (!mask[l]) continue;
      const Vec col = oracle::row(columns, l);
      for (std::size_t k = 0; k < c.attn_hidden; ++k)
        score[l] += p.at(names::kAttnScore)[k] *
                    std::tanh(oracle::row_dot(p.at(names::kAttnHidden), k, h) +
                              oracle::row_dot(p.at(names::kAttnColumns), k, col) + p.at(names::kAttnBias)[k]);
      total += std::exp(score[l]);
    }
    Vec z(dv, 0.0);
    for (std::size_t l = 0; l < length; ++l) {
      const double a = mask[l] ? std::exp(score[l]) / total : 0.0;
      CHECK(r.alpha[l] == doctest::Approx(a).epsilon(1e-13));
      for (std::size_t k = 0; k < dv; ++k) z[k] += a * columns.at(l, k);
    }
    CHECK(oracle::max_abs_diff(oracle::values(r.z), z) < 1e-13);
  }
  CHECK_THROWS_AS(attend(p, columns, Mask(length, 0), hidden, alpha_prev), InvalidMaskError);
}

TEST_CASE("attention state starts from zero weights") {
  const auto c = small_config();
  ParamStore p = zero_params(c);
  oracle::randomize(p, 3);
  Tape tape;
  Binder bind(tape, p);
  const auto photos = encode_photos(bind, random_photos(3, 3, 5));
  const auto state = initial_attention_state(bind, photos, c.attention_length());
  for (double x : state.alpha_prev.value()) CHECK(x == 0.0);
  CHECK(state.alpha_prev.size() == c.attention_length());
}

TEST_CASE("sentence log-probability") {
  SUBCASE("uniform distribution from a zero output layer") {
    const auto c = small_config();
    ParamStore p = zero_params(c);
    oracle::randomize(p, 2);
    for (auto& x : p.at(names::kMlpOut).data()) x = 0;
    for (auto& x : p.at(names::kMlpOutBias).data()) x = 0;
    Tape tape;
    Binder bind(tape, p);
    const std::vector<TokenId> ref{4, 5, 6, kEos};
    const auto s = sentence_log_prob(bind, tape.constant(Vec(c.scene_dim(), 0.3)), ref);
    CHECK(s.log_prob.scalar() == doctest::Approx(4 * std::log(1.0 / 7.0)).epsilon(1e-14));
  }
  SUBCASE("one-word vocabulary by hand") {
    auto c = small_config();
    c.vocab_size = 5;
    ParamStore p = zero_params(c);
    oracle::randomize(p, 17, 0.9);
    const Vec z{0.4, -0.2, 0.7, 0.1};
    Tape tape;
    Binder bind(tape, p);
    const TokenId w = 4;
    const auto s = sentence_log_prob(bind, tape.constant(z), std::vector<TokenId>{w, kEos});

    const auto& E = p.at(names::kEmbedding);
    const auto step = [&](TokenId prev, const Vec& h, TokenId target, Vec& next) {
      next = oracle::gru(p, names::kDecoderGru, oracle::concat(oracle::row(E, prev), z), h);
      const Vec in = oracle::concat(next, z);
      Vec mid(c.dec_hidden);
      for (std::size_t k = 0; k < mid.size(); ++k)
        mid[k] = std::tanh(oracle::row_dot(p.at(names::kMlpHidden), k, in) + p.at(names::kMlpHiddenBias)[k]);
      double total = 0, chosen = 0;
      for (std::size_t t = 0; t < c.vocab_size; ++t) {
        const double logit = oracle::row_dot(p.at(names::kMlpOut), t, mid) + p.at(names::kMlpOutBias)[t];
        total += std::exp(logit);
        if (t == std::size_t(target)) chosen = logit;
      }
      return chosen - std::log(total);
    };
    Vec h1, h2;
    const double lp1 = step(kBos, Vec(c.dec_hidden, 0.0), w, h1);
    const double lp2 = step(w, h1, kEos, h2);
    CHECK(s.word_log_probs[0].scalar() == doctest::Approx(lp1).epsilon(1e-13));
    CHECK(s.word_log_probs[1].scalar() == doctest::Approx(lp2).epsilon(1e-13));
    CHECK(s.log_prob.scalar() == doctest::Approx(lp1 + lp2).epsilon(1e-13));
  }
  SUBCASE("out-of-range ids") {
    const auto c = small_config();
    const auto p = zero_params(c);
    Tape tape;
    Binder bind(tape, p);
    CHECK_THROWS_AS(sentence_log_prob(bind, tape.zeros(c.scene_dim()), std::vector<TokenId>{7}), DimensionError);
  }
}

TEST_CASE("decoding") {
  const auto c = small_config();
  ParamStore p = init_params(c, 3);
  const auto photos = random_photos(3, 3, 4);
  const auto a = generate_story(p, c, photos);
  const auto b = generate_story(p, c, photos);
  REQUIRE(a.sentences.size() == c.sentences);
  for (std::size_t j = 0; j < a.sentences.size(); ++j) {
    CHECK(a.sentences[j].tokens == b.sentences[j].tokens);
    CHECK(a.sentences[j].tokens.size() <= c.max_words + 1);
  }
  const auto wide = generate_story(p, c, photos, DecodeOptions{4});
  for (std::size_t j = 0; j < a.sentences.size(); ++j)
    CHECK(wide.sentences[j].log_prob >= a.sentences[j].log_prob - 1e-12);

  // zero parameters tie every token; the lowest id wins
  const auto flat = generate_story(zero_params(c), c, photos);
  CHECK(flat.sentences[0].tokens == std::vector<TokenId>(c.max_words + 1, 0));
  CHECK_THROWS_AS(generate_story(p, c, random_photos(5, 3, 1)), DimensionError);
}

TEST_CASE("reconstructor") {
  const auto c = small_config();
  ParamStore p = zero_params(c);
  const std::size_t v = c.vocab_size, dv = c.scene_dim();
  SUBCASE("zero logits and parameters") {
    const auto z = reconstruct(p, std::vector<NumArray>{NumArray::zeros(v), NumArray::zeros(v)});
    for (double x : z.data()) CHECK(x == 0.0);
  }
  oracle::randomize(p, 12);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  std::vector<NumArray> logits;
  for (int t = 0; t < 3; ++t) {
    Vec d(v);
    for (auto& x : d) x = n(rng);
    logits.push_back(NumArray::vector(d));
  }
  SUBCASE("single step uses the logits as their own mean") {
    const Vec d = oracle::values(logits[0]);
    const Vec c1 = oracle::gru(p, names::kReconGru, oracle::concat(d, d), Vec(dv, 0.0));
    CHECK(oracle::max_abs_diff(oracle::values(reconstruct(p, std::span(logits).first(1))), c1) < 1e-14);
  }
  SUBCASE("three steps") {
    Vec mean(v, 0.0);
    for (const auto& d : logits)
      for (std::size_t k = 0; k < v; ++k) mean[k] += d[k] / 3.0;
    Vec h(dv, 0.0), avg(dv, 0.0);
    for (const auto& d : logits) {
      h = oracle::gru(p, names::kReconGru, oracle::concat(oracle::values(d), mean), h);
      for (std::size_t k = 0; k < dv; ++k) avg[k] += h[k] / 3.0;
    }
    CHECK(oracle::max_abs_diff(oracle::values(reconstruct(p, logits)), avg) < 1e-13);
  }
  CHECK_THROWS_AS(reconstruct(p, std::vector<NumArray>{}), Error);
  CHECK_THROWS_AS(reconstruct(p, std::vector<NumArray>{NumArray::zeros(v + 1)}), DimensionError);
}

TEST_CASE("parameters of a configuration") {
  const auto c = small_config();
  const auto p = init_params(c, 1);
  CHECK_NOTHROW(check_params(p, c));
  auto other = c;
  other.vocab_size = 9;
  CHECK_THROWS(check_params(p, other));
  CHECK(p.group_of(names::kReconGru + ".w_ih") == groups::kReconstructor);
  CHECK(p.at(names::kAttnGru + ".w_ih").cols() == c.attention_length());
  CHECK(p.at(names::kPhotoSkip).rows() == 2 * c.photo_hidden);
  CHECK(init_params(c, 1).same_values(p));
  CHECK_FALSE(init_params(c, 2).same_values(p));
}

TEST_CASE("pipeline gradient check reuses the forward pass without changing the result") {
  const PipelineCheckSpec spec;
  PipelineCase c = make_pipeline_case(spec, 4);
  const BoundaryDecision decide = forced_decision(c.flags);
  const auto plain = grad_check(
      [&](const Binder& bind) {
        return story_loss(bind, c.config, c.album, c.album.stories[0], c.derangement,
                          LossWeights{spec.lambda, spec.mu, true}, decide)
            .total;
      },
      c.params, spec.delta);
  const auto fast = pipeline_grad_check(spec, 4);
  CHECK(fast.coordinates == plain.coordinates);
  CHECK(fast.max_relative_error == plain.max_relative_error);
  CHECK(fast.max_coordinate_error == plain.max_coordinate_error);
  CHECK(fast.worst_numeric == plain.worst_numeric);
  CHECK(fast.max_relative_error < 1e-4);
}
