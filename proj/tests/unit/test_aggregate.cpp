#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "echopipe/aggregate.hpp"
#include "echopipe/error.hpp"
#include "oracles.hpp"

using namespace echopipe;

namespace {

std::vector<double> row_for(int label, double p) {
  std::vector<double> r(3, (1.0 - p) / 2.0);
  r[static_cast<std::size_t>(label)] = p;
  return r;
}

ViewPrediction make_view(ViewTag v, int label, double confidence) {
  ViewPrediction p;
  p.view = v;
  p.label = label;
  p.confidence = confidence;
  p.representative_probs = row_for(label, 0.5 + 0.1 * static_cast<int>(v));
  return p;
}

// Visits every sequence of `n` symbols drawn from [0, base).
template <typename F>
void for_each_sequence(std::size_t n, std::size_t base, F&& f) {
  std::vector<std::size_t> digits(n, 0);
  while (true) {
    f(digits);
    std::size_t i = 0;
    while (i < n && ++digits[i] == base) digits[i++] = 0;
    if (i == n) break;
  }
}

}  // namespace

TEST_CASE("view_vote: counting examples") {
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  std::vector<std::vector<double>> probs;
  for (int l : labels) probs.push_back(row_for(l, 0.7));
  const auto v = view_vote(labels, probs);
  CHECK(v.label == 1);
  CHECK(v.confidence == doctest::Approx(0.4));
  CHECK(v.vote_count == 4);

  const std::vector<int> unanimous(10, 2);
  const auto u = view_vote(unanimous, std::vector<std::vector<double>>(10, row_for(2, 0.9)));
  CHECK(u.label == 2);
  CHECK(u.confidence == 1.0);
  CHECK_THROWS_AS(view_vote(std::vector<int>{}, {}), Error);
}

TEST_CASE("view_vote: clip ties go to the higher mean probability, then the more severe class") {
  const auto v = view_vote({0, 1}, {row_for(0, 0.9), row_for(1, 0.6)});
  CHECK(v.label == 0);
  const auto w = view_vote({0, 1}, {row_for(0, 0.6), row_for(1, 0.6)});
  CHECK(w.label == 1);
  CHECK(w.representative_probs == row_for(1, 0.6));
}

TEST_CASE("view_vote: exhaustive oracle equivalence (n <= 5, 3 classes, probability grid)") {
  const std::array<double, 3> grid = {0.4, 0.6, 0.8};
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    for_each_sequence(n, 9, [&](const std::vector<std::size_t>& d) {
      std::vector<int> labels;
      std::vector<std::vector<double>> probs;
      for (std::size_t s : d) {
        labels.push_back(static_cast<int>(s / 3));
        probs.push_back(row_for(labels.back(), grid[s % 3]));
      }
      const auto got = view_vote(labels, probs);
      const auto want = oracle::view_vote(labels, probs);
      REQUIRE(got.label == want.label);
      REQUIRE(got.confidence == want.confidence);
      for (std::size_t c = 0; c < 3; ++c) REQUIRE(got.representative_probs[c] == doctest::Approx(want.probs[c]));
      // C * n is the integer plurality count.
      REQUIRE(got.confidence * static_cast<double>(n) == doctest::Approx(static_cast<double>(got.vote_count)));
      REQUIRE(got.confidence > 0.0);
      REQUIRE(got.confidence <= 1.0);
      ++cases;
    });
  }
  CHECK(cases == 9 + 81 + 729 + 6561 + 59049);
}

TEST_CASE("view_vote: permutation invariance and monotonicity") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_real_distribution<double> pr(0.34, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 9;
    std::vector<int> labels(n);
    std::vector<std::vector<double>> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = lab(rng);
      probs[i] = row_for(labels[i], pr(rng));
    }
    const auto base = view_vote(labels, probs);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> l2;
    std::vector<std::vector<double>> p2;
    for (std::size_t i : order) {
      l2.push_back(labels[i]);
      p2.push_back(probs[i]);
    }
    const auto shuffled = view_vote(l2, p2);
    REQUIRE(shuffled.label == base.label);
    REQUIRE(shuffled.confidence == base.confidence);

    // One more vote for the winner, with its own mean probability, keeps it winning.
    labels.push_back(base.label);
    probs.push_back(base.representative_probs);
    const auto more = view_vote(labels, probs);
    REQUIRE(more.label == base.label);
    REQUIRE(more.vote_count == base.vote_count + 1);
  }
}

TEST_CASE("patient_vote: examples") {
  const auto a = patient_vote({make_view(ViewTag::PLAX, 0, 0.5), make_view(ViewTag::A4C, 0, 0.5),
                               make_view(ViewTag::PSAX_P, 1, 0.9)});
  CHECK(a.label == 0);
  CHECK_FALSE(a.tie_broken);

  const auto b = patient_vote({make_view(ViewTag::PLAX, 0, 0.9), make_view(ViewTag::A4C, 1, 0.6)});
  CHECK(b.label == 0);
  CHECK(b.tie_broken);
  CHECK(b.winning_view == ViewTag::PLAX);
  CHECK(b.confidence == 0.9);

  const auto c = patient_vote({make_view(ViewTag::PLAX, 0, 0.7), make_view(ViewTag::A4C, 2, 0.7)});
  CHECK(c.label == 2);
  CHECK(c.tie_broken);

  const auto u = patient_vote({make_view(ViewTag::PLAX, 1, 0.7), make_view(ViewTag::A4C, 1, 0.4)});
  CHECK(u.label == 1);
  CHECK_FALSE(u.tie_broken);
  CHECK_THROWS_AS(patient_vote({}), Error);
}

TEST_CASE("patient_vote: exhaustive oracle equivalence (<= 4 views, confidence grid 0.2..1.0)") {
  const std::array<double, 5> grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    for_each_sequence(n, 15, [&](const std::vector<std::size_t>& d) {
      std::vector<ViewPrediction> views;
      std::vector<int> labels;
      std::vector<double> conf;
      for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(static_cast<int>(d[i] / 5));
        conf.push_back(grid[d[i] % 5]);
        views.push_back(make_view(kAllViews[i], labels.back(), conf.back()));
      }
      const auto got = patient_vote(views);
      const auto want = oracle::patient_vote(labels, conf);
      REQUIRE(got.label == want.label);
      REQUIRE(got.tie_broken == want.tie_broken);
      REQUIRE(got.confidence == want.confidence);
      ++cases;
    });
  }
  CHECK(cases == 15 + 225 + 3375 + 50625);
}

TEST_CASE("patient_vote: permutation invariance") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_int_distribution<int> cf(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ViewPrediction> views;
    for (auto v : kAllViews) views.push_back(make_view(v, lab(rng), 0.2 * cf(rng)));
    const auto base = patient_vote(views);
    const auto base_probs = multi_view_probs(views);
    std::shuffle(views.begin(), views.end(), rng);
    const auto again = patient_vote(views);
    REQUIRE(again.label == base.label);
    REQUIRE(again.tie_broken == base.tie_broken);
    REQUIRE(again.winning_view == base.winning_view);
    REQUIRE(multi_view_probs(views) == base_probs);
  }
}

TEST_CASE("multi_view_probs: most confident supporting view, fixed view order on ties") {
  const auto single = make_view(ViewTag::A4C, 1, 0.6);
  CHECK(multi_view_probs({single}) == single.representative_probs);

  const auto hi = make_view(ViewTag::PSAX_S, 2, 0.9);
  const auto lo = make_view(ViewTag::PLAX, 2, 0.7);
  const auto other = make_view(ViewTag::A4C, 0, 1.0);
  CHECK(multi_view_probs({lo, other, hi}) == hi.representative_probs);

  const auto p1 = make_view(ViewTag::PSAX_A, 1, 0.8);
  const auto p2 = make_view(ViewTag::PLAX, 1, 0.8);
  CHECK(multi_view_probs({p1, p2}) == p2.representative_probs);
  CHECK(multi_view_probs({p2, p1}) == p2.representative_probs);
  CHECK_THROWS_AS(multi_view_probs({}), Error);
}
