#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lka/readiness/forest.hpp"
#include "lka/readiness/synthetic.hpp"
#include "lka/rng.hpp"

using namespace lka;
using namespace lka::readiness;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr Feature kCategoricals[] = {Feature::road_type, Feature::marking_condition, Feature::lighting,
                                     Feature::weather, Feature::surface};

void pin(std::vector<LevelRule>& rules, const std::string& level) {
  for (auto& l : rules) l.probability = l.name == level ? 1.0 : 0.0;
}

GeneratorConfig benign_config() {
  GeneratorConfig cfg;
  for (auto* r : {&cfg.road_type, &cfg.marking_condition, &cfg.lighting, &cfg.weather, &cfg.surface})
    pin(*r, r->front().name);
  return cfg;
}

// Labels depend on curvature alone; the categoricals are uniform noise.
Dataset kappa_only(std::size_t n, std::uint64_t seed, double cut = 0.006) {
  Rng rng(seed);
  const FeatureSchema schema;
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledExample ex;
    ex.features.kappa = rng.uniform(0.0, 0.015);
    ex.features.speed = rng.uniform(10.0, 38.0);
    for (Feature f : kCategoricals) ex.features.set(f, static_cast<double>(rng.index(schema.level_count(f))));
    ex.outcome = ex.features.kappa < cut ? Outcome::normal : Outcome::deviation;
    d.push_back(ex);
  }
  return d;
}

std::set<Feature> used_features(const ReadinessModel& m) {
  std::set<Feature> s;
  for (const auto& t : m.trees)
    for (const auto& n : t.nodes)
      if (!n.is_leaf()) s.insert(static_cast<Feature>(n.feature));
  return s;
}

}  // namespace

TEST_CASE("generator output is frozen for the default seed") {
  const auto d = generate_synthetic(5000, 20260101);
  REQUIRE(d.size() == 5000);
  CHECK(d[0].features.kappa == 0.002781685205420395);
  CHECK(d[0].features.speed == 26.571796435492892);
  CHECK(d[0].features.road_type == 2);
  CHECK(d[0].features.marking_condition == 0);
  CHECK(d[0].features.lighting == 0);
  CHECK(d[0].features.weather == 0);
  CHECK(d[0].features.surface == 2);
  CHECK(d[0].outcome == Outcome::normal);

  std::array<std::size_t, kClassCount> counts{};
  for (const auto& ex : d) ++counts[static_cast<std::size_t>(ex.outcome)];
  CHECK(counts == std::array<std::size_t, kClassCount>{1963, 2515, 522});
}

TEST_CASE("generator is a pure function of its inputs") {
  CHECK(generate_synthetic(300, 5) == generate_synthetic(300, 5));
  CHECK(generate_synthetic(300, 5) != generate_synthetic(300, 6));
  const auto longer = generate_synthetic(400, 5);
  const auto shorter = generate_synthetic(300, 5);
  CHECK(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  CHECK_THROWS_AS(generate_synthetic(0, 5), DomainError);
}

TEST_CASE("generator rule table") {
  SECTION("gentle curves in good conditions are almost all normal") {
    auto cfg = benign_config();
    cfg.kappa_max = 0.002;
    const auto d = generate_synthetic(1000, 11, cfg);
    const auto normal = std::count_if(d.begin(), d.end(), [](const auto& e) { return e.outcome == Outcome::normal; });
    CHECK(normal == 995);
  }
  SECTION("faded markings on sharp curves mostly deviate") {
    auto cfg = benign_config();
    pin(cfg.marking_condition, "faded");
    const auto d = generate_synthetic(1000, 13, cfg);
    std::size_t sharp = 0, dev = 0;
    for (const auto& e : d) {
      if (e.features.kappa < 0.011) continue;
      ++sharp;
      dev += e.outcome == Outcome::deviation ? 1 : 0;
    }
    const double share = static_cast<double>(dev) / static_cast<double>(sharp);
    CHECK(share == 0.7927272727272727);
    CHECK(share > 0.5);

    FeatureVector fv;
    fv.kappa = 0.012;
    fv.marking_condition = 1;
    CHECK(synthetic_deviation(cfg, fv) >= 0.25);
  }
  SECTION("deviation grows with curvature and disengagement with speed") {
    const GeneratorConfig cfg;
    FeatureVector a, b;
    for (int i = 0; i < 150; ++i) {
      a.kappa = 0.0001 * i;
      b.kappa = 0.0001 * (i + 1);
      CHECK(synthetic_deviation(cfg, a) < synthetic_deviation(cfg, b));
    }
    FeatureVector slow, fast;
    slow.kappa = fast.kappa = 0.01;
    slow.lighting = fast.lighting = 1;
    slow.speed = 20.0;
    fast.speed = 34.0;
    CHECK(disengagement_probability(cfg, fast) > 0.9);
    CHECK(disengagement_probability(cfg, slow) < 0.01);
  }
  SECTION("invalid configs are rejected") {
    GeneratorConfig cfg;
    cfg.version = 2;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.kappa_max = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.road_type[0].probability = 0.5;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.surface.resize(1);
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.hazard_base = 0.2;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.speed_min = 40.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    CHECK_NOTHROW(GeneratorConfig{}.validate());
  }
}

TEST_CASE("forest training") {
  SECTION("separable data is fit exactly") {
    const auto d = kappa_only(200, 1);
    const auto model = train(d, {20, 8, 5, 0, 3});
    CHECK(evaluate(model, d).accuracy == 1.0);
  }
  SECTION("degenerate inputs throw") {
    Dataset one_class = kappa_only(50, 2, 1.0);
    CHECK_THROWS_AS(train(one_class), DomainError);
    CHECK_THROWS_AS(train(Dataset{}), DomainError);
    CHECK_THROWS_AS(train(kappa_only(9, 2)), DomainError);
    CHECK_THROWS_AS(train(kappa_only(50, 2), {0, 8, 5, 0, 1}), DomainError);
    auto bad = kappa_only(50, 2);
    bad[3].features.surface = 7;
    CHECK_THROWS_AS(train(bad), DomainError);
  }
  SECTION("same seed, same model; different seed, different model") {
    const auto d = generate_synthetic(600, 8);
    const ForestParams p{10, 6, 5, 0, 77};
    CHECK(train(d, p) == train(d, p));
    ForestParams q = p;
    q.seed = 78;
    CHECK_FALSE(train(d, p) == train(d, q));
  }
  SECTION("node histograms are consistent") {
    const auto d = generate_synthetic(800, 9);
    const ForestParams p{15, 6, 5, 0, 4};
    const auto model = train(d, p);
    REQUIRE(model.trees.size() == 15);
    CHECK_THAT(model.class_priors[0] + model.class_priors[1] + model.class_priors[2], WithinAbs(1.0, 1e-12));
    for (const auto& t : model.trees) {
      CHECK(t.nodes[0].count() == d.size());
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) {
          CHECK(n.count() >= p.min_leaf);
          continue;
        }
        const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
        const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
        for (std::size_t c = 0; c < kClassCount; ++c) CHECK(n.histogram[c] == l.histogram[c] + r.histogram[c]);
      }
    }
  }
  SECTION("bootstrap is stratified") {
    const auto d = generate_synthetic(500, 10);
    ClassHistogram expected{};
    for (const auto& ex : d) ++expected[static_cast<std::size_t>(ex.outcome)];
    for (const auto& t : train(d, {5, 4, 5, 0, 1}).trees) CHECK(t.nodes[0].histogram == expected);
  }
}

TEST_CASE("forest prediction") {
  const auto d = generate_synthetic(3000, 12);
  const auto model = train(d, {40, 8, 5, 0, 12});
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto& fv = d[rng.index(d.size())].features;
    const auto p = predict(model, fv);
    double s = 0.0;
    for (double v : p.probabilities) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
  }

  FeatureVector heavy;
  heavy.kappa = 0.014;
  heavy.speed = 36.0;
  heavy.marking_condition = 1;
  heavy.lighting = 1;
  heavy.weather = 1;
  CHECK(predict(model, heavy).outcome == Outcome::disengagement);

  FeatureVector benign;
  benign.kappa = 0.001;
  benign.speed = 20.0;
  const auto p = predict(model, benign);
  CHECK(p.outcome == Outcome::normal);
  CHECK(p.probabilities[0] >= 0.9);

  ReadinessModel empty;
  CHECK_THROWS_AS(predict(empty, benign), DomainError);
}

TEST_CASE("variable importance") {
  SECTION("a curvature-only signal gives curvature nearly all the importance") {
    const auto model = train(kappa_only(1000, 21), {30, 8, 5, 0, 21});
    const auto imp = variable_importance(model);
    CHECK(imp.scores[0] > 0.9);
    CHECK(imp.ranking().front() == Feature::kappa);
    CHECK(imp.rank_of(Feature::kappa) == 0);
    double s = 0.0;
    for (double v : imp.scores) s += v;
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
  }
  SECTION("pure-noise labels spread the importance") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto d = kappa_only(600, 100 + seed);
      Rng rng(seed);
      for (auto& ex : d) ex.outcome = rng.bernoulli(0.5) ? Outcome::normal : Outcome::deviation;
      const auto imp = variable_importance(train(d, {20, 6, 5, 0, seed}));
      for (double v : imp.scores) CHECK(v <= 0.5);
    }
  }
  SECTION("rescrambling an uninformative column keeps the informative ranking") {
    auto d = generate_synthetic(2000, 22);
    const ForestParams p{40, 8, 5, 0, 22};
    const auto before = variable_importance(train(d, p));
    Rng rng(23);
    for (auto& ex : d) ex.features.road_type = static_cast<std::uint8_t>(rng.index(4));
    const auto after = variable_importance(train(d, p));
    CHECK(before.rank_of(Feature::kappa) == 0);
    CHECK(after.rank_of(Feature::kappa) == 0);
    for (Feature f : {Feature::speed, Feature::marking_condition}) {
      const auto a = static_cast<long>(before.rank_of(f)), b = static_cast<long>(after.rank_of(f));
      CHECK(std::abs(a - b) <= 1);
    }
  }
}

TEST_CASE("partial dependence") {
  SECTION("a feature no tree uses gives a flat curve") {
    const auto d = kappa_only(400, 31);
    const auto model = train(d, {15, 8, 5, kFeatureCount, 31});
    const auto used = used_features(model);
    REQUIRE(used == std::set<Feature>{Feature::kappa});
    std::vector<FeatureVector> bg;
    for (std::size_t i = 0; i < 50; ++i) bg.push_back(d[i].features);
    const std::vector<double> grid = {0, 1, 2, 3};
    const auto pd = partial_dependence(model, Feature::weather, grid, bg);
    for (const auto& pt : pd)
      for (std::size_t c = 0; c < kClassCount; ++c) CHECK(pt.probabilities[c] == pd[0].probabilities[c]);
  }
  SECTION("curvature pushes toward deviation") {
    const auto d = generate_synthetic(3000, 32);
    const auto model = train(d, {40, 8, 5, 0, 32});
    std::vector<FeatureVector> bg;
    for (std::size_t i = 0; i < 200; ++i) bg.push_back(d[i].features);
    std::vector<double> grid;
    for (int i = 0; i <= 30; ++i) grid.push_back(0.0005 * i);
    const auto pd = partial_dependence(model, "kappa", grid, bg);
    REQUIRE(pd.size() == grid.size());
    CHECK(pd.back().probabilities[1] > pd.front().probabilities[1] + 0.3);
    for (const auto& pt : pd) CHECK_THAT(pt.probabilities[0] + pt.probabilities[1] + pt.probabilities[2], WithinAbs(1.0, 1e-12));
    CHECK_THAT(steepest_rise(pd, Outcome::deviation), WithinAbs(0.006, 0.002));
  }
  SECTION("argument errors") {
    const auto d = kappa_only(100, 33);
    const auto model = train(d, {3, 4, 5, 0, 33});
    std::vector<FeatureVector> bg = {d[0].features};
    const std::vector<double> grid = {0.0};
    CHECK_THROWS_AS(partial_dependence(model, Feature::kappa, {}, bg), DomainError);
    CHECK_THROWS_AS(partial_dependence(model, Feature::kappa, grid, {}), DomainError);
    CHECK_THROWS_AS(partial_dependence(model, "torque", grid, bg), DomainError);
  }
}

TEST_CASE("steepest rise") {
  std::vector<DependencePoint> curve;
  for (int i = 0; i <= 10; ++i) {
    DependencePoint pt;
    pt.value = i;
    pt.probabilities[2] = 1.0 / (1.0 + std::exp(-(i - 6.5) * 3.0));
    curve.push_back(pt);
  }
  CHECK(steepest_rise(curve, Outcome::disengagement) == 6.5);
  CHECK(steepest_rise(std::span(curve).first(2), Outcome::normal) == 0.5);
  CHECK_THROWS_AS(steepest_rise(std::span(curve).first(1), Outcome::normal), DomainError);
}

TEST_CASE("classification metrics") {
  using O = Outcome;
  SECTION("worked example") {
    const std::vector<std::pair<O, O>> pairs = {{O::normal, O::normal},         {O::normal, O::deviation},
                                                {O::deviation, O::deviation},   {O::deviation, O::deviation},
                                                {O::disengagement, O::normal},  {O::disengagement, O::disengagement}};
    const auto m = compute_metrics(pairs);
    CHECK(m.n == 6);
    CHECK_THAT(m.accuracy, WithinRel(4.0 / 6.0, 1e-15));
    CHECK_THAT(m.precision[0], WithinRel(0.5, 1e-15));
    CHECK_THAT(m.precision[1], WithinRel(2.0 / 3.0, 1e-15));
    CHECK(m.precision[2] == 1.0);
    CHECK(m.recall[0] == 0.5);
    CHECK(m.recall[1] == 1.0);
    CHECK(m.recall[2] == 0.5);
    CHECK(m.confusion[2][0] == 1);
  }
  SECTION("a class never predicted has zero precision") {
    const std::vector<std::pair<O, O>> pairs = {{O::normal, O::normal}, {O::disengagement, O::normal}};
    const auto m = compute_metrics(pairs);
    CHECK(m.precision[2] == 0.0);
    CHECK(m.recall[1] == 0.0);
  }
  SECTION("matches a direct count on random labels") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::pair<O, O>> pairs;
      const auto n = 1 + rng.index(60);
      for (std::uint64_t i = 0; i < n; ++i)
        pairs.emplace_back(static_cast<O>(rng.index(3)), static_cast<O>(rng.index(3)));
      const auto m = compute_metrics(pairs);
      std::size_t correct = 0;
      for (const auto& [t, p] : pairs) correct += t == p ? 1 : 0;
      CHECK(m.accuracy == static_cast<double>(correct) / static_cast<double>(n));
      for (int c = 0; c < 3; ++c) {
        std::size_t tp = 0, pp = 0, ap = 0;
        for (const auto& [t, p] : pairs) {
          tp += (t == static_cast<O>(c) && p == static_cast<O>(c)) ? 1 : 0;
          pp += p == static_cast<O>(c) ? 1 : 0;
          ap += t == static_cast<O>(c) ? 1 : 0;
        }
        CHECK(m.precision[c] == (pp ? static_cast<double>(tp) / static_cast<double>(pp) : 0.0));
        CHECK(m.recall[c] == (ap ? static_cast<double>(tp) / static_cast<double>(ap) : 0.0));
      }
    }
    CHECK_THROWS_AS(compute_metrics({}), DomainError);
  }
}
