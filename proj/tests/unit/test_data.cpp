#include "support.hpp"

#include "vigor/data/dataset.hpp"
#include "vigor/data/split.hpp"
#include "vigor/data/synthetic.hpp"
#include "vigor/error.hpp"
#include "vigor/nn/layers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace vigor;

TEST_SUITE("data") {

TEST_CASE("hand-written CSV round-trips exactly") {
  const std::string text = "age,T,weight,Y\n31,1,2.5,0\n27.25,0,-0.125,1\n40,1,3e-3,1\n";
  const auto ds = data::parse_csv(text);
  CHECK(ds.size() == 3);
  CHECK(ds.column_names == std::vector<std::string>{"age", "weight"});
  CHECK(ds.x == nn::Matrix{{31, 2.5}, {27.25, -0.125}, {40, 3e-3}});
  CHECK(ds.t == std::vector<double>{1, 0, 1});
  CHECK(ds.y == std::vector<double>{0, 1, 1});

  const auto again = data::parse_csv(data::to_csv(ds));
  CHECK(again.x == ds.x);
  CHECK(again.t == ds.t);
  CHECK(again.y == ds.y);
  CHECK(again.column_names == ds.column_names);
}

TEST_CASE("save/load round trip on synthetic data is exact") {
  data::SyntheticSpec spec;
  spec.n = 150;
  const auto syn = data::generate_synthetic(spec);
  const auto dir = testing::scratch_dir("csv");
  data::save_csv(syn.dataset, dir / "d.csv");
  const auto loaded = data::load_csv(dir / "d.csv");
  CHECK(loaded.x == syn.dataset.x);
  CHECK(loaded.t == syn.dataset.t);
  CHECK(loaded.y == syn.dataset.y);
  // ground truth never reaches the file
  const auto text = testing::slurp(dir / "d.csv");
  CHECK(text.find("u_star") == std::string::npos);
  CHECK(text.substr(0, text.find('\n')) == "x1,x2,x3,x4,x5,x6,t,y");
  CHECK_FALSE(loaded.u_star.has_value());
  CHECK_FALSE(loaded.true_ate.has_value());
}

TEST_CASE("candidate column is written and read back as u_hat") {
  auto ds = data::parse_csv("a,t,y\n1,0,1\n2,1,0\n3,1,1\n");
  ds = ds.with_u_hat({0.5, -1.5, 2.0});
  const auto text = data::to_csv(ds);
  CHECK(text.substr(0, text.find('\n')) == "a,t,y,u_hat");
}

TEST_CASE("schema and parse errors") {
  SUBCASE("non-binary treatment names the row") {
    try {
      data::parse_csv("a,t,y\n1,0,1\n2,2,0\n");
      FAIL("expected schema error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("schema error") != std::string::npos);
      CHECK(msg.find("row 2") != std::string::npos);
    }
  }
  SUBCASE("ragged row reports the line number") {
    try {
      data::parse_csv("a,t,y\n1,0,1\n2,1\n");
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("missing values are rejected with row numbers") {
    try {
      data::parse_csv("a,b,t,y\n1,,0,1\n2,3,1,0\nNA,4,1,1\n");
      FAIL("expected validation error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("1") != std::string::npos);
      CHECK(msg.find("3") != std::string::npos);
    }
  }
  SUBCASE("treatment and outcome columns are required") {
    CHECK_THROWS_AS(data::parse_csv("a,y\n1,0\n"), ParseError);
    CHECK_THROWS_AS(data::parse_csv("a,t\n1,0\n"), ParseError);
  }
  SUBCASE("duplicate covariate names") { CHECK_THROWS_AS(data::parse_csv("a,a,t,y\n1,2,0,1\n"), ValidationError); }
}

TEST_CASE("Twins-shaped file loads with 15 covariates") {
  Rng rng(1);
  std::string text;
  for (int c = 1; c <= 15; ++c) text += "cov" + std::to_string(c) + ",";
  text += "t,y\n";
  for (int i = 0; i < 20000; ++i) {
    for (int c = 0; c < 15; ++c) text += std::to_string(static_cast<int>(rng.below(5))) + ",";
    text += std::string(rng.bernoulli(0.5) ? "1" : "0") + "," + (rng.bernoulli(0.2) ? "1" : "0") + "\n";
  }
  const auto ds = data::parse_csv(text);
  CHECK(ds.size() == 20000);
  CHECK(ds.covariate_count() == 15);
}

TEST_CASE("synthetic generator") {
  SUBCASE("fixed seed regenerates bitwise") {
    data::SyntheticSpec spec;
    spec.seed = 42;
    const auto a = data::generate_synthetic(spec);
    const auto b = data::generate_synthetic(spec);
    CHECK(data::to_csv(a.dataset) == data::to_csv(b.dataset));
    CHECK(*a.dataset.u_star == *b.dataset.u_star);
    CHECK(*a.dataset.true_ate == *b.dataset.true_ate);
  }
  SUBCASE("covariates are standardised") {
    const auto syn = data::generate_synthetic({});
    for (std::size_t c = 0; c < syn.dataset.covariate_count(); ++c) {
      const auto col = syn.dataset.x.column_copy(c);
      double mean = 0, var = 0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(col.size());
      for (double v : col) var += (v - mean) * (v - mean);
      var /= static_cast<double>(col.size());
      CHECK(std::abs(mean) < 1e-12);
      CHECK(std::abs(var - 1.0) < 1e-12);
    }
  }
  SUBCASE("true ATE recomputes from the documented formula") {
    data::SyntheticSpec spec;
    spec.tau = -0.3;
    spec.outcome_bias = 0.2;
    const auto syn = data::generate_synthetic(spec);
    const auto& ds = syn.dataset;
    long double sum = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double lin = spec.outcome_bias + spec.a_y * (*ds.u_star)[i];
      for (std::size_t c = 0; c < spec.d; ++c) lin += syn.coefficients.v[c] * ds.x(i, c);
      sum += 1.0 / (1.0 + std::exp(-(lin + spec.tau))) - 1.0 / (1.0 + std::exp(-lin));
    }
    CHECK(std::abs(*ds.true_ate - static_cast<double>(sum / ds.size())) < 1e-12);
    CHECK(std::abs(data::synthetic_true_ate(spec, syn.coefficients, ds.x, *ds.u_star) - *ds.true_ate) < 1e-15);
  }
  SUBCASE("no confounding: naive ATE near the population ATE") {
    data::SyntheticSpec spec;
    spec.a_t = spec.a_y = 0.0;
    spec.covariate_effect_scale = 0.0;
    spec.tau = 0.5;
    const auto syn = data::generate_synthetic(spec);
    // binomial standard error of a difference of two means at n=2000 is about 0.022
    CHECK(std::abs(data::naive_ate(syn.dataset) - *syn.dataset.true_ate) < 0.07);
  }
  SUBCASE("strong confounding biases the naive ATE") {
    const auto syn = data::generate_synthetic({});
    CHECK(std::abs(data::naive_ate(syn.dataset) - *syn.dataset.true_ate) > 0.02);
  }
  SUBCASE("naive bias grows with confounding strength") {
    double previous = -1.0;
    for (double a : {0.5, 1.0, 2.0}) {
      double bias = 0.0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        data::SyntheticSpec spec;
        spec.a_t = spec.a_y = a;
        spec.seed = seed;
        const auto syn = data::generate_synthetic(spec);
        bias += std::abs(data::naive_ate(syn.dataset) - *syn.dataset.true_ate);
      }
      CHECK(bias > previous);
      previous = bias;
    }
  }
  SUBCASE("spec validation") {
    data::SyntheticSpec spec;
    spec.n = 99;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = {};
    spec.leakage = 1.5;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
  }
}

TEST_CASE("ground-truth sidecar round trip") {
  data::SyntheticSpec spec;
  spec.n = 120;
  const auto syn = data::generate_synthetic(spec);
  const auto dir = testing::scratch_dir("truth");
  data::save_ground_truth(data::ground_truth_of(syn, spec), dir / "g.json");
  const auto back = data::load_ground_truth(dir / "g.json");
  CHECK(back.u_star == *syn.dataset.u_star);
  CHECK(back.true_ate == *syn.dataset.true_ate);
  CHECK(back.coefficients.w == syn.coefficients.w);
  CHECK(back.spec.n == 120);
}

TEST_CASE("split") {
  SUBCASE("fraction 0") {
    const std::vector<double> t{1, 0, 1, 0, 1};
    const auto s = data::split_indices(t, 0.0, 1);
    CHECK(s.eval.empty());
    CHECK(s.train.size() == 5);
  }
  SUBCASE("sizes, disjointness, exhaustiveness") {
    data::SyntheticSpec spec;
    spec.n = 1000;
    const auto ds = data::generate_synthetic(spec).dataset;
    const auto s = data::split_indices(ds.t, 0.2, 3);
    CHECK(s.train.size() == 800);
    CHECK(s.eval.size() == 200);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.eval.begin(), s.eval.end());
    CHECK(all.size() == 1000);
    CHECK(std::is_sorted(s.eval.begin(), s.eval.end()));
  }
  SUBCASE("stratification keeps treatment rates within 0.02 over 20 seeds") {
    const auto ds = data::generate_synthetic({}).dataset;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = data::split_indices(ds.t, 0.2, seed);
      auto rate = [&](const std::vector<std::size_t>& rows) {
        double sum = 0;
        for (auto r : rows) sum += ds.t[r];
        return sum / static_cast<double>(rows.size());
      };
      CHECK(std::abs(rate(s.train) - rate(s.eval)) <= 0.02);
    }
  }
  SUBCASE("seeded") {
    const auto ds = data::generate_synthetic({}).dataset;
    CHECK(data::split_indices(ds.t, 0.2, 5).eval == data::split_indices(ds.t, 0.2, 5).eval);
    CHECK(data::split_indices(ds.t, 0.2, 5).eval != data::split_indices(ds.t, 0.2, 6).eval);
  }
}

TEST_CASE("standardizer and min-max scaling") {
  const nn::Matrix x{{1, 5}, {3, 5}};
  const auto s = data::Standardizer::fit(x);
  CHECK(s.mean == std::vector<double>{2, 5});
  CHECK(s.scale == std::vector<double>{1, 1}); // population sd of {1,3} is 1; zero spread maps to 1
  CHECK(s.apply(x) == nn::Matrix{{-1, 0}, {1, 0}});
  CHECK(data::min_max_scale(std::vector<double>{2, 4, 3}) == std::vector<double>{0, 1, 0.5});
  CHECK(data::min_max_scale(std::vector<double>{7, 7}) == std::vector<double>{0, 0});
}

TEST_CASE("fingerprint is stable and content-sensitive") {
  auto a = data::parse_csv("a,t,y\n1,0,1\n2,1,0\n");
  auto b = data::parse_csv("a,t,y\n1,0,1\n2,1,0\n");
  CHECK(data::fingerprint(a) == data::fingerprint(b));
  b.x(0, 0) = 1.5;
  CHECK(data::fingerprint(a) != data::fingerprint(b));
}

} // TEST_SUITE
