#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqdml/rng.hpp"
#include "seqdml/stats.hpp"

using namespace seqdml;

TEST_CASE("splitmix64 matches the reference stream", "[rng]") {
  // First outputs of the reference SplitMix64 generator seeded at the state.
  CHECK(rng::splitmix64(0) == 0xe220a8397b1dcdafull);
  CHECK(rng::splitmix64(1) == 0x910a2dec89025cc1ull);
  CHECK(rng::splitmix64(42) == 0xbdd732262feb6e95ull);
}

TEST_CASE("tag is FNV-1a with the published offset basis", "[rng]") {
  CHECK(rng::tag("") == 0xcbf29ce484222325ull);
  CHECK(rng::tag("a") == 0xaf63dc4c8601ec8cull);
  CHECK(rng::tag("reg_mu") == 0x420ff9243af74994ull);
}

TEST_CASE("derive decorrelates nearby inputs", "[rng]") {
  CHECK(rng::derive(1, 2) == rng::derive(1, 2));
  CHECK(rng::derive(1, 2) != rng::derive(1, 3));
  CHECK(rng::derive(1, 2) != rng::derive(2, 2));
  CHECK(rng::derive(1, 2, 3) != rng::derive(1, 3, 2));  // order matters
  // Single-bit flips in a salt should flip roughly half the output bits.
  const std::uint64_t a = rng::derive(7, 0);
  const std::uint64_t b = rng::derive(7, 1);
  int flipped = 0;
  for (int i = 0; i < 64; ++i) flipped += ((a ^ b) >> i) & 1u;
  CHECK(flipped > 16);
  CHECK(flipped < 48);
}

TEST_CASE("uniform01 stays in [0,1) with a sane mean", "[rng]") {
  auto g = rng::engine(123);
  double sum = 0.0;
  double lo = 1.0, hi = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng::uniform01(g);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(sum / n == Catch::Approx(0.5).margin(0.01));
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("NormalDraw first two moments", "[rng]") {
  auto g = rng::engine(7);
  rng::NormalDraw normal;
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = normal(g);
    s += z;
    s2 += z * z;
  }
  CHECK(s / n == Catch::Approx(0.0).margin(0.01));
  CHECK(s2 / n == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("below is bounded and deterministic", "[rng]") {
  auto g1 = rng::engine(9);
  auto g2 = rng::engine(9);
  for (int i = 0; i < 1000; ++i) {
    const auto a = rng::below(g1, 7);
    REQUIRE(a < 7);
    CHECK(a == rng::below(g2, 7));
  }
}

TEST_CASE("shuffle is a seeded permutation", "[rng]") {
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i;
  std::vector<int> w = v;
  auto g = rng::engine(11);
  rng::shuffle(w, g);
  CHECK(w != v);  // 1/100! chance of a false alarm
  std::vector<int> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);

  std::vector<int> w2 = v;
  auto g2 = rng::engine(11);
  rng::shuffle(w2, g2);
  CHECK(w2 == w);
}

TEST_CASE("variance conventions", "[stats]") {
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 4;
  CHECK(stats::mean(v) == Catch::Approx(2.5));
  CHECK(stats::variance(v) == Catch::Approx(1.25));          // divisor n
  CHECK(stats::sample_variance(v) == Catch::Approx(5.0 / 3.0));  // n-1
}

TEST_CASE("quantile follows the linear-interpolation convention", "[stats]") {
  CHECK(stats::quantile({1, 2, 3, 4}, 0.5) == Catch::Approx(2.5));
  CHECK(stats::quantile({1, 2, 3, 4, 5}, 0.25) == Catch::Approx(2.0));
  CHECK(stats::quantile({3, 1, 4, 1, 5, 9, 2, 6}, 0.9) ==
        Catch::Approx(6.9).epsilon(1e-12));
  CHECK(stats::quantile({5, 1}, 0.0) == 1.0);
  CHECK(stats::quantile({5, 1}, 1.0) == 5.0);
  CHECK_THROWS(stats::quantile({}, 0.5));
}

TEST_CASE("normal CDF reference values", "[stats]") {
  CHECK(stats::norm_cdf(0.0) == Catch::Approx(0.5));
  CHECK(stats::norm_cdf(1.96) == Catch::Approx(0.9750021048517795).epsilon(1e-14));
  CHECK(stats::norm_cdf(-1.0) == Catch::Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(stats::norm_cdf(0.3) == Catch::Approx(0.6179114221889526).epsilon(1e-14));
}

TEST_CASE("normal quantile inverts the CDF", "[stats]") {
  CHECK(stats::norm_ppf(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(stats::norm_ppf(0.5) == Catch::Approx(0.0).margin(1e-15));
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    CHECK(stats::norm_ppf(stats::norm_cdf(x)) == Catch::Approx(x).margin(1e-9));
  }
  CHECK_THROWS(stats::norm_ppf(0.0));
  CHECK_THROWS(stats::norm_ppf(1.0));
}

TEST_CASE("fit_line recovers an exact line", "[stats]") {
  std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double xi : x) y.push_back(3.0 * xi + 1.0);
  const auto f = stats::fit_line(x, y);
  CHECK(f.slope == Catch::Approx(3.0).epsilon(1e-12));
  CHECK(f.intercept == Catch::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(stats::fit_line({1.0}, {2.0}));
}
