#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "seqdml/csv.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"

using namespace seqdml;

namespace {

PanelDataset tiny_dataset(Eigen::Index n = 12) {
  Eigen::VectorXd y2(n);
  Eigen::VectorXi d1(n), d2(n);
  Eigen::MatrixXd x0(n, 2), x1(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    y2[i] = static_cast<double>(i) * 0.5;
    d1[i] = static_cast<int>(i % 2);
    d2[i] = static_cast<int>((i / 2) % 2);
    x0(i, 0) = static_cast<double>(i);
    x0(i, 1) = static_cast<double>(n - i);
    x1(i, 0) = -static_cast<double>(i);
  }
  return validate_dataset(y2, d1, d2, x0, x1, std::nullopt,
                          {"x0_1", "x0_2"}, {"x1_1"});
}

std::string catch_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("validate_dataset accepts a consistent panel", "[dataset]") {
  const PanelDataset d = tiny_dataset();
  CHECK(d.n() == 12);
  CHECK(d.p0() == 2);
  CHECK(d.p1() == 1);
  CHECK(d.q == 1);
  const Eigen::MatrixXd xb = d.xbar();
  CHECK(xb.cols() == 3);
  CHECK(xb(3, 0) == d.x0(3, 0));
  CHECK(xb(3, 2) == d.x1(3, 0));
}

TEST_CASE("validate_dataset rejects malformed inputs", "[dataset]") {
  Eigen::VectorXd y2(3);
  y2 << 1, 2, 3;
  Eigen::VectorXi d1 = Eigen::VectorXi::Zero(3);
  Eigen::VectorXi d2 = Eigen::VectorXi::Zero(3);
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(3, 1);
  Eigen::MatrixXd x1 = Eigen::MatrixXd::Zero(3, 1);
  d1[0] = 1;

  CHECK(catch_code([&] {
          validate_dataset(Eigen::VectorXd(), Eigen::VectorXi(),
                           Eigen::VectorXi(), Eigen::MatrixXd(0, 0),
                           Eigen::MatrixXd(0, 0));
        }) == "empty_dataset");
  CHECK(catch_code([&] {
          validate_dataset(y2, Eigen::VectorXi::Zero(2), d2, x0, x1);
        }) == "length_mismatch");
  {
    Eigen::VectorXd bad = y2;
    bad[1] = std::nan("");
    CHECK(catch_code([&] { validate_dataset(bad, d1, d2, x0, x1); }) ==
          "non_finite_value");
  }
  {
    Eigen::MatrixXd bad = x0;
    bad(2, 0) = std::numeric_limits<double>::infinity();
    CHECK(catch_code([&] { validate_dataset(y2, d1, d2, bad, x1); }) ==
          "non_finite_value");
  }
  {
    Eigen::VectorXi bad = d1;
    bad[0] = -1;
    CHECK(catch_code([&] { validate_dataset(y2, bad, d2, x0, x1); }) ==
          "treatment_out_of_range");
  }
  {
    Eigen::VectorXi s(3);
    s << 0, 2, 1;
    CHECK(catch_code([&] { validate_dataset(y2, d1, d2, x0, x1, s); }) ==
          "subgroup_not_binary");
  }
  // n >= 2K gate when a fold count is declared.
  CHECK(catch_code([&] {
          validate_dataset(y2, d1, d2, x0, x1, std::nullopt, {}, {}, 2);
        }) == "too_few_rows");
}

TEST_CASE("treatment support is inferred from both periods", "[dataset]") {
  Eigen::VectorXd y2 = Eigen::VectorXd::Zero(4);
  Eigen::VectorXi d1(4), d2(4);
  d1 << 0, 1, 2, 0;
  d2 << 0, 1, 0, 3;
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(4, 1);
  Eigen::MatrixXd x1 = Eigen::MatrixXd::Zero(4, 1);
  const PanelDataset d = validate_dataset(y2, d1, d2, x0, x1);
  CHECK(d.q == 3);
}

TEST_CASE("make_folds balances sizes and partitions rows", "[folds]") {
  const FoldPlan plan = make_folds(10, 3, 5);
  REQUIRE(plan.folds.size() == 3);
  std::vector<std::size_t> sizes{plan.folds[0].size(), plan.folds[1].size(),
                                 plan.folds[2].size()};
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{3, 3, 4});

  std::set<int> seen;
  for (const auto& f : plan.folds) {
    for (int i : f) {
      CHECK(seen.insert(i).second);  // no duplicates across folds
    }
  }
  CHECK(seen.size() == 10);
  for (int f = 0; f < 3; ++f) {
    for (int i : plan.folds[static_cast<std::size_t>(f)]) {
      CHECK(plan.assignment[i] == f);
    }
  }
}

TEST_CASE("complement halving covers the complement exactly", "[folds]") {
  const FoldPlan plan = make_folds(101, 4, 9);
  for (int f = 0; f < plan.k; ++f) {
    const auto& a = plan.half_a[static_cast<std::size_t>(f)];
    const auto& b = plan.half_b[static_cast<std::size_t>(f)];
    std::set<int> ab(a.begin(), a.end());
    for (int i : b) CHECK(ab.insert(i).second);
    const std::size_t comp =
        101 - plan.folds[static_cast<std::size_t>(f)].size();
    CHECK(ab.size() == comp);
    CHECK(a.size() == (comp + 1) / 2);  // A takes the odd row
    for (int i : ab) CHECK(plan.assignment[i] != f);
  }
}

TEST_CASE("fold plans are seed-deterministic", "[folds]") {
  const FoldPlan p1 = make_folds(50, 3, 7);
  const FoldPlan p2 = make_folds(50, 3, 7);
  const FoldPlan p3 = make_folds(50, 3, 8);
  CHECK(p1.assignment == p2.assignment);
  CHECK(p1.half_a == p2.half_a);
  CHECK(p1.half_b == p2.half_b);
  CHECK(p1.assignment != p3.assignment);
}

TEST_CASE("make_folds validates K", "[folds]") {
  CHECK_THROWS_AS(make_folds(10, 1, 0), Error);
  CHECK_THROWS_AS(make_folds(3, 4, 0), Error);
}

TEST_CASE("subset_by_sequence filters on one or both periods", "[dataset]") {
  const PanelDataset d = tiny_dataset();
  std::vector<int> all(static_cast<std::size_t>(d.n()));
  for (int i = 0; i < d.n(); ++i) all[static_cast<std::size_t>(i)] = i;

  const auto both = subset_by_sequence(d, {1, 1}, all);
  for (int i : both) {
    CHECK(d.d1[i] == 1);
    CHECK(d.d2[i] == 1);
  }
  const auto first = subset_by_sequence(d, {1, 0}, all, /*d1_only=*/true);
  for (int i : first) CHECK(d.d1[i] == 1);
  CHECK(first.size() == 6);
  CHECK(both.size() == 3);
}

TEST_CASE("CSV round-trip preserves the panel bitwise", "[csv]") {
  PanelDataset d = tiny_dataset();
  Eigen::VectorXi s(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) s[i] = (i % 3 == 0) ? 1 : 0;
  d.s = s;
  d.y2[0] = 0.1 + 0.2;  // not exactly representable; 17 digits must survive
  const std::string path = "roundtrip_test.csv";
  write_dataset_csv(d, path);
  const PanelDataset back = read_dataset_csv(path);
  std::remove(path.c_str());

  REQUIRE(back.n() == d.n());
  REQUIRE(back.p0() == d.p0());
  REQUIRE(back.p1() == d.p1());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    CHECK(back.y2[i] == d.y2[i]);
    CHECK(back.d1[i] == d.d1[i]);
    CHECK(back.d2[i] == d.d2[i]);
    CHECK((*back.s)[i] == (*d.s)[i]);
    for (Eigen::Index j = 0; j < d.p0(); ++j) CHECK(back.x0(i, j) == d.x0(i, j));
    for (Eigen::Index j = 0; j < d.p1(); ++j) CHECK(back.x1(i, j) == d.x1(i, j));
  }
  CHECK(back.x0_names == d.x0_names);
}

TEST_CASE("CSV reader rejects contract violations", "[csv]") {
  const std::string path = "bad_input_test.csv";
  auto write = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
  };

  write("y2,d1,mystery\n1.0,0,2\n");
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  write("y2,d1\n1.0,0\n");  // missing d2
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  write("y2,d1,d2\n1.0,0\n");  // ragged row
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  write("y2,d1,d2\nabc,0,1\n");  // unparsable number
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  write("y2,d1,d2\n1.0,0.5,1\n");  // non-integer treatment
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  write("y2,d1,d2\n");  // header only
  CHECK(catch_code([&] { read_dataset_csv(path); }) == "file_error");

  CHECK(catch_code([&] { read_dataset_csv("no_such_file.csv"); }) ==
        "file_error");
  std::remove(path.c_str());
}

TEST_CASE("CSV reader maps a custom subgroup column", "[csv]") {
  const std::string path = "custom_s_test.csv";
  {
    std::ofstream out(path);
    out << "y2,d1,d2,x0_1,x1_1,member\n";
    out << "1.5,1,0,0.25,-1.0,1\n";
    out << "2.5,0,1,0.50,2.0,0\n";
  }
  const PanelDataset d = read_dataset_csv(path, "member");
  std::remove(path.c_str());
  REQUIRE(d.s.has_value());
  CHECK((*d.s)[0] == 1);
  CHECK((*d.s)[1] == 0);
}
