#include <catch2/catch_amalgamated.hpp>

#include "gfm/timeseries.hpp"
#include "test_util.hpp"

using namespace gfm;

namespace {

std::string long_csv(int ids, int rows_per_id) {
  std::string csv = "series_id,value\n";
  for (int i = 0; i < ids; ++i)
    for (int r = 0; r < rows_per_id; ++r)
      csv += "s" + std::to_string(i) + "," + std::to_string(r + 1) + "\n";
  return csv;
}

}  // namespace

TEST_CASE("load_dataset groups rows by id in appearance order") {
  auto path = testutil::write_file("basic.csv", long_csv(2, 30));
  auto ds = load_dataset(path, 6, 12);
  REQUIRE(ds.series.size() == 2);
  CHECK(ds.series[0].id == "s0");
  CHECK(ds.series[1].id == "s1");
  for (const auto& s : ds.series) {
    REQUIRE(s.values.size() == 30);
    CHECK(s.values.front() == 1.0);
    CHECK(s.values.back() == 30.0);
  }
}

TEST_CASE("load_dataset rejects non-numeric cells with the row number") {
  auto path = testutil::write_file("badcell.csv",
                                   "series_id,value\na,1\na,2\na,oops\n");
  try {
    load_dataset(path, 1, 1);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":4") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects series shorter than 2*horizon+1") {
  std::string csv = "series_id,value\n";
  for (int r = 0; r < 10; ++r) csv += "short," + std::to_string(r) + "\n";
  for (int r = 0; r < 20; ++r) csv += "long," + std::to_string(r) + "\n";
  auto path = testutil::write_file("tooshort.csv", csv);
  try {
    load_dataset(path, 6, 1);
    FAIL("expected rejection");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("short") != std::string::npos);
    CHECK(msg.find("long,") == std::string::npos);
  }
}

TEST_CASE("load_dataset imputes empty cells") {
  auto path = testutil::write_file("missing.csv",
                                   "series_id,value\na,5\na,\na,7\na,8\na,9\n");
  auto zero = load_dataset(path, 1, 1);
  CHECK(zero.series[0].values[1] == 0.0);
  auto locf = load_dataset(path, 1, 1, Imputation::locf);
  CHECK(locf.series[0].values[1] == 5.0);
}

TEST_CASE("load_dataset keeps a group column when present") {
  auto path = testutil::write_file(
      "grouped.csv", "series_id,value,group\na,1,g1\na,2,g1\na,3,g1\nb,1,g2\nb,2,g2\nb,3,g2\n");
  auto ds = load_dataset(path, 1, 1);
  CHECK(ds.series[0].group == "g1");
  CHECK(ds.series[1].group == "g2");

  auto plain = testutil::write_file("extra.csv",
                                    "series_id,value,ts\na,1,x\na,2,y\na,3,z\n");
  auto ds2 = load_dataset(plain, 1, 1);
  CHECK(ds2.series[0].group.empty());
}

TEST_CASE("dataset round-trips through save and load bit-for-bit") {
  Dataset ds;
  ds.name = "rt";
  ds.horizon = 2;
  ds.seasonal_period = 1;
  TimeSeries a{"a", {0.1, 1.0 / 3.0, -2.5e-7, 1e17, 5.0}, 1, ""};
  TimeSeries b{"b", {42.0, 0.0, 3.14159265358979, -1.0, 2.0}, 1, ""};
  ds.series = {a, b};
  auto path = (testutil::scratch_dir() / "roundtrip.csv").string();
  save_dataset(ds, path);
  auto loaded = load_dataset(path, 2, 1);
  REQUIRE(loaded.series.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(loaded.series[i].values.size() == ds.series[i].values.size());
    for (std::size_t t = 0; t < ds.series[i].values.size(); ++t)
      CHECK(loaded.series[i].values[t] == ds.series[i].values[t]);
  }

  // loading is a pure function of the file bytes
  auto again = load_dataset(path, 2, 1);
  for (std::size_t i = 0; i < 2; ++i) CHECK(again.series[i].values == loaded.series[i].values);
}

TEST_CASE("split_for_validation takes the last horizon as validation") {
  Dataset ds;
  ds.horizon = 6;
  TimeSeries s{"a", {}, 1, ""};
  for (int i = 1; i <= 20; ++i) s.values.push_back(i);
  ds.series = {s};
  auto splits = split_for_validation(ds);
  REQUIRE(splits.size() == 1);
  CHECK(splits[0].train == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
  CHECK(splits[0].validation == std::vector<double>{15, 16, 17, 18, 19, 20});
  CHECK(splits[0].test.empty());
}

TEST_CASE("split_for_validation horizon 1 boundary") {
  Dataset ds;
  ds.horizon = 1;
  ds.series = {TimeSeries{"a", {5, 6, 7}, 1, ""}};
  auto splits = split_for_validation(ds);
  CHECK(splits[0].train == std::vector<double>{5, 6});
  CHECK(splits[0].validation == std::vector<double>{7});
}

TEST_CASE("split_for_test mirrors the validation split and reconstructs") {
  Dataset ds;
  ds.horizon = 6;
  TimeSeries a{"a", {}, 1, ""}, b{"b", {}, 1, ""};
  for (int i = 1; i <= 20; ++i) {
    a.values.push_back(i);
    b.values.push_back(100 + i);
  }
  ds.series = {a, b};
  auto splits = split_for_test(ds);
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].id == "a");
  CHECK(splits[1].id == "b");
  CHECK(splits[0].test == std::vector<double>{15, 16, 17, 18, 19, 20});
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> rebuilt = splits[i].train;
    rebuilt.insert(rebuilt.end(), splits[i].validation.begin(), splits[i].validation.end());
    rebuilt.insert(rebuilt.end(), splits[i].test.begin(), splits[i].test.end());
    CHECK(rebuilt == ds.series[i].values);
  }
}

TEST_CASE("split accepts horizon equal to (length-1)/2") {
  Dataset ds;
  ds.horizon = 9;
  TimeSeries s{"a", {}, 1, ""};
  for (int i = 0; i < 19; ++i) s.values.push_back(i);  // 19 > 2*9
  ds.series = {s};
  auto splits = split_for_test(ds);
  CHECK(splits[0].train.size() == 10);
  CHECK(splits[0].test.size() == 9);
}
