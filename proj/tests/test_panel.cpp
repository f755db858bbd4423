/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "curvecast/model_io.hpp"
#include "curvecast/panel.hpp"
#include "curvecast/random.hpp"
#include "curvecast/synth.hpp"
#include "test_support.hpp"

using namespace curvecast;

namespace {

CurvePanel read_text(const std::string& text, const CsvOptions& opt = {}, std::vector<std::string>* warnings = nullptr) {
  CurvePanel p;
  std::istringstream in(text);
  read_csv(in, "test.csv", p, opt, warnings);
  return p;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("curvecast_test_" + name)).string();
}

}  // namespace

TEST(Clock, ParseAndFormat) {
  EXPECT_EQ(parse_clock("07:05"), 425.0);
  EXPECT_EQ(parse_clock("7:05"), 425.0);
  EXPECT_EQ(parse_clock("24:00"), 1440.0);
  EXPECT_EQ(format_clock(1265.0), "21:05");
  for (const char* bad : {"7", "07:5", "25:00", "24:01", "07:60", "ab:cd", "07:05x"})
    expect_error([&] { parse_clock(bad); }, ErrorKind::schema);
}

TEST(Dates, WeekdaysAndArithmetic) {
  EXPECT_EQ(weekday_of("2003-09-02"), 2);  // a Tuesday
  EXPECT_EQ(weekday_of("2003-01-05"), 0);
  EXPECT_STREQ(weekday_name(weekday_of("2003-01-06")), "Mon");
  EXPECT_EQ(add_days("2003-02-27", 2), "2003-03-01");
  EXPECT_EQ(add_days("2004-02-28", 1), "2004-02-29");
  EXPECT_EQ(add_days("2003-01-01", -1), "2002-12-31");
  for (const char* bad : {"2003-02-29", "2003-13-01", "03-01-01", "2003/01/01"})
    expect_error([&] { weekday_of(bad); }, ErrorKind::schema);
}

TEST(Csv, SmallPanel) {
  const CurvePanel p = read_text("date,10:00,10:15,10:30\n2003-09-02,1,2,3\n2003-09-03,4,5.5,6\n");
  EXPECT_EQ(p.times, (std::vector<double>{600, 615, 630}));
  EXPECT_EQ(p.interval_minutes, 15);
  ASSERT_EQ(p.days.size(), 2u);
  EXPECT_EQ(p.days[0].weekday, 2);
  EXPECT_EQ(p.days[1].sample.values, (std::vector<double>{4, 5.5, 6}));
  EXPECT_NO_THROW(p.validate());
}

TEST(Csv, BadRowsAreDroppedWithWarnings) {
  std::vector<std::string> warnings;
  const CurvePanel p = read_text(
      "date,10:00,10:15,10:30\n"
      "2003-09-02,1,,3\n"
      "2003-09-03,4,5,6\n"
      "2003-09-04,1,-2,3\n"
      "2003-09-05,1,x,3\n"
      "2003-02-30,1,2,3\n"
      "2003-09-03,7,8,9\n"
      "2003-09-08,1,2\n",
      {}, &warnings);
  ASSERT_EQ(p.days.size(), 1u);
  EXPECT_EQ(p.days[0].date, "2003-09-03");
  EXPECT_EQ(p.days[0].sample.values, (std::vector<double>{4, 5, 6}));
  EXPECT_EQ(warnings.size(), 6u);
}

TEST(Csv, ExclusionList) {
  const std::string path = temp_path("excl.txt");
  {
    std::ofstream out(path);
    out << "# holidays\n2003-09-02\n\n  2003-09-04 \n";
  }
  CsvOptions opt;
  opt.excluded_dates = read_exclusions(path);
  EXPECT_EQ(opt.excluded_dates.size(), 2u);
  const CurvePanel p = read_text("date,10:00,10:15\n2003-09-02,1,2\n2003-09-03,1,2\n2003-09-04,1,2\n", opt);
  ASSERT_EQ(p.days.size(), 1u);
  EXPECT_EQ(p.days[0].date, "2003-09-03");
  std::filesystem::remove(path);
  expect_error([&] { read_exclusions(path); }, ErrorKind::io);
}

TEST(Csv, SchemaErrors) {
  expect_error([] { read_text(""); }, ErrorKind::schema);
  expect_error([] { read_text("day,10:00,10:15\n"); }, ErrorKind::schema);
  expect_error([] { read_text("date,10:00,10:20,10:30\n"); }, ErrorKind::schema);
  expect_error([] { read_text("date,10:00\n"); }, ErrorKind::schema);
  // a second file must share the interval columns
  CurvePanel p = read_text("date,10:00,10:15\n2003-09-02,1,2\n");
  std::istringstream other("date,10:00,10:30\n");
  expect_error([&] { read_csv(other, "b.csv", p, {}, nullptr); }, ErrorKind::schema);
}

TEST(Csv, NothingUsableIsNoData) {
  const std::string path = temp_path("empty.csv");
  {
    std::ofstream out(path);
    out << "date,10:00,10:15\n2003-09-02,1,\n";
  }
  expect_error([&] { ingest_csv(path); }, ErrorKind::no_data);
  std::filesystem::remove(path);
  expect_error([&] { ingest_csv(path); }, ErrorKind::io);
}

TEST(Csv, PartialRowsForTheCurrentDay) {
  CsvOptions opt;
  opt.keep_partial_rows = true;
  std::vector<std::string> warnings;
  const CurvePanel p = read_text("date,10:00,10:15,10:30\n2003-09-02,1,2,\n2003-09-03,1,,3\n", opt, &warnings);
  ASSERT_EQ(p.days.size(), 1u);
  EXPECT_EQ(p.days[0].sample.times, (std::vector<double>{600, 615}));
  EXPECT_EQ(warnings.size(), 1u);  // a gap followed by a value is not a prefix
  EXPECT_NO_THROW(p.validate(true));
  EXPECT_THROW(p.validate(false), Error);
}

TEST(Csv, RoundTripIsExact) {
  NormalSource rng(3);
  CurvePanel p = read_text("date,07:05,07:10,07:15\n2003-09-02,1,2,3\n2003-09-04,4,5,6\n");
  for (auto& d : p.days)
    for (double& v : d.sample.values) v = std::abs(rng.normal()) * 1e3 / 7.0;
  std::ostringstream first;
  emit_csv(p, first);
  const CurvePanel q = read_text(first.str());
  std::ostringstream second;
  emit_csv(q, second);
  EXPECT_EQ(first.str(), second.str());
  for (std::size_t i = 0; i < p.days.size(); ++i) EXPECT_EQ(p.days[i].sample.values, q.days[i].sample.values);
}

TEST(Csv, FilesAreMergedAndSorted) {
  const std::string a = temp_path("a.csv"), b = temp_path("b.csv");
  {
    std::ofstream(a) << "date,10:00,10:15\n2003-09-05,1,2\n2003-09-03,3,4\n";
    std::ofstream(b) << "\xEF\xBB\xBF" << "date,10:00,10:15\n2003-09-04,5,6\n";
  }
  const CurvePanel p = ingest_csv(std::vector<std::string>{a, b});
  ASSERT_EQ(p.days.size(), 3u);
  EXPECT_EQ(p.days[0].date, "2003-09-03");
  EXPECT_EQ(p.days[1].date, "2003-09-04");
  EXPECT_EQ(p.days[2].date, "2003-09-05");
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(ModelFile, RoundTripIsExact) {
  const SplineSpace sp(std::vector<double>{0, 0, 0, 0, 0.1, 0.35, 0.35, 0.6, 1, 1, 1, 1}, 4);
  NormalSource rng(4);
  CurveModel m = random_model(sp, 2, 2, rng);
  m.sigma2 = 1.0 / 3.0;
  std::stringstream io;
  write_model(m, io);
  const CurveModel r = read_model(io);
  EXPECT_TRUE(r.space == m.space);
  EXPECT_EQ(r.mu, m.mu);
  EXPECT_EQ(r.A, m.A);
  EXPECT_EQ(r.B, m.B);
  EXPECT_EQ(r.L_diag, m.L_diag);
  EXPECT_EQ(r.Sigma_diag, m.Sigma_diag);
  EXPECT_EQ(r.sigma2, m.sigma2);
}

TEST(ModelFile, RejectsBadInput) {
  NormalSource rng(5);
  const CurveModel m = random_model(SplineSpace(KnotVector::clamped_uniform(0, 1, 3, 3)), 1, 1, rng);
  std::ostringstream os;
  write_model(m, os);
  const std::string good = os.str();
  const auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_model(in);
  };
  EXPECT_NO_THROW(parse(good));
  expect_error([&] { parse("something else\n"); }, ErrorKind::schema);
  expect_error([&] { parse("curvecast-model 2\n" + good.substr(good.find('\n') + 1)); }, ErrorKind::schema);
  const auto drop = [&](const std::string& tag) {
    std::istringstream in(good);
    std::string line, out;
    while (std::getline(in, line))
      if (line.rfind(tag + " ", 0) != 0) out += line + "\n";
    return out;
  };
  expect_error([&] { parse(drop("Sigma")); }, ErrorKind::schema);
  std::string bad_number = good;
  bad_number.replace(bad_number.find("sigma2 "), 7, "sigma2 x");
  expect_error([&] { parse(bad_number); }, ErrorKind::schema);
  std::string bad_knots = good;
  bad_knots.replace(bad_knots.find("knots 8 0 0 0"), 13, "knots 8 0 1 0");
  expect_error([&] { parse(bad_knots); }, ErrorKind::schema);
}
