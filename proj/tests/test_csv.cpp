#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <sstream>

#include "edr/csv.hpp"
#include "edr/synthetic.hpp"

using namespace edr;

namespace {

std::string message_of(const std::string& text) {
  std::istringstream in(text);
  try {
    csv::parse(in, "t.csv");
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
  csv::Table t;
  t.x.resize(3, 2);
  t.x << 0.1, -1e-300, 1.0 / 3.0, 123456789.125, -0.0, 5e300;
  t.y = Vector(3);
  *t.y << std::nextafter(1.0, 2.0), 2.0, -3.5;
  t.group = Vector(3);
  *t.group << 1, 0, 1;
  std::ostringstream out;
  csv::write(out, t);
  EXPECT_EQ(out.str().substr(0, 14), "x0,x1,y,group\n");
  std::istringstream in(out.str());
  const auto back = csv::parse(in);
  EXPECT_EQ(back.x, t.x);
  EXPECT_EQ(*back.y, *t.y);
  EXPECT_EQ(*back.group, *t.group);
}

TEST(Csv, CovariatesOnly) {
  std::istringstream in("x0,x1,x2\n1,2,3\n4,5,6\n");
  const auto t = csv::parse(in);
  EXPECT_EQ(t.x.rows(), 2);
  EXPECT_EQ(t.x(1, 2), 6.0);
  EXPECT_FALSE(t.y);
  EXPECT_FALSE(t.group);
}

TEST(Csv, CarriageReturnsAndBlankLinesAreTolerated) {
  std::istringstream in("x0,y\r\n1.5,2\r\n\r\n-1,0\r\n");
  const auto t = csv::parse(in);
  EXPECT_EQ(t.x.rows(), 2);
  EXPECT_EQ((*t.y)(0), 2.0);
}

TEST(Csv, ErrorsNameTheLine) {
  EXPECT_NE(message_of("x0,y\n1,2\n3,oops\n").find("t.csv:3"), std::string::npos);
  EXPECT_NE(message_of("x0,y\n1,2,3\n").find("t.csv:2"), std::string::npos);
  EXPECT_NE(message_of("a,b\n1,2\n").find("t.csv:1"), std::string::npos);
  EXPECT_NE(message_of("x0,x1,z\n").find("'z'"), std::string::npos);
  EXPECT_NE(message_of("").find("t.csv:1"), std::string::npos);
  EXPECT_FALSE(message_of("x0\nnan\n").empty());
  EXPECT_FALSE(message_of("x0\n1.0e\n").empty());
}

TEST(Csv, FormatDoubleIsShortest) {
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(csv::format_double(2.0), "2");
  EXPECT_EQ(csv::format_double(-1.5e-7), "-1.5e-07");
}

TEST(Csv, PairRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "edr_test_csv_pair";
  std::filesystem::remove_all(dir);
  const auto p = synthetic::gen_example2(30, 3);
  csv::write_pair(dir, p);
  const auto q = csv::read_pair(dir);
  EXPECT_EQ(p.x_train, q.x_train);
  EXPECT_EQ(p.y_train, q.y_train);
  EXPECT_EQ(p.x_test, q.x_test);
  EXPECT_EQ(p.x_holdout, q.x_holdout);
  EXPECT_EQ(p.y_holdout, q.y_holdout);
  std::filesystem::remove_all(dir);
}

TEST(Csv, MissingFileIsAnInputError) {
  EXPECT_THROW(csv::read("/nonexistent/edr/file.csv"), InputError);
}
