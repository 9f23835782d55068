#include "hierfdr/csv.hpp"
#include "hierfdr/error.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace hierfdr;

namespace {

CsvSchema basic_schema() {
  CsvSchema s;
  s.time = "time";
  s.status = "status";
  s.z = {"age"};
  s.x = {"g1"};
  return s;
}

}  // namespace

TEST_CASE("three-row file") {
  const auto data = parse_csv("time,status,g1,age\n1,1,0.5,40\n2,0,0.1,50\n4,1,-1,60\n", basic_schema());
  CHECK(data.n() == 3);
  CHECK(data.d() == 1);
  CHECK(data.q() == 1);
  CHECK(data.y()[1] == doctest::Approx(std::log(2.0)));
  CHECK(data.status()[1] == 0);
  CHECK(data.x()(2, 0) == -1.0);
  CHECK(data.z()(0, 0) == 40.0);
  CHECK(data.x_names() == std::vector<std::string>{"g1"});
}

TEST_CASE("log-scale times are used as given") {
  CsvSchema s = basic_schema();
  s.time_scale = TimeScale::Log;
  const auto data = parse_csv("time,status,g1,age\n-1,1,0,1\n0,1,1,2\n", s);
  CHECK(data.y()[0] == -1.0);
}

TEST_CASE("raw time zero cannot be log-transformed") {
  CHECK_THROWS_AS(parse_csv("time,status,g1,age\n0,1,0.5,40\n2,0,0.1,50\n", basic_schema()), Error);
}

TEST_CASE("status outside {0,1} names the row") {
  try {
    parse_csv("time,status,g1,age\n1,1,0.5,40\n2,2,0.1,50\n", basic_schema());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("malformed inputs") {
  CHECK_THROWS_AS(parse_csv("time,status,g1\n1,1,0.5\n2,1,1\n", basic_schema()), Error);  // missing column
  CHECK_THROWS_AS(parse_csv("time,status,g1,age\n1,1,abc,40\n2,1,1,2\n", basic_schema()), Error);
  CHECK_THROWS_AS(parse_csv("time,status,g1,age\n1,1,NA,40\n2,1,1,2\n", basic_schema()), Error);
  CHECK_THROWS_AS(parse_csv("time,status,g1,age\n1,1,,40\n2,1,1,2\n", basic_schema()), Error);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", basic_schema()), Error);
}

TEST_CASE("schema sidecar, wildcard X and delimiter") {
  const CsvSchema s = CsvSchema::from_json(R"({"time":"t","status":"d","z":["e"],"x":"*","delimiter":";"})");
  CHECK(s.x_rest);
  CHECK(s.delimiter == ';');
  const auto data = parse_csv("t;d;e;a;b\n1;1;0;1;2\n3;0;1;3;4\n", s);
  CHECK(data.d() == 2);
  CHECK(data.x_names() == std::vector<std::string>{"a", "b"});
  CHECK(CsvSchema::from_json(s.to_json()).to_json() == s.to_json());
  CHECK_THROWS_AS(CsvSchema::from_json("{not json"), Error);
  CHECK_THROWS_AS(CsvSchema::from_json(R"({"time":"t"})"), Error);
}

TEST_CASE("quoted cells and true/false status") {
  const auto data = parse_csv("\"time\",status,g1,age\n\"1.5\",true,\"2\",1\n2,false,3,1\n", basic_schema());
  CHECK(data.status()[0] == 1);
  CHECK(data.status()[1] == 0);
  CHECK(data.x()(0, 0) == 2.0);
}
