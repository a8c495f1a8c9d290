#include "ratlim/report.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

using namespace ratlim;

TEST_SUITE("report") {
  TEST_CASE("real formatting round-trips") {
    for (Real v : {0.1L, 1.0L / 3, -2.5e-300L, 1e300L, 0.0L, 12345678901234567.0L}) {
      std::string s = format_real(v);
      CHECK(std::stold(s) == v);
    }
    CHECK(format_real(std::numeric_limits<Real>::quiet_NaN()) == "nan");
    CHECK(format_real(std::numeric_limits<Real>::infinity()) == "inf");
    CHECK(format_real(-std::numeric_limits<Real>::infinity()) == "-inf");
    CHECK(json_real(std::numeric_limits<Real>::quiet_NaN()).is_null());
    CHECK(json_real(0.5L).get<double>() == 0.5);
  }

  TEST_CASE("CSV quoting") {
    CHECK(csv_quote("e") == "e");
    CHECK(csv_quote("1,2") == "\"1,2\"");
    CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  }

  TEST_CASE("table output") {
    Table t;
    t.add_meta("subcommand", "demo");
    t.columns = {"x", "value", "n", "ok"};
    t.add_row({std::string("1,2"), Real(0.25L), std::int64_t{3}, true});
    std::string csv = t.to_csv();
    CHECK(csv == "# schema: 1\n# subcommand: demo\nx,value,n,ok\n\"1,2\",0.25,3,true\n");
    auto j = t.to_json();
    CHECK(j["schema"] == 1);
    CHECK(j["subcommand"] == "demo");
    CHECK(j["rows"][0]["x"] == "1,2");
    CHECK(j["rows"][0]["n"] == 3);
    CHECK(j["rows"][0]["ok"] == true);
    CHECK_THROWS(t.add_row({Real(1)}));
  }
}
