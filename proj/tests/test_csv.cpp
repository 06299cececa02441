#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <string>

#include "efc/csv.hpp"
#include "efc/error.hpp"

using efc::csv::Document;

TEST_CASE("csv parse handles plain rows") {
    Document doc = efc::csv::parse("a,b,c\n1,2,3\n4,5,6\n");
    REQUIRE(doc.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(doc.rows.size() == 2);
    CHECK(doc.rows[0] == std::vector<std::string>{"1", "2", "3"});
    CHECK(doc.rows[1] == std::vector<std::string>{"4", "5", "6"});
}

TEST_CASE("csv parse handles quoted fields with commas and escaped quotes") {
    Document doc = efc::csv::parse("name,note\n\"a,b\",\"she said \"\"hi\"\"\"\n");
    REQUIRE(doc.rows.size() == 1);
    CHECK(doc.rows[0][0] == "a,b");
    CHECK(doc.rows[0][1] == "she said \"hi\"");
}

TEST_CASE("csv parse handles quoted newlines and CRLF line endings") {
    Document doc = efc::csv::parse("a,b\r\n\"line1\nline2\",x\r\n");
    REQUIRE(doc.rows.size() == 1);
    CHECK(doc.rows[0][0] == "line1\nline2");
    CHECK(doc.rows[0][1] == "x");
}

TEST_CASE("csv parse skips blank lines") {
    Document doc = efc::csv::parse("a,b\n\n1,2\n\n\n3,4\n");
    REQUIRE(doc.rows.size() == 2);
    CHECK(doc.rows[1][0] == "3");
}

TEST_CASE("csv parse rejects an unterminated quote") {
    CHECK_THROWS_AS(efc::csv::parse("a,b\n\"open,2\n"), efc::ValidationError);
}

TEST_CASE("csv escape quotes only when needed") {
    CHECK(efc::csv::escape("plain") == "plain");
    CHECK(efc::csv::escape("a,b") == "\"a,b\"");
    CHECK(efc::csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(efc::csv::escape("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("csv write then parse round-trips awkward content") {
    Document doc;
    doc.header = {"k", "v"};
    doc.rows = {{"a,b", "q\"q"}, {"nl\nnl", ""}};
    std::string text = efc::csv::write(doc);
    Document back = efc::csv::parse(text);
    CHECK(back.header == doc.header);
    CHECK(back.rows == doc.rows);
}

TEST_CASE("format_double round-trips through parsing") {
    for (double v : {0.0, -0.0, 1.0, -1.5, 0.1, 1e-300, 1e300, 3.141592653589793,
                     -2.2250738585072014e-308}) {
        std::string s = efc::csv::format_double(v);
        double back = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(ec == std::errc{});
        REQUIRE(ptr == s.data() + s.size());
        CHECK(back == v);
    }
}

TEST_CASE("trim strips surrounding whitespace only") {
    CHECK(efc::csv::trim("  x  ") == "x");
    CHECK(efc::csv::trim("\t a b \r") == "a b");
    CHECK(efc::csv::trim("") == "");
    CHECK(efc::csv::trim("   ") == "");
}

TEST_CASE("read_file names the missing path") {
    try {
        efc::csv::read_file("/nonexistent/definitely_missing.csv");
        FAIL("expected IoError");
    } catch (const efc::IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/definitely_missing.csv") !=
              std::string::npos);
    }
}
