#include "doctest.h"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <string>

#include "couplex/catalogue.hpp"
#include "couplex/error.hpp"
#include "couplex/io.hpp"

using namespace couplex;
using nlohmann::json;

namespace {

std::string error_of(const std::string& text) {
    try {
        spec_from_json(text);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config);
        return e.what();
    }
    return "";
}

const char* kMissingT = R"({"d": 1,
  "sigma": {"kind": "constant", "value": [1]},
  "b": {"kind": "constant", "value": [0]},
  "terminal": {"kind": "sine"}})";

}  // namespace

TEST_CASE("format_double round-trips and spells non-finite values") {
    for (double x : {0.0, -1.5, 0.1, 1e-300, 3.141592653589793, 2.0 / 3.0})
        CHECK(std::stod(format_double(x)) == x);
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("csv quoting") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("every built-in spec survives a JSON round trip") {
    for (const auto& s : builtin_specs()) {
        CAPTURE(s.id);
        const std::string text = spec_to_json(s);
        const ProblemSpec back = spec_from_json(text);
        CHECK(spec_to_json(back) == text);
        const Mode m = s.g_mode() ? Mode::g_mode : Mode::classical;
        CHECK(constants_to_json(derive_constants(back, m)) == constants_to_json(derive_constants(s, m)));
    }
}

TEST_CASE("spec errors name the field") {
    CHECK(error_of(kMissingT) == "T: required field missing");
    CHECK(error_of("{not json").rfind("spec: malformed JSON", 0) == 0);
    const std::string typo = R"({"d": 1, "T": 1, "sigma": {"kind": "constant", "value": [1]},
      "b": {"kind": "constant", "value": [0]}, "terminal": {"kind": "sine", "amplitud": 2}})";
    CHECK(error_of(typo) == "terminal.amplitud: unknown field");
    const std::string ragged = R"({"d": 2, "T": 1, "sigma": {"kind": "affine", "matrix": [[1, 0], [0]]},
      "b": {"kind": "constant", "value": [0, 0]}, "terminal": {"kind": "sine"}})";
    CHECK(error_of(ragged) == "sigma.matrix[1]: ragged matrix");
    const std::string interval2d = R"({"d": 2, "T": 1, "sigma": {"kind": "constant", "value": [1, 1]},
      "b": {"kind": "constant", "value": [0, 0]}, "terminal": {"kind": "sine"}, "gamma": {"interval": [1, 2]}})";
    CHECK(error_of(interval2d) == "gamma.interval: only for d = 1");
}

TEST_CASE("hypothesis violations keep their category") {
    const std::string neg_t = R"({"d": 1, "T": -1, "sigma": {"kind": "constant", "value": [1]},
      "b": {"kind": "constant", "value": [0]}, "terminal": {"kind": "sine"}})";
    try {
        spec_from_json(neg_t);
        FAIL("accepted T < 0");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_spec);
        CHECK(std::string(e.what()).find("T") != std::string::npos);
    }
}

TEST_CASE("catalogue lists every built-in with its derived constants") {
    const auto cat = json::parse(catalogue_json());
    REQUIRE(cat.size() == builtin_specs().size());
    REQUIRE(!cat.empty());
    for (const auto& e : cat) {
        const auto& s = builtin_spec(e["id"].get<std::string>());
        CHECK_NOTHROW(s.validate());
        const Mode m = s.g_mode() ? Mode::g_mode : Mode::classical;
        CHECK(e["mode"] == to_string(m));
        CHECK(e["constants"] == json::parse(constants_to_json(derive_constants(s, m))));
    }
}
