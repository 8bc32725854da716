#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcbinom/cli.hpp"
#include "tcbinom/seq.hpp"

using namespace tcbinom;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> cells(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string c; std::getline(in, c, ',');) out.push_back(c);
    return out;
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& text) {
        path = std::filesystem::temp_directory_path() /
               ("tcbinom_cfg_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".json");
        std::ofstream(path) << text;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("format_number round-trips") {
    CHECK(cli::format_number(0.0025) == "0.0025");
    CHECK(cli::format_number(100.0) == "100");
    CHECK(cli::format_number(13.905759051916347) == "13.905759051916347");
}

TEST_CASE("price at k = 0 gives ask = bid = frictionless") {
    const auto r = invoke({"price", "--steps", "100", "--cost-rate", "0", "--threads", "2", "--output", "json"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    const double plain = frictionless_price(calibrate(100, 0.2, 0.1, 0.25, 100, 0.0), PayoffSpec::put(100));
    CHECK(j["ask"].get<double>() == doctest::Approx(plain).epsilon(1e-9));
    CHECK(j["bid"].get<double>() == doctest::Approx(plain).epsilon(1e-9));
    CHECK(j["block_levels"] == 5);
    CHECK(r.err.find("wall_ms") != std::string::npos);
}

TEST_CASE("price output is independent of the thread count") {
    const auto one = invoke({"price", "--steps", "120", "--threads", "1"});
    const auto eight = invoke({"price", "--steps", "120", "--threads", "8"});
    REQUIRE(one.code == 0);
    REQUIRE(eight.code == 0);
    const auto a = cells(lines(one.out).at(1));
    const auto b = cells(lines(eight.out).at(1));
    CHECK(a.at(5) == b.at(5));
    CHECK(a.at(6) == b.at(6));
    CHECK(lines(one.out).at(0) == "mode,payoff,N,p,L,ask,bid");
}

TEST_CASE("frictionless price csv") {
    const auto r = invoke({"price", "--mode", "frictionless", "--steps", "50", "--threads", "3"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out).at(0) == "mode,payoff,N,p,L,price");
    CHECK(cells(lines(r.out).at(1)).at(4) == "50");
}

TEST_CASE("configuration errors exit with 2") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"price", "--steps", "0"},
             {"price", "--payoff", "straddle"},
             {"price", "--payoff", "bullspread", "--strike", "110", "--strike2", "100"},
             {"price", "--vol", "-0.1"},
             {"price", "--cost-rate", "1.5"},
             {"curve", "--sweep-step", "0"},
             {"price", "--payoff", "custom"},
             {"price", "--config", "/nonexistent/config.json"},
             {"bench", "--threads-list", "0"},
             {"price", "--no-such-flag"},
             {}}) {
        const auto r = invoke(args);
        CAPTURE(r.err);
        CHECK(r.code == 2);
        CHECK_FALSE(r.err.empty());
    }
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("config file merges under the flags") {
    const TempFile cfg(R"({"steps": 40, "cost_rate": 0.01, "payoff": "call", "output": "json", "threads": 2})");
    const auto from_file = invoke({"price", "--config", cfg.path.string()});
    REQUIRE(from_file.code == 0);
    const auto j = json::parse(from_file.out);
    CHECK(j["steps"] == 40);
    CHECK(j["payoff"] == "call");

    const auto overridden = invoke({"price", "--config", cfg.path.string(), "--steps", "30"});
    REQUIRE(overridden.code == 0);
    CHECK(json::parse(overridden.out)["steps"] == 30);

    const TempFile bad(R"({"stepz": 40})");
    CHECK(invoke({"price", "--config", bad.path.string()}).code == 2);
    const TempFile wrong_type(R"({"steps": 4.5})");
    CHECK(invoke({"price", "--config", wrong_type.path.string()}).code == 2);
    const TempFile not_json("{steps");
    CHECK(invoke({"price", "--config", not_json.path.string()}).code == 2);
}

TEST_CASE("custom payoff from config") {
    // cash payoff max(S - 100, 0) written as a piecewise linear function
    const TempFile cfg(R"({"payoff": "custom", "steps": 30, "output": "json", "threads": 2,
        "custom_payoff": {"anchor_y": 100, "anchor_value": 0, "breakpoints": [100], "slopes": [0, 1]}})");
    const auto r = invoke({"price", "--config", cfg.path.string(), "--mode", "frictionless"});
    REQUIRE(r.code == 0);
    const auto spec = PayoffSpec::custom(PwlFunction::hinge(100, 0, 0, 1));
    CHECK(json::parse(r.out)["price"].get<double>() ==
          frictionless_price(calibrate(100, 0.2, 0.1, 0.25, 30, 0.005), spec));
}

TEST_CASE("curve") {
    const std::vector<std::string> args{"curve", "--steps", "60", "--sweep-from", "90", "--sweep-to", "110",
                                        "--sweep-step", "5", "--threads", "2"};
    const auto r = invoke(args);
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 1 + 5 * 3);
    CHECK(rows[0] == "S0,k,ask,bid");
    for (std::size_t g = 0; g < 5; ++g) {
        const auto k0 = cells(rows[1 + 3 * g]);
        const auto k1 = cells(rows[2 + 3 * g]);
        const auto k2 = cells(rows[3 + 3 * g]);
        CHECK(k0[0] == k1[0]);
        CHECK(std::stod(k2[3]) <= std::stod(k1[3]));
        CHECK(std::stod(k1[3]) <= std::stod(k0[3]));
        CHECK(std::stod(k0[2]) < std::stod(k1[2]));
        CHECK(std::stod(k1[2]) < std::stod(k2[2]));
    }
    CHECK(invoke(args).out == r.out);

    const auto flat = invoke({"curve", "--steps", "40", "--cost-rates", "0", "--sweep-from", "100", "--sweep-to",
                              "100"});
    REQUIRE(flat.code == 0);
    const auto row = cells(lines(flat.out).at(1));
    CHECK(std::stod(row[2]) == doctest::Approx(std::stod(row[3])).epsilon(1e-9));
    CHECK(lines(flat.out).size() == 2);
}

TEST_CASE("verify-sched") {
    const auto r = invoke({"verify-sched"});
    CHECK(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] == "N,p,L,actual,estimate,error_pct,audit");
    CHECK(rows[1] == "1200,2,5,362999,360000,-0.83,ok");
    CHECK(rows[8] == "1500,4,5,282748,281250,-0.53,ok");

    const auto single = invoke({"verify-sched", "--steps-list", "100", "--threads-list", "1"});
    CHECK(single.code == 0);
    CHECK(cells(lines(single.out).at(1)).at(3) == std::to_string(102 * 103 / 2));

    // small trees are far from the asymptotic estimate
    CHECK(invoke({"verify-sched", "--steps-list", "20", "--threads-list", "8"}).code == 1);
}

TEST_CASE("bench") {
    const auto r = invoke({"bench", "--steps-list", "40,60", "--threads-list", "1,2", "--repeats", "1"});
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "mode,N,p,L,wall_ms,speedup,efficiency");
    const auto base = cells(rows[1]);
    CHECK(base[2] == "1");
    CHECK(base[5] == "1.000");
    CHECK(base[6] == "1.000");
    const auto two = cells(rows[2]);
    CHECK(std::stod(two[6]) == doctest::Approx(std::stod(two[5]) / 2).epsilon(1e-2));
    CHECK(std::stod(two[4]) > 0);

    const auto warn = invoke({"bench", "--steps-list", "20", "--threads-list", "4096", "--repeats", "1"});
    CHECK(warn.code == 0);
    CHECK(warn.err.find("warning") != std::string::npos);
}
