#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "amlmc/config.hpp"

using namespace amlmc;

TEST_CASE("config JSON round trip") {
    auto c = RunConfig::defaults(2, 4.0);
    c.scheme = Scheme::smlmc;
    c.seed = 123456789012345ull;
    c.reference = 22.7;
    c.work.solve = 0.5;
    c.adapt.density.upper_bound = true;
    const auto j = to_json(c);
    const auto r = from_json(j);
    CHECK(to_json(r) == j);
    CHECK(config_hash(r) == config_hash(c));
    CHECK(r.reference.value() == 22.7);
    CHECK(r.scheme == Scheme::smlmc);
}

TEST_CASE("hash ignores the output directory only") {
    auto a = RunConfig::defaults(1, 1.0);
    auto b = a;
    b.out = "/somewhere/else";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("overlay applies only present keys and rejects unknown ones") {
    const auto base = RunConfig::defaults(1, 1.0);
    const auto c = overlay(base, {{"hierarchy", {{"C_R", 2.0}}}, {"tols", {0.3}}});
    CHECK(c.adapt.C_R == 2.0);
    CHECK(c.adapt.C_S == base.adapt.C_S);
    CHECK(c.tols == std::vector<double>{0.3});
    CHECK_THROWS_AS(overlay(base, {{"bogus", 1}}), std::invalid_argument);
    CHECK_THROWS_AS(overlay(base, {{"estimator", {{"thetta", 0.3}}}}), std::invalid_argument);
    CHECK_THROWS_AS(overlay(base, {{"scheme", "xmlmc"}}), std::invalid_argument);
}

TEST_CASE("validation") {
    auto c = RunConfig::defaults(0, 0.0);
    CHECK_NOTHROW(c.validate());
    c.tols.clear();
    CHECK_THROWS(c.validate());
    c = RunConfig::defaults(1, 1.0);
    c.theta = 1.5;
    CHECK_THROWS(c.validate());
    c = RunConfig::defaults(1, 1.0);
    c.example = 3;
    CHECK_THROWS(c.validate());
}

TEST_CASE("per-example defaults") {
    CHECK(RunConfig::defaults(0, 0.0).adapt.tol0 == 1.0 / 32);
    CHECK(RunConfig::defaults(1, 1.0).level_tol0 == 2.0);
    CHECK(RunConfig::defaults(2, 4.0).level_tol0 == 4.0);
    CHECK(RunConfig::defaults(2, 4.0).relative);
}

TEST_CASE("written config reloads to the same hash") {
    auto c = RunConfig::defaults(2, 1.0);
    c.out = "x";
    const auto path = (std::filesystem::temp_directory_path() / "amlmc_config_test.json").string();
    write_config(path, c);
    const auto r = load_config_file(path, RunConfig::defaults(0, 0.0));
    CHECK(config_hash(r) == config_hash(c));
    std::filesystem::remove(path);
    CHECK_THROWS(load_config_file(path, c));
}
