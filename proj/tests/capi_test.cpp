/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "survfuse/survfuse.h"

using nlohmann::json;

namespace {

struct Sample {
  sf_sample* p = nullptr;
  ~Sample() { sf_sample_free(p); }
};

struct Report {
  sf_report* p = nullptr;
  ~Report() { sf_report_free(p); }
  json doc() const { return json::parse(sf_report_json(p)); }
};

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("library identity and status names") {
  CHECK(std::string(sf_version()) == "0.1.0");
  CHECK(std::string(sf_status_name(SF_OK)) == "ok");
  CHECK(std::string(sf_status_name(SF_E_NOT_IDENTIFIED)) == "not-identified");
  CHECK(std::string(sf_status_name(static_cast<sf_status>(99))) == "unknown");
}

TEST_CASE("samples") {
  Sample s;
  REQUIRE(sf_sample_generate("paper", 300, 1, &s.p) == SF_OK);
  CHECK(sf_sample_size(s.p) == 300);
  CHECK(sf_sample_n1(s.p) == 100);
  CHECK(sf_sample_pi(s.p) == doctest::Approx(1.0 / 3.0));

  const std::string path = "survfuse_capi_sample.csv";
  REQUIRE(sf_sample_write_csv(s.p, path.c_str()) == SF_OK);
  Sample back;
  REQUIRE(sf_sample_read_csv(path.c_str(), NAN, &back.p) == SF_OK);
  std::remove(path.c_str());
  CHECK(sf_sample_size(back.p) == 300);

  Sample bad;
  CHECK(sf_sample_parse_csv("source,w1,y,delta_r,c,delta_c\n1,0.1,0.5,1,0.7,1\n", NAN, &bad.p) == SF_E_VALIDATION);
  CHECK(bad.p == nullptr);
  CHECK(std::string(sf_last_error()).rfind("validation: ", 0) == 0);
  CHECK(sf_sample_read_csv("/nonexistent/x.csv", NAN, &bad.p) == SF_E_IO);
  CHECK(sf_sample_generate("weibull", 300, 1, &bad.p) == SF_E_ARGUMENT);
  CHECK(sf_sample_generate("paper", 300, 1, nullptr) == SF_E_ARGUMENT);
}

TEST_CASE("estimation") {
  Sample s;
  REQUIRE(sf_sample_generate("paper", 600, 2, &s.p) == SF_OK);

  SUBCASE("efficient estimator with oracle nuisances") {
    Report r;
    REQUIRE(sf_estimate(s.p, R"({"t_star": 0.7, "estimators": ["eff"], "nuisance": "oracle:paper", "grid_points": 800})",
                        &r.p) == SF_OK);
    REQUIRE(sf_report_count(r.p) == 1);
    double t = 0, point = 0, se = 0, lo = 0, hi = 0;
    REQUIRE(sf_report_estimate(r.p, 0, &t, &point, &se, &lo, &hi) == SF_OK);
    CHECK(t == 0.7);
    CHECK(std::abs(point - 0.4823) < 4 * se);
    CHECK(lo < point);
    CHECK(point < hi);
    CHECK(std::string(sf_report_estimator(r.p, 0)) == "eff");
    CHECK(sf_report_estimate(r.p, 1, &t, &point, &se, &lo, &hi) == SF_E_RANGE);
    CHECK(sf_report_valid(r.p) == 1);
    CHECK(std::string(sf_report_csv(r.p)).empty());
    const auto doc = r.doc();
    CHECK(doc["sample"]["n"] == 600);
    CHECK(doc["nuisance"]["mode"] == "oracle:paper");
    CHECK(doc["results"][0]["estimators"]["eff"]["point"].get<double>() == point);
  }

  SUBCASE("all estimators outside the window record failures in place") {
    Report r;
    REQUIRE(sf_estimate(s.p, R"({"t_star": [0.2], "estimators": ["all"], "grid_points": 600, "subsamples": 20})",
                        &r.p) == SF_OK);
    const auto est = r.doc()["results"][0]["estimators"];
    for (const char* k : {"cs", "rc", "dr", "eff", "ivw"}) CHECK(est.contains(k));
    CHECK(est["cs"]["error"]["kind"] == "not-identified");
    CHECK(est["ivw"].contains("error"));
    CHECK(est["dr"].contains("point"));
  }

  SUBCASE("explicit requests fail the call") {
    Report r;
    CHECK(sf_estimate(s.p, R"({"t_star": 0.2, "estimators": ["cs"]})", &r.p) == SF_E_NOT_IDENTIFIED);
    CHECK(r.p == nullptr);
    CHECK(std::string(sf_last_error()).find("not identified") != std::string::npos);
    CHECK(sf_estimate(s.p, R"({"t_star": 0.7, "estimator": ["dr"]})", &r.p) == SF_E_ARGUMENT);
    CHECK(sf_estimate(s.p, R"({"t_star": 0.7, "estimators": ["km"]})", &r.p) == SF_E_ARGUMENT);
    CHECK(sf_estimate(s.p, "{not json", &r.p) == SF_E_ARGUMENT);
    CHECK(sf_estimate(nullptr, R"({"t_star": 0.7})", &r.p) == SF_E_ARGUMENT);
  }

  SUBCASE("same options, same bytes") {
    const char* opts = R"({"t_star": 0.8, "estimators": ["dr", "cs"], "seed": 4, "grid_points": 600, "subsamples": 30})";
    Report a, b;
    REQUIRE(sf_estimate(s.p, opts, &a.p) == SF_OK);
    REQUIRE(sf_estimate(s.p, opts, &b.p) == SF_OK);
    CHECK(std::string(sf_report_json(a.p)) == sf_report_json(b.p));
  }
}

TEST_CASE("simulation and rates") {
  Report sim;
  REQUIRE(sf_simulate(R"({"n_total": [300], "t_star": [0.7], "replications": 2, "estimators": ["rc", "dr"],
                          "nuisance": "oracle", "grid_points": 400, "threads": 1})",
                      &sim.p) == SF_OK);
  const std::string csv = sf_report_csv(sim.p);
  std::istringstream lines(csv);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 3);
  CHECK(sf_report_valid(sim.p) == 1);
  CHECK(sim.doc()["cells"].size() == 2);

  Report bad;
  CHECK(sf_simulate(R"({"replicates": 2})", &bad.p) == SF_E_ARGUMENT);
  CHECK(sf_rates(R"({"n_total": [300, 600], "t_star": [0.7], "replications": 1})", &bad.p) == SF_E_ARGUMENT);
}

TEST_CASE("solver table") {
  const double w[] = {0.5, 1.0};
  char* csv = nullptr;
  REQUIRE(sf_solve_table("paper", w, 2, 1.0 / 3.0, 0.7, 500, &csv) == SF_OK);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,h,eta,h_residual,eta_residual");
  double worst = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    double t, h, eta, rh, re;
    char c;
    std::istringstream row(line);
    row >> t >> c >> h >> c >> eta >> c >> rh >> c >> re;
    worst = std::max({worst, std::abs(rh), std::abs(re)});
    ++rows;
  }
  sf_string_free(csv);
  CHECK(rows >= 500);
  CHECK(worst <= 1e-8);
  CHECK(sf_solve_table("paper", w, 2, 0.0, 0.7, 500, &csv) == SF_E_ARGUMENT);
  CHECK(sf_solve_table("paper", w, 1, 0.5, 0.7, 500, &csv) != SF_OK);
}

}  // TEST_SUITE
