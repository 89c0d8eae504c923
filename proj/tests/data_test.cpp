/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "survfuse/data.hpp"
#include "survfuse/dgp.hpp"
#include "survfuse/error.hpp"

using namespace survfuse;

TEST_SUITE("core_data") {

TEST_CASE("four well-formed rows") {
  const std::string text =
      "source,w1,w2,y,delta_r,c,delta_c\n"
      "1,0.2,1,0.5,1,,\n"
      "1,0.4,0,1.1,0,,\n"
      "0,0.6,1,,,0.7,1\n"
      "0,0.8,0,,,0.9,0\n";
  const auto s = parse_csv(text);
  CHECK(s.size() == 4);
  CHECK(s.n1() == 2);
  CHECK(s.n0() == 2);
  CHECK(s.dim() == 2);
  CHECK(s.pi() == 0.5);
  CHECK_FALSE(s.pi_is_design());
  CHECK(s[2].source == 0);
  CHECK(s[2].c == 0.7);
  CHECK(s[2].delta_c == 1);
  CHECK(s.max_time() == 1.1);

  const auto d = parse_csv(text, 1.0 / 3.0);
  CHECK(d.pi_is_design());
  CHECK(d.pi() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("right-censored row carrying a current-status indicator is rejected by row") {
  const std::string text =
      "source,w1,y,delta_r,c,delta_c\n"
      "1,0.2,0.5,1,,\n"
      "1,0.4,1.1,0,0.7,1\n"
      "0,0.6,,,0.7,1\n";
  try {
    parse_csv(text);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.rows().size() == 1);
    CHECK(e.rows()[0] == 2);
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("other schema violations") {
  CHECK_THROWS_AS(parse_csv(""), Error);
  CHECK_THROWS_AS(parse_csv("source,w1,y,delta_r,c\n1,0.1,0.5,1,\n"), Error);  // missing delta_c
  CHECK_THROWS_AS(parse_csv("source,w1,y,delta_r,c,delta_c\n2,0.1,0.5,1,,\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("source,w1,y,delta_r,c,delta_c\n1,0.1,-0.5,1,,\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("source,w1,y,delta_r,c,delta_c\n0,0.1,,,0.5,3\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("source,w1,y,delta_r,c,delta_c\n1,nan,0.5,1,,\n"), ValidationError);
  CHECK_THROWS_AS(read_csv("/nonexistent/dir/x.csv"), Error);
}

TEST_CASE("simulated sample round-trips through CSV") {
  RngStream rng(1, 0);
  const auto s = generate_dataset(DgpSpec::paper(), 300, rng);
  const std::string path = "survfuse_roundtrip_test.csv";
  write_csv(s, path);
  const auto back = read_csv(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == s.size());
  CHECK(back.n1() == s.n1());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].source == s[i].source);
    CHECK(back[i].w == s[i].w);
    if (s[i].source == 1) {
      CHECK(back[i].y == s[i].y);
      CHECK(back[i].delta_r == s[i].delta_r);
    } else {
      CHECK(back[i].c == s[i].c);
      CHECK(back[i].delta_c == s[i].delta_c);
    }
  }
  CHECK(to_csv(back) == to_csv(s));
}

TEST_CASE("inspection window from the current-status times") {
  std::vector<FusedObservation> obs{FusedObservation::right_censored({0.1}, 0.4, 1)};
  for (double c : {0.6, 0.7, 0.8}) obs.push_back(FusedObservation::current_status({0.5}, c, 0));
  const auto w = inspection_window(FusedSample(obs));
  CHECK(w.c_lower == 0.6);
  CHECK(w.c_upper == 0.8);

  std::vector<FusedObservation> grid{FusedObservation::right_censored({0.1}, 0.4, 1)};
  for (int i = 0; i < 100; ++i) grid.push_back(FusedObservation::current_status({0.5}, 0.5 + 0.5 * i / 99.0, 0));
  const auto t = inspection_window(FusedSample(grid), 0.05, 0.95);
  CHECK(std::abs(t.c_lower - 0.525) < 1e-3);
  CHECK(std::abs(t.c_upper - 0.975) < 1e-3);

  std::size_t dropped = 0;
  const auto kept = restrict_to_window(FusedSample(grid), t, &dropped);
  CHECK(dropped == 10);
  CHECK(kept.n0() == 90);
  CHECK(kept.n1() == 1);

  std::vector<FusedObservation> flat{FusedObservation::right_censored({0.1}, 0.4, 1)};
  for (int i = 0; i < 5; ++i) flat.push_back(FusedObservation::current_status({0.5}, 0.75, 1));
  CHECK_THROWS_AS(inspection_window(FusedSample(flat)), Error);
}

}  // TEST_SUITE
