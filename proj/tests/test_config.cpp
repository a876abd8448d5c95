/*
 * Copyright (C) 2026 The seitphr Authors
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
 */
#include <gtest/gtest.h>

#include "seitphr/config.hpp"

namespace seitphr {
namespace {

TEST(Config, ParsesKeyValueLinesAndComments) {
  const ConfigMap m = parse_config_text("# header\n  h_icu_max = 20000  # inline\n\nk_list=3, 6\r\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("h_icu_max"), "20000");
  EXPECT_EQ(m.at("k_list"), "3, 6");
}

TEST(Config, RejectsMalformedText) {
  EXPECT_THROW(parse_config_text("no equals sign"), ConfigError);
  EXPECT_THROW(parse_config_text("= 3"), ConfigError);
  EXPECT_THROW(parse_config_text("a = 1\na = 2"), ConfigError);
}

TEST(Config, AppliesScalarsListsAndIndexedEntries) {
  const RunConfig c = apply_config(parse_config_text("h_icu_max = 5000\n"
                                                     "kind = testing\n"
                                                     "horizon_weeks = 26\n"
                                                     "warm_start = false\n"
                                                     "hmax_list = 1000, 2000\n"
                                                     "matrix.beta0.1.2 = 0.25\n"
                                                     "matrix.beta_min.3.3 = 0.01\n"));
  EXPECT_EQ(c.p.h_icu_max, 5000.0);
  EXPECT_EQ(c.kind, OcpKind::TestingOnly);
  EXPECT_EQ(c.horizon_or(104), 26u);
  EXPECT_FALSE(c.warm_start);
  EXPECT_EQ(c.hmax_list, (std::vector<double>{1000.0, 2000.0}));
  EXPECT_EQ(c.p.beta0(0, 1), 0.25);
  ASSERT_TRUE(c.beta_min.has_value());
  EXPECT_EQ((*c.beta_min)(2, 2), 0.01);
  EXPECT_EQ((*c.beta_min)(0, 0), 0.0);
}

TEST(Config, DefaultsMatchTheModelDefaults) {
  const RunConfig c = apply_config({});
  EXPECT_EQ(c.p.h_icu_max, default_parameters().h_icu_max);
  EXPECT_EQ(c.horizon_or(104), 104u);
  EXPECT_FALSE(c.beta_min.has_value());
}

TEST(Config, RejectsBadValues) {
  auto bad = [](const char* text) { return [=] { (void)apply_config(parse_config_text(text)); }; };
  EXPECT_THROW(bad("unknown_key = 1")(), ConfigError);
  EXPECT_THROW(bad("gamma = fast")(), ConfigError);
  EXPECT_THROW(bad("gamma = 1.5x")(), ConfigError);
  EXPECT_THROW(bad("horizon_weeks = -3")(), ConfigError);
  EXPECT_THROW(bad("warm_start = maybe")(), ConfigError);
  EXPECT_THROW(bad("kind = random")(), ConfigError);
  EXPECT_THROW(bad("vector.N.4 = 0.1")(), ConfigError);
  EXPECT_THROW(bad("vector.N.0 = 0.1")(), ConfigError);
  EXPECT_THROW(bad("matrix.gamma.1.1 = 0.1")(), ConfigError);
  EXPECT_THROW(bad("h_icu_max = -1")(), ConfigError);
  EXPECT_THROW(bad("bisect_lo = 0.7")(), ConfigError);
  EXPECT_THROW(bad("k_list = 2.5")(), ConfigError);
  EXPECT_THROW(bad("k_weeks = 0")(), ConfigError);
  EXPECT_THROW(bad("n_groups = 0")(), ConfigError);
  EXPECT_THROW(bad("delta_list = ")(), ConfigError);
}

TEST(Config, ChangingGroupCountRequiresAllGroupData) {
  EXPECT_THROW((void)apply_config(parse_config_text("n_groups = 1\n")), ConfigError);
  const ModelParameters one = aggregate_to_one_group(default_parameters());
  std::string text = "n_groups = 1\n";
  text += "vector.N.1 = 1\n";
  text += "vector.pi_s.1 = " + std::to_string(one.pi_s[0]) + "\n";
  text += "vector.pi_m.1 = " + std::to_string(one.pi_m[0]) + "\n";
  text += "vector.pi_a.1 = " + std::to_string(1.0 - one.pi_s[0] - one.pi_m[0]) + "\n";
  text += "matrix.beta0.1.1 = 0.3\n";
  const RunConfig c = apply_config(parse_config_text(text));
  EXPECT_EQ(c.p.n_groups, 1u);
  EXPECT_EQ(c.p.beta0(0, 0), 0.3);
}

TEST(Config, EchoRoundTripsExactly) {
  RunConfig c = apply_config(parse_config_text("horizon_weeks = 52\nmatrix.beta_min.2.1 = 0.125\nk_list = 3, 12\n"));
  c.p.gamma = 1.0 / 3.0;
  const std::string echo = echo_config(c);
  const RunConfig back = apply_config(parse_config_text(echo));
  EXPECT_EQ(echo_config(back), echo);
  EXPECT_EQ(back.p.gamma, c.p.gamma);
  EXPECT_EQ(back.p.beta0, c.p.beta0);
  ASSERT_TRUE(back.beta_min.has_value());
  EXPECT_EQ(*back.beta_min, *c.beta_min);
  EXPECT_EQ(back.horizon_weeks, c.horizon_weeks);
}

TEST(Config, MissingFileIsAConfigError) {
  EXPECT_THROW((void)load_config_file("/nonexistent/seitphr.cfg"), ConfigError);
}

}  // namespace
}  // namespace seitphr
