#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "json.hpp"

#include "fdnc/io.hpp"
#include "fdnc/rng.hpp"
#include "fdnc/timing.hpp"

using namespace fdnc;

TEST(FormatDouble, ShortestRoundTrip) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10'000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double("+2"), 2.0);
  EXPECT_THROW(parse_double("1.5x"), IoError);
  EXPECT_THROW(parse_double(""), IoError);
}

TEST(Csv, RoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "fdnc_test_io";
  CsvTable t{{"theta_1", "log_gamma"}, {{1.0, -2.5}, {0.1, 3e-300}}};
  write_csv(dir / "t.csv", t);
  const auto back = read_csv(dir / "t.csv");
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("log_gamma"), 1u);
  EXPECT_THROW(back.column("nope"), IoError);
  write_text(dir / "bad.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(dir / "bad.csv"), IoError);
  EXPECT_THROW(read_csv(dir / "missing.csv"), IoError);
  EXPECT_EQ(theta_header(3), (std::vector<std::string>{"theta_1", "theta_2", "theta_3"}));
}

namespace {

TimingReport sample_report() {
  TimingReport r;
  MethodTiming rfis;
  rfis[Stage::mcmc] = 1.0;
  rfis[Stage::training] = 2.0;
  rfis[Stage::weighting] = 0.5;
  MethodTiming cmc;
  cmc[Stage::mcmc] = 1.0;
  cmc[Stage::combination] = 0.25;
  r.methods = {{"rfis", rfis}, {"cmc", cmc}};
  return r;
}

}  // namespace

TEST(Timing, TotalsInBothFormats) {
  const auto r = sample_report();
  EXPECT_DOUBLE_EQ(r.methods.at("rfis").total(), 3.5);
  const auto j = nlohmann::json::parse(timing_to_json(r));
  EXPECT_DOUBLE_EQ(j["rfis"]["total"].get<double>(), 3.5);
  EXPECT_TRUE(j["rfis"]["combination"].is_null());
  const std::string text = timing_to_text(r);
  EXPECT_NE(text.find("3.500"), std::string::npos);
  for (const char* row : {"MCMC", "Training", "Weighting", "Combination", "Total"}) {
    EXPECT_NE(text.find(row), std::string::npos) << row;
  }
}

TEST(Timing, MissingStageRendersDash) {
  const std::string text = timing_to_text(sample_report());
  const auto line_start = text.find("Training");
  const auto line = text.substr(line_start, text.find('\n', line_start) - line_start);
  // Columns are ordered cmc, rfis; cmc has no training stage.
  EXPECT_NE(line.find("\xE2\x80\x94"), std::string::npos);
  EXPECT_NE(line.find("2.000"), std::string::npos);
}

TEST(Timing, JsonRoundTrip) {
  const auto r = sample_report();
  EXPECT_EQ(timing_from_json(timing_to_json(r)), r);
}

TEST(Timing, EmitWritesBothFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "fdnc_test_timing";
  emit_timing(sample_report(), dir);
  EXPECT_EQ(timing_from_json(read_text(dir / "timing.json")), sample_report());
  EXPECT_EQ(read_text(dir / "timing.txt"), timing_to_text(sample_report()));
}
