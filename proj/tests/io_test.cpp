#include <gtest/gtest.h>

#include "handsoff/io.hpp"
#include "test_util.hpp"

namespace handsoff {
namespace {

const char* kDoubleIntegrator = R"({
  "A": [[0, 1], [0, 0]], "B": [[0], [1]], "x0": [1, 0], "T": 4.0
})";

TEST(ProblemJsonTest, Defaults) {
  const ProblemFile p = problem_from_json(parse_json(kDoubleIntegrator));
  EXPECT_EQ(p.A.rows(), 2);
  EXPECT_EQ(p.B.cols(), 1);
  EXPECT_EQ(p.T, 4.0);
  EXPECT_EQ(p.N, 0u);
  EXPECT_EQ(p.b, 8);
  EXPECT_EQ(p.lambda.size(), 0);
}

TEST(ProblemJsonTest, OptionalFields) {
  const ProblemFile p = problem_from_json(parse_json(R"({
    "A": [[0]], "B": [[1, 2]], "x0": [1], "T": 2, "N": 50,
    "lambda": [1, 3], "b": 12})"));
  EXPECT_EQ(p.N, 50u);
  EXPECT_EQ(p.b, 12);
  EXPECT_EQ(p.lambda(1), 3.0);
}

TEST(ProblemJsonTest, Rejections) {
  const auto bad = [](const char* text) {
    return [text] { problem_from_json(parse_json(text)); };
  };
  EXPECT_THROW(bad("{not json")(), InvalidInput);
  EXPECT_THROW(bad(R"({"B": [[1]], "x0": [1], "T": 1})")(), InvalidInput);
  EXPECT_THROW(bad(R"({"A": [[0, 1], [0]], "B": [[0], [1]], "x0": [1, 0], "T": 1})")(),
               DimensionError);
  EXPECT_THROW(bad(R"({"A": [[0]], "B": [[1]], "x0": [1, 2], "T": 1})")(),
               DimensionError);
  EXPECT_THROW(bad(R"({"A": [[0]], "B": [[1]], "x0": [1], "T": "x"})")(), InvalidInput);
  EXPECT_THROW(bad(R"({"A": [[0]], "B": [[1]], "x0": [1], "T": 1, "b": 40})")(),
               InvalidInput);
  EXPECT_THROW(bad(R"({"A": [[0]], "B": [[1]], "x0": [1], "T": 1, "N": 0})")(),
               InvalidInput);
  EXPECT_THROW(bad(R"({"A": [[0]], "B": [[1]], "x0": [1], "T": 1.5, "N": 2.5})")(),
               InvalidInput);
}

TEST(SignalJsonTest, RoundTrip) {
  SwitchingSignal s = SwitchingSignal::zero(3.0, 2);
  s.channels[0].initial = -1;
  s.channels[0].switches = {{0.5, 0}, {1.25, 1}};
  s.channels[1].switches = {{2.0, -1}};
  const SwitchingSignal back = signal_from_json(parse_json(signal_to_json(s).dump()));
  EXPECT_EQ(back, s);
}

TEST(SignalJsonTest, ValidatesContent) {
  EXPECT_ANY_THROW(signal_from_json(parse_json(
      R"({"T": 1, "channels": [{"init": 2, "switches": []}]})")));
  EXPECT_ANY_THROW(signal_from_json(parse_json(
      R"({"T": 1, "channels": [{"init": 0, "switches": [[0.7, 1], [0.3, 0]]}]})")));
  EXPECT_THROW(signal_from_json(parse_json(
                   R"({"T": 1, "channels": [{"init": 0, "switches": [[0.5]]}]})")),
               InvalidInput);
}

TEST(TraceJsonTest, SummaryFields) {
  SimConfig c;
  c.T = 4.0;
  const SimTrace t =
      run_closed_loop(testing::double_integrator(), testing::vec({1, 0}), c, {});
  const json j = trace_json(t);
  ASSERT_EQ(j.at("horizons").size(), 1u);
  EXPECT_EQ(j.at("summary").at("total_bits").get<std::size_t>(), t.total_bits);
  EXPECT_EQ(j.at("horizons")[0].at("status"), "optimal");
  EXPECT_EQ(signal_from_json(j.at("horizons")[0].at("applied")), t.horizons[0].applied);
}

}  // namespace
}  // namespace handsoff
