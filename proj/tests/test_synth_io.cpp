#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "vmcp/errors.hpp"
#include "vmcp/io.hpp"
#include "vmcp/synth.hpp"

namespace {

using vmcp::GeneratorConfig;
using vmcp::Sample;

TEST(Synth, HomogeneousStreamHasBaseRateLabels) {
  GeneratorConfig g;
  g.heterogeneity = 0.0;
  g.n = 10000;
  g.seed = 4;
  const auto samples = vmcp::generate(g);
  double sum = 0.0;
  double sq = 0.0;
  for (const Sample& s : samples) {
    for (double p : s.probs) ASSERT_EQ(p, 0.4);
    const double size = s.labels.size();
    sum += size;
    sq += size * size;
  }
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / (n - 1.0));
  EXPECT_NEAR(mean, 4.0, 3.0 * se);
}

TEST(Synth, SameSeedSameStream) {
  GeneratorConfig g;
  g.n = 200;
  g.seed = 77;
  const auto a = vmcp::generate(g);
  const auto b = vmcp::generate(g);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].probs, b[i].probs);
    EXPECT_EQ(a[i].labels, b[i].labels);
  }
  g.seed = 78;
  EXPECT_NE(vmcp::generate(g)[0].probs, a[0].probs);
}

// Bucket (p, y) pairs by probability decile; each bucket's label frequency
// must sit within 3 binomial standard errors of its mean probability.
void expect_calibrated(const std::vector<Sample>& samples) {
  std::vector<double> p_sum(10, 0.0), y_sum(10, 0.0), count(10, 0.0), var_sum(10, 0.0);
  for (const Sample& s : samples) {
    for (int k = 0; k < s.num_classes(); ++k) {
      const double p = s.probs[k];
      const int b = std::min(9, static_cast<int>(p * 10.0));
      p_sum[b] += p;
      var_sum[b] += p * (1.0 - p);
      y_sum[b] += s.labels.contains(k) ? 1.0 : 0.0;
      count[b] += 1.0;
    }
  }
  for (int b = 0; b < 10; ++b) {
    if (count[b] < 50) continue;
    const double se = std::sqrt(var_sum[b]) / count[b];
    EXPECT_NEAR(y_sum[b] / count[b], p_sum[b] / count[b], 3.0 * se) << "bucket " << b;
  }
}

TEST(Synth, CalibratedByConstruction) {
  GeneratorConfig g;
  g.n = 10000;
  g.seed = 12;
  expect_calibrated(vmcp::generate(g));
}

TEST(Synth, MiscalibrationDistortsEmittedProbabilities) {
  GeneratorConfig g;
  g.n = 5000;
  g.seed = 12;
  g.miscalibration = 0.5;
  const auto samples = vmcp::generate(g);
  double p_sum = 0.0, y_sum = 0.0;
  for (const Sample& s : samples) {
    for (int k = 0; k < s.num_classes(); ++k) {
      p_sum += s.probs[k];
      y_sum += s.labels.contains(k) ? 1.0 : 0.0;
    }
  }
  EXPECT_LT(p_sum, 0.75 * y_sum);
}

TEST(Synth, RejectsInvalidRates) {
  GeneratorConfig g;
  g.base_rate = 1.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g.base_rate = 0.4;
  g.heterogeneity = -1.0;
  EXPECT_THROW(vmcp::generate(g), std::invalid_argument);
  g.heterogeneity = 1.0;
  g.miscalibration = 0.0;
  EXPECT_THROW(vmcp::generate(g), std::invalid_argument);
  g.miscalibration = 1.0;
  g.num_classes = 0;
  EXPECT_THROW(vmcp::generate(g), std::invalid_argument);
}

TEST(Synth, MnistWeights) {
  const auto w = vmcp::mnist_weights(10);
  EXPECT_EQ(w[0], 10.0);
  EXPECT_EQ(w[5], 5.0);
  double total = 0.0;
  for (double x : w) total += x;
  EXPECT_EQ(total, 55.0);
}

TEST(StreamCsv, SmallStreamLayout) {
  GeneratorConfig g;
  g.n = 10;
  g.num_classes = 3;
  std::ostringstream out;
  vmcp::write_stream_csv(out, vmcp::generate(g));
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "p_0,p_1,p_2,y_0,y_1,y_2");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 10);
}

TEST(StreamCsv, RoundTripKeepsCalibration) {
  GeneratorConfig g;
  g.n = 10000;
  g.seed = 3;
  const auto original = vmcp::generate(g);
  std::ostringstream out;
  vmcp::write_stream_csv(out, original);
  std::istringstream in(out.str());
  const auto loaded = vmcp::read_stream_csv(in);
  ASSERT_EQ(loaded.size(), original.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    ASSERT_EQ(loaded[i].labels, original[i].labels);
    for (int k = 0; k < 10; ++k) ASSERT_NEAR(loaded[i].probs[k], original[i].probs[k], 5e-10);
  }
  expect_calibrated(loaded);

  std::ostringstream again;
  vmcp::write_stream_csv(again, loaded);
  EXPECT_EQ(again.str(), out.str());
}

void expect_data_error(const std::string& text, std::size_t line) {
  std::istringstream in(text);
  try {
    vmcp::read_stream_csv(in);
    FAIL() << "expected DataError for:\n" << text;
  } catch (const vmcp::DataError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
  }
}

TEST(StreamCsv, MalformedRowsReportLine) {
  expect_data_error("p_0,p_1,y_0,y_1\n0.5,0.5,1,0\n1.5,0.2,0,0\n", 3);
  expect_data_error("p_0,p_1,y_0,y_1\n0.5,0.5,1\n", 2);
  expect_data_error("p_0,p_1,y_0,y_1\n0.5,0.5,1,0\n0.1,0.2,2,0\n", 3);
  expect_data_error("p_0,p_1,y_0,y_1\n0.5,abc,1,0\n", 2);
  expect_data_error("p_0,p_1,y_0\n", 1);
  expect_data_error("p_0,q_1,y_0,y_1\n", 1);
  expect_data_error("", 1);
}

TEST(StreamCsv, AcceptsCrlfAndBlankLines) {
  std::istringstream in("p_0,y_0\r\n0.25,1\r\n\r\n0.75,0\r\n");
  const auto s = vmcp::read_stream_csv(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].probs[0], 0.25);
  EXPECT_TRUE(s[0].labels.contains(0));
  EXPECT_FALSE(s[1].labels.contains(0));
}

}  // namespace
