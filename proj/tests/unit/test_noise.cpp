#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "npf/csv.hpp"
#include "npf/forward.hpp"
#include "npf/parallel.hpp"
#include "npf/philox.hpp"
#include "npf/stats.hpp"

TEST(Philox, KnownAnswer) {
  // Reference vectors of the Random123 distribution (philox4x32_10).
  const auto zero = npf::Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (npf::Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const auto ones = npf::Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                              {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones, (npf::Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  const auto pi = npf::Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                            {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi, (npf::Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, OpenUnitInterval) {
  EXPECT_GT(npf::to_open_unit(0, 0), 0.0);
  EXPECT_LT(npf::to_open_unit(0xffffffffu, 0xffffffffu), 1.0);
}

TEST(Noise, MomentsAndDeterminism) {
  const npf::TimeGrid grid(0.0, 1.0, 50);
  const npf::NoiseBundle noise(123, 4000, grid, 3);
  double sum = 0.0, sq = 0.0, quad = 0.0, cross = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < noise.n_paths(); ++p) {
    for (int i = 0; i < grid.steps(); ++i) {
      const npf::Vector w = noise.increment(p, i) / std::sqrt(grid.dt());
      for (int j = 0; j < 3; ++j) {
        sum += w[j];
        sq += w[j] * w[j];
        quad += std::pow(w[j], 4);
        ++count;
      }
      cross += w[0] * w[1];
    }
  }
  const double n = static_cast<double>(count);
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(quad / n, 3.0, 4.0 * std::sqrt(96.0 / n));
  EXPECT_NEAR(cross / (n / 3.0), 0.0, 4.0 / std::sqrt(n / 3.0));

  const npf::NoiseBundle again(123, 4000, grid, 3);
  EXPECT_EQ(noise.increment(17, 9), again.increment(17, 9));
  const npf::NoiseBundle other(124, 4000, grid, 3);
  EXPECT_NE(noise.increment(17, 9), other.increment(17, 9));
  EXPECT_TRUE(noise == again);
  EXPECT_FALSE(noise == other);
}

TEST(Noise, RejectsEmptyBundle) {
  const npf::TimeGrid grid(0.0, 1.0, 5);
  try {
    npf::NoiseBundle(1, 0, grid, 1);
    FAIL();
  } catch (const npf::InputError& e) {
    EXPECT_STREQ(e.what(), "mc.n_paths must be ≥ 1");
  }
}

TEST(TimeGrid, Basics) {
  const npf::TimeGrid g(0.25, 1.0, 3);
  EXPECT_DOUBLE_EQ(g.dt(), 0.25);
  EXPECT_DOUBLE_EQ(g.node(1), 0.5);
  EXPECT_EQ(g.node(3), 1.0);
  EXPECT_THROW(npf::TimeGrid(0.0, 1.0, 0), npf::InputError);
  EXPECT_THROW(npf::TimeGrid(1.0, 1.0, 4), npf::InputError);
}

TEST(Parallel, CoversRangeOnceAndRethrows) {
  setenv("NPF_THREADS", "4", 1);
  EXPECT_EQ(npf::worker_count(), 4u);
  std::vector<int> hits(10000, 0);
  npf::parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  }, 16);
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(npf::parallel_for(1000, [](std::size_t b, std::size_t) {
    if (b > 0) throw std::runtime_error("boom");
  }, 10),
               std::runtime_error);
  setenv("NPF_THREADS", "zero", 1);
  EXPECT_GE(npf::worker_count(), 1u);
  unsetenv("NPF_THREADS");
}

TEST(Stats, SampleEstimate) {
  const std::vector<double> same(100, 0.1);
  const auto e = npf::sample_estimate(same);
  EXPECT_EQ(e.mean, 0.1);
  EXPECT_EQ(e.std_error, 0.0);
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto f = npf::sample_estimate(v);
  EXPECT_DOUBLE_EQ(f.mean, 2.5);
  EXPECT_DOUBLE_EQ(f.std_error, std::sqrt((5.0 / 3.0) / 4.0));
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(npf::format_double(0.1), "0.1");
  EXPECT_EQ(npf::format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(npf::format_double(5.0), "5");
  EXPECT_EQ(npf::format_double(std::nan("")), "nan");
  for (double v : {1e-300, 123456.789, -2.5e17, 0.2059}) {
    EXPECT_EQ(std::stod(npf::format_double(v)), v);
  }
  std::ostringstream out;
  npf::CsvWriter csv(out);
  csv.header({"a", "b"});
  csv.field(1).field("x,y").end_row();
  EXPECT_EQ(out.str(), "a,b\n1,\"x,y\"\n");
}
