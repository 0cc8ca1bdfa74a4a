#include "oracles.hpp"

#include <nfcjam/dsp.hpp>
#include <nfcjam/error.hpp>
#include <nfcjam/pipeline.hpp>
#include <nfcjam/protocol.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace nfcjam;

namespace {

MagnitudeTrace random_trace(std::size_t n, std::uint64_t seed)
{
   std::mt19937_64 rng(seed);
   std::normal_distribution<double> dist(0.5, 0.3);

   MagnitudeTrace t;
   t.samples.resize(n);

   for (auto &v: t.samples)
      v = dist(rng);

   return t;
}

MagnitudeTrace of(std::vector<double> samples, double fs = DefaultSampleRate)
{
   MagnitudeTrace t;
   t.samples = std::move(samples);
   t.sample_rate = fs;
   return t;
}

/// Gain of the low-pass at `hz`, measured on a synthesized tone away from the edges.
double measured_gain(double cutoff, double hz, double fs)
{
   std::size_t n = 1 << 15;
   auto tone = of(oracle::sine(n, hz, fs), fs);
   auto out = lowpass_filter(tone, cutoff);
   std::size_t guard = 2048;

   return oracle::tone_amplitude(out.samples, guard, n - guard, hz, fs) /
          oracle::tone_amplitude(tone.samples, guard, n - guard, hz, fs);
}

}

TEST_CASE("moving average matches the naive windowed sum")
{
   auto trace = random_trace(3000, 11);

   for (std::size_t w: {1, 2, 3, 7, 16, 32, 64, 65, 255})
   {
      auto fast = moving_average(trace, w);
      auto slow = oracle::moving_average(trace.samples, w);

      double worst = 0;

      for (std::size_t i = 0; i < slow.size(); i++)
         worst = std::max(worst, std::abs(fast.samples[i] - slow[i]));

      CHECK_MESSAGE(worst <= 1e-12, "window " << w);
   }
}

TEST_CASE("moving average rejects empty and oversized windows")
{
   auto trace = random_trace(10, 1);
   CHECK_THROWS_AS(moving_average(trace, 0), ParameterError);
   CHECK_THROWS_AS(moving_average(trace, 11), ParameterError);
}

TEST_CASE("gradient is the forward difference with the last value repeated")
{
   auto g = gradient({1.0, 4.0, 2.0, 2.5});
   REQUIRE(g.size() == 4);
   CHECK(g[0] == 3.0);
   CHECK(g[1] == -2.0);
   CHECK(g[2] == 0.5);
   CHECK(g[3] == 0.5);
}

TEST_CASE("quantile uses the nearest rank")
{
   auto trace = random_trace(501, 3);
   auto sorted = trace.samples;
   std::sort(sorted.begin(), sorted.end());

   CHECK(quantile(trace, {0, trace.size()}, 0.0) == sorted.front());
   CHECK(quantile(trace, {0, trace.size()}, 1.0) == sorted.back());
   CHECK(quantile(trace, {0, trace.size()}, 0.5) == sorted[250]);
}

TEST_CASE("mean and std over a range")
{
   auto t = of({1, 2, 3, 4, 100});
   CHECK(mean(t, {0, 4}) == doctest::Approx(2.5));
   CHECK(std_dev(t, {0, 4}) == doctest::Approx(std::sqrt(1.25)));
}

TEST_CASE("magnitude of I/Q samples")
{
   ComplexTrace c;
   c.i_samples = {3, 0, -1};
   c.q_samples = {4, 2, 0};

   auto m = magnitude(c);
   CHECK(m.samples == std::vector<double> {5, 2, 1});

   c.q_samples.pop_back();
   CHECK_THROWS(magnitude(c));
}

TEST_CASE("normalize scales the peak to one")
{
   auto t = normalize(of({0.5, 2.0, 1.0}));
   CHECK(t.samples == std::vector<double> {0.25, 1.0, 0.5});

   auto zero = normalize(of({0.0, 0.0}));
   CHECK(zero.samples == std::vector<double> {0.0, 0.0});
}

TEST_CASE("trace invariants are enforced")
{
   auto t = of({1.0, std::numeric_limits<double>::quiet_NaN()});
   CHECK_THROWS_AS(t.validate(), ParameterError);

   auto r = of({1.0});
   r.sample_rate = 0;
   CHECK_THROWS_AS(r.validate(), ParameterError);
}

TEST_CASE("low-pass meets its passband and stopband on synthesized tones")
{
   double fs = DefaultSampleRate;

   for (double cutoff: {NarrowCaptureBand.half_width_hz, CardBand.half_width_hz / 2, 200e3})
   {
      for (double frac: {0.1, 0.4, 0.8})
      {
         double g = measured_gain(cutoff, frac * cutoff, fs);
         CHECK_MESSAGE(std::abs(20 * std::log10(g)) <= 1.0, "cutoff " << cutoff << " pass " << frac);
      }

      for (double frac: {1.5, 2.0, 3.0})
      {
         if (frac * cutoff >= fs / 2)
            continue;

         double g = measured_gain(cutoff, frac * cutoff, fs);
         CHECK_MESSAGE(20 * std::log10(g) <= -40.0, "cutoff " << cutoff << " stop " << frac);
      }
   }
}

TEST_CASE("low-pass taps are symmetric with unit DC gain")
{
   auto taps = design_lowpass(423.75e3, DefaultSampleRate);
   REQUIRE(taps.size() % 2 == 1);

   double sum = 0;

   for (std::size_t i = 0; i < taps.size(); i++)
   {
      sum += taps[i];
      CHECK(taps[i] == doctest::Approx(taps[taps.size() - 1 - i]));
   }

   CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
   CHECK(design_lowpass(423.75e3, DefaultSampleRate, 40).size() == 41);
   CHECK_THROWS_AS(design_lowpass(2e6, DefaultSampleRate), ParameterError);
}

TEST_CASE("averaging 16 noisy copies shrinks the residual noise fourfold")
{
   auto clean = simulate_session(ultralight_transcript(default_ultralight_memory()), {}, {}, 5).trace;
   std::mt19937_64 rng(99);
   std::normal_distribution<double> noise(0.0, 0.05);

   auto noisy = [&] {
      auto t = clean;

      for (auto &v: t.samples)
         v += noise(rng);

      return t;
   };

   std::vector<MagnitudeTrace> copies;

   for (int i = 0; i < 16; i++)
      copies.push_back(noisy());

   auto residual = [&](const MagnitudeTrace &t) {
      std::vector<double> r(t.size());

      for (std::size_t i = 0; i < r.size(); i++)
         r[i] = t.samples[i] - clean.samples[i];

      return oracle::population_std(r);
   };

   double single = residual(copies.front());
   double averaged = residual(average_traces(copies, CardKind::Ultralight, 32));

   CHECK(single / averaged == doctest::Approx(4.0).epsilon(0.1));
}
