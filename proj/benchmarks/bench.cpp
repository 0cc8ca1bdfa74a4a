#include <nfcjam/dsp.hpp>
#include <nfcjam/jammer.hpp>
#include <nfcjam/modem.hpp>
#include <nfcjam/pipeline.hpp>
#include <nfcjam/protocol.hpp>
#include <nfcjam/spectrum.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace nfcjam;

namespace {

MagnitudeTrace noise_trace(std::size_t n)
{
   std::mt19937_64 rng(1);
   std::normal_distribution<double> dist(1.0, 0.1);

   MagnitudeTrace t;
   t.samples.resize(n);

   for (auto &v: t.samples)
      v = dist(rng);

   return t;
}

void BM_MovingAverage(benchmark::State &state)
{
   auto t = noise_trace(static_cast<std::size_t>(state.range(0)));

   for (auto _: state)
      benchmark::DoNotOptimize(moving_average(t, 64));

   state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MovingAverage)->Arg(1 << 14)->Arg(1 << 17);

void BM_DemodulateCard(benchmark::State &state)
{
   ModemConfig cfg;
   auto msg = make_message(Sender::Card, cmd::FastReadResult, Bytes(80, 0x5A));
   auto env = modulate_message(msg, cfg);

   for (auto _: state)
      benchmark::DoNotOptimize(demodulate(env, Sender::Card, cfg));
}
BENCHMARK(BM_DemodulateCard);

void BM_DemodulateReader(benchmark::State &state)
{
   ModemConfig cfg;
   auto env = modulate_message(make_message(Sender::Reader, cmd::FastRead, {0x3a, 0x00, 0x13}), cfg);

   for (auto _: state)
      benchmark::DoNotOptimize(demodulate(env, Sender::Reader, cfg));
}
BENCHMARK(BM_DemodulateReader);

void BM_EstimatePsd(benchmark::State &state)
{
   auto t = noise_trace(1 << 16);

   for (auto _: state)
      benchmark::DoNotOptimize(estimate_psd(t, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_EstimatePsd)->Arg(256)->Arg(1024)->Arg(4096);

void BM_SimulateSession(benchmark::State &state)
{
   auto transcript = ultralight_transcript(default_ultralight_memory());
   NoiseProfile profile {GaussianWhite {0.1}};
   std::uint64_t seed = 0;

   for (auto _: state)
      benchmark::DoNotOptimize(simulate_session(transcript, profile, {}, seed++));
}
BENCHMARK(BM_SimulateSession);

void BM_RunAttack(benchmark::State &state)
{
   auto transcript = ultralight_transcript(default_ultralight_memory());
   NoiseProfile profile {GaussianWhite {0.1}};
   AttackConfig cfg;
   cfg.repetitions = 8;
   cfg.averaging_n = static_cast<std::size_t>(state.range(0));

   for (auto _: state)
      benchmark::DoNotOptimize(run_attack(transcript, profile, cfg, {}, 1));

   state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_RunAttack)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}

BENCHMARK_MAIN();
