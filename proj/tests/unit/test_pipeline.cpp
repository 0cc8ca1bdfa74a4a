#include <nfcjam/error.hpp>
#include <nfcjam/metrics_io.hpp>
#include <nfcjam/pipeline.hpp>
#include <nfcjam/protocol.hpp>

#include <doctest.h>

#include <cstdlib>
#include <random>

using namespace nfcjam;

namespace {

Transcript ultralight()
{
   return ultralight_transcript(default_ultralight_memory());
}

/// Segment overlapping `truth` the most, if any.
const Segment *best_match(const std::vector<Segment> &segs, Interval truth)
{
   const Segment *best = nullptr;
   std::size_t bestOverlap = 0;

   for (const auto &s: segs)
   {
      std::size_t lo = std::max(s.range.begin, truth.begin);
      std::size_t hi = std::min(s.range.end, truth.end);

      if (hi > lo && hi - lo > bestOverlap)
      {
         bestOverlap = hi - lo;
         best = &s;
      }
   }

   return best;
}

long diff(std::size_t a, std::size_t b)
{
   return static_cast<long>(a) - static_cast<long>(b);
}

}

TEST_CASE("sender thresholds follow the modem")
{
   auto t = SenderThresholds::from_modem({});
   CHECK(t.low == doctest::Approx(0.46));
   CHECK(t.high == doctest::Approx(0.5));
}

TEST_CASE("attack config invariants")
{
   AttackConfig cfg;
   CHECK_NOTHROW(cfg.validate());

   cfg.repetitions = 0;
   CHECK_THROWS_AS(cfg.validate(), ParameterError);

   cfg = {};
   cfg.averaging_n = 0;
   CHECK_THROWS_AS(cfg.validate(), ParameterError);

   cfg = {};
   cfg.std_diff_threshold = 0;
   CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("simulated sessions annotate every message in order")
{
   ModemConfig modem;
   auto truth = ultralight();
   auto sim = simulate_session(truth, {}, modem, 3);

   REQUIRE(sim.annotations.size() == truth.messages.size());

   for (std::size_t i = 0; i < sim.annotations.size(); i++)
   {
      CHECK(sim.annotations[i].message_index == i);
      CHECK(sim.annotations[i].sender == truth.messages[i].sender);
      CHECK(sim.field.begin <= sim.annotations[i].range.begin);
      CHECK(sim.annotations[i].range.end <= sim.field.end);

      if (i > 0)
         CHECK(sim.annotations[i - 1].range.end < sim.annotations[i].range.begin);
   }

   CHECK(*std::max_element(sim.trace.samples.begin(), sim.trace.samples.end()) == doctest::Approx(1.0));

   // capture length does not depend on the session seed, so sessions can be averaged
   for (std::uint64_t seed = 4; seed < 20; seed++)
      CHECK(simulate_session(truth, {}, modem, seed).trace.size() == sim.trace.size());
}

TEST_CASE("field detection brackets the whole exchange")
{
   auto sim = simulate_session(ultralight(), {}, {}, 8);
   auto fields = detect_field_activation(sim.trace, {});

   REQUIRE(fields.size() == 1);
   CHECK(fields[0].begin <= sim.annotations.front().range.begin);
   CHECK(fields[0].end >= sim.annotations.back().range.end);
   CHECK(std::abs(diff(fields[0].begin, sim.field.begin)) <= 32);

   MagnitudeTrace off;
   off.samples.assign(5000, 0.0);
   CHECK_THROWS_AS(detect_field_activation(off, {}), FieldNotFound);
}

TEST_CASE("noise-free segmentation reproduces the annotations exactly")
{
   AttackConfig cfg;

   for (std::uint64_t seed = 0; seed < 10; seed++)
   {
      for (const auto &truth: {ultralight(), classic_transcript(default_classic_memory(), seed)})
      {
         auto sim = simulate_session(truth, {}, {}, seed);
         auto field = detect_field_activation(sim.trace, cfg).front();
         auto segs = segment_messages(sim.trace, field, cfg);

         REQUIRE(segs.size() == sim.annotations.size());

         for (std::size_t i = 0; i < segs.size(); i++)
         {
            CHECK(segs[i].range == sim.annotations[i].range);
            CHECK(segs[i].sender_hint == sim.annotations[i].sender);
         }
      }
   }
}

TEST_CASE("segment boundaries stay within a quarter bit under 5% Gaussian noise in 95% of seeds")
{
   AttackConfig cfg;
   ModemConfig modem;
   long tolerance = static_cast<long>(modem.samples_per_bit() / 4);
   NoiseProfile profile {GaussianWhite {0.05}};
   auto truth = ultralight();

   std::size_t goodSeeds = 0;

   for (std::uint64_t seed = 0; seed < 100; seed++)
   {
      auto sim = simulate_session(truth, profile, modem, seed);
      auto field = detect_field_activation(sim.trace, cfg).front();
      auto segs = segment_messages(sim.trace, field, cfg);

      bool good = true;

      for (const auto &a: sim.annotations)
      {
         const auto *s = best_match(segs, a.range);

         good = good && s != nullptr && std::abs(diff(s->range.begin, a.range.begin)) <= tolerance &&
                std::abs(diff(s->range.end, a.range.end)) <= tolerance;
      }

      goodSeeds += good;
   }

   CHECK(goodSeeds >= 95);
}

TEST_CASE("an idle field holds no segments")
{
   MagnitudeTrace idle;
   idle.samples.assign(4000, 0.0);
   std::fill(idle.samples.begin() + 500, idle.samples.begin() + 3500, 1.0);

   CHECK_THROWS_AS(segment_messages(idle, {500, 3500}, {}), SegmentationEmpty);
}

TEST_CASE("discard rules")
{
   AttackConfig cfg;
   auto sim = simulate_session(ultralight(), {}, {}, 2);

   CHECK_FALSE(discard_reason(sim.trace, cfg).has_value());

   auto spiked = sim.trace;
   spiked.samples[spiked.size() / 2] = 1.6;
   CHECK(discard_reason(spiked, cfg) == "amplitude above threshold");

   MagnitudeTrace dark;
   dark.samples.assign(sim.trace.size(), 0.0);
   CHECK(discard_reason(dark, cfg) == "no field activation");

   auto shielded = simulate_session(ultralight(), {Shielding {0.0}}, {}, 2);
   CHECK(discard_reason(shielded.trace, cfg) == "no detectable card signal");

   auto kept = discard_corrupted({sim.trace, spiked, dark, shielded.trace, sim.trace}, cfg);
   CHECK(kept == std::vector<std::size_t> {0, 4});
}

TEST_CASE("averaging refuses Classic sessions")
{
   auto sim = simulate_session(ultralight(), {}, {}, 2);
   CHECK_THROWS_AS(average_traces({sim.trace, sim.trace}, CardKind::Classic, 32), StructuralError);

   AttackConfig cfg;
   cfg.repetitions = 4;
   cfg.averaging_n = 2;
   CHECK_THROWS_AS(run_attack(classic_transcript(default_classic_memory(), 1), {}, cfg, {}, 1), ParameterError);
}

TEST_CASE("averaging identical traces is the identity")
{
   auto sim = simulate_session(ultralight(), {}, {}, 6);
   auto avg = average_traces({sim.trace, sim.trace, sim.trace, sim.trace}, CardKind::Ultralight, 32);

   for (std::size_t i = 0; i < avg.size(); i++)
      REQUIRE(avg.samples[i] == doctest::Approx(sim.trace.samples[i]).epsilon(1e-12));
}

TEST_CASE("clean recovery returns every on-air payload")
{
   auto truth = ultralight();
   auto sim = simulate_session(truth, {}, {}, 12);
   auto rec = recover_transcript(sim.trace, {}, {});

   REQUIRE(rec.messages.size() == truth.messages.size());
   CHECK(rec.complete);

   for (std::size_t i = 0; i < truth.messages.size(); i++)
   {
      CHECK(rec.messages[i].sender == truth.messages[i].sender);
      REQUIRE(rec.messages[i].payload.has_value());
      CHECK(*rec.messages[i].payload == on_air_bytes(truth.messages[i]));
   }
}

TEST_CASE("session scoring on hand-built recoveries")
{
   Transcript truth;
   truth.messages = {make_message(Sender::Reader, cmd::Read, {0x30, 0x00}),
                     make_message(Sender::Card, cmd::Atqa, {0x44, 0x00}),
                     make_message(Sender::Card, cmd::Sak, {0x08})};

   std::vector<Annotation> ann = {{Sender::Reader, {100, 200}, 0}, {Sender::Card, {300, 400}, 1},
                                  {Sender::Card, {500, 600}, 2}};

   RecoveredTranscript rec;
   rec.messages = {
      {Sender::Reader, {100, 200}, on_air_bytes(truth.messages[0]), ""},
      {Sender::Card, {300, 400}, on_air_bytes(truth.messages[1]), ""},
      // covers 40% of the third message: not detected
      {std::nullopt, {540, 580}, std::nullopt, "unknown sender"},
   };

   auto c = evaluate_session(truth, ann, rec);
   CHECK(c.reader_total == 1);
   CHECK(c.reader_demodulated == 1);
   CHECK(c.card_total == 2);
   CHECK(c.card_detected == 1);
   CHECK(c.card_demodulated == 1);
   CHECK_FALSE(c.success);

   // an Unknown segment over most of the message counts as detected, not demodulated
   rec.messages[2].range = {500, 560};
   c = evaluate_session(truth, ann, rec);
   CHECK(c.card_detected == 2);
   CHECK(c.card_demodulated == 1);

   rec.messages[2] = {Sender::Card, {500, 600}, on_air_bytes(truth.messages[2]), ""};
   c = evaluate_session(truth, ann, rec);
   CHECK(c.card_demodulated == 2);
   CHECK(c.success);

   // a payload with the wrong bytes is not a demodulation
   rec.messages[1].payload = Bytes {0x44, 0x01};
   c = evaluate_session(truth, ann, rec);
   CHECK(c.card_detected == 2);
   CHECK(c.card_demodulated == 1);
   CHECK_FALSE(c.success);

   rec.discarded = true;
   c = evaluate_session(truth, ann, rec);
   CHECK(c.card_detected == 0);
   CHECK_FALSE(c.success);
}

TEST_CASE("aggregate rates are plain ratios of the totals")
{
   std::vector<SessionCounts> sessions = {
      {4, 3, 2, 4, 4, false},
      {4, 4, 4, 4, 3, true},
      {4, 0, 0, 4, 1, false},
   };

   auto m = aggregate_metrics(sessions, 2);
   CHECK(m.card_detection_rate == doctest::Approx(7.0 / 12));
   CHECK(m.card_demodulation_rate == doctest::Approx(6.0 / 12));
   CHECK(m.reader_demodulation_rate == doctest::Approx(8.0 / 12));
   CHECK(m.attack_success_rate == doctest::Approx(1.0 / 3));
   CHECK(m.per_session_success == std::vector<bool> {false, true, false});
   CHECK(m.kept == 2);
   CHECK(m.bypassed());

   auto empty = aggregate_metrics({}, 0);
   CHECK(empty.card_detection_rate == 0.0);
   CHECK(empty.attack_success_rate == 0.0);
   CHECK_FALSE(empty.bypassed());
}

TEST_CASE("metric invariants over randomized runs")
{
   std::mt19937_64 rng(77);
   std::uniform_real_distribution<double> factor(0.0, 0.3);

   for (int run = 0; run < 100; run++)
   {
      AttackConfig cfg;
      cfg.repetitions = 1 + rng() % 3;
      cfg.threads = 1;

      bool classic = rng() % 2;
      NoiseProfile profile {GaussianWhite {factor(rng)}};
      auto source = classic ? source_for(default_classic_memory()) : source_for(default_ultralight_memory());
      auto r = run_attack(source, classic ? CardKind::Classic : CardKind::Ultralight, profile, cfg, {}, rng());
      const auto &m = r.metrics;

      CHECK(m.card_demodulation_rate <= m.card_detection_rate);
      CHECK(m.totals.card_demodulated <= m.totals.card_detected);

      std::size_t successes = std::count(m.per_session_success.begin(), m.per_session_success.end(), true);
      CHECK(m.attack_success_rate == static_cast<double>(successes) / static_cast<double>(cfg.repetitions));
   }
}

TEST_CASE("run_attack is deterministic and ignores the thread count")
{
   AttackConfig cfg;
   cfg.repetitions = 6;
   NoiseProfile profile {GaussianWhite {0.1}};

   auto a = run_attack(ultralight(), profile, cfg, {}, 5);
   cfg.threads = 1;
   auto b = run_attack(ultralight(), profile, cfg, {}, 5);

   CHECK(metrics_to_json(a.metrics).dump() == metrics_to_json(b.metrics).dump());
   CHECK(a.recovered == b.recovered);
}

TEST_CASE("reactive metrics do not depend on the idle lead-in")
{
   AttackConfig cfg;
   cfg.repetitions = 8;

   for (NoiseProfile profile: {NoiseProfile {GaussianWhite {0.1}}, NoiseProfile {MultiTone {0.2e6}}})
   {
      SessionLayout shortLead;
      SessionLayout longLead;
      longLead.lead_in_bits = 400;

      auto a = run_attack(source_for(default_ultralight_memory()), CardKind::Ultralight, profile, cfg, {}, 9,
                          shortLead);
      auto b = run_attack(source_for(default_ultralight_memory()), CardKind::Ultralight, profile, cfg, {}, 9,
                          longLead);

      CHECK(metrics_to_json(a.metrics).dump() == metrics_to_json(b.metrics).dump());
   }
}

TEST_CASE("sweep defaults reproduce the standard parameter lists")
{
   CHECK(default_sweep_values(SweepFamily::GaussianFactors) == std::vector<double> {0.05, 0.10, 0.15, 0.20, 0.25, 0.30});
   CHECK(default_sweep_values(SweepFamily::ToneSpacings) ==
         std::vector<double> {0.05e6, 0.10e6, 0.15e6, 0.20e6, 0.25e6});

   AttackConfig cfg;
   cfg.repetitions = 2;
   auto rows = countermeasure_sweep(source_for(default_ultralight_memory()), CardKind::Ultralight,
                                    SweepFamily::GaussianFactors, {0.0, 0.5}, cfg, {}, {1, 2});
   REQUIRE(rows.size() == 2);
   CHECK(rows[0].param == 0.0);
   CHECK(rows[0].asr == 1.0);
   CHECK(rows[1].card_demod_rate == 0.0);
}
