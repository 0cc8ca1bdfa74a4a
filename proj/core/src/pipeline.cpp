#include <nfcjam/error.hpp>
#include <nfcjam/pipeline.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

namespace nfcjam {

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream)
{
   return splitmix(seed ^ splitmix(stream + 0x51ed2701ULL));
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn &&fn)
{
   if (threads == 0)
      threads = std::max(1u, std::thread::hardware_concurrency());

   threads = std::min(threads, count);

   if (threads <= 1)
   {
      for (std::size_t i = 0; i < count; i++)
         fn(i);
      return;
   }

   std::atomic<std::size_t> next {0};
   std::exception_ptr failure;
   std::atomic<bool> failed {false};

   auto worker = [&] {
      for (std::size_t i = next++; i < count && !failed; i = next++)
      {
         try
         {
            fn(i);
         }
         catch (...)
         {
            if (!failed.exchange(true))
               failure = std::current_exception();
         }
      }
   };

   std::vector<std::thread> pool;
   pool.reserve(threads);

   for (std::size_t t = 0; t < threads; t++)
      pool.emplace_back(worker);

   for (auto &t: pool)
      t.join();

   if (failure)
      std::rethrow_exception(failure);
}

// first to last sample that differs from `base`
Interval active_span(const std::vector<double> &env, double base)
{
   std::size_t first = env.size(), last = 0;

   for (std::size_t i = 0; i < env.size(); i++)
   {
      if (env[i] != base)
      {
         first = std::min(first, i);
         last = i;
      }
   }

   return first < env.size() ? Interval {first, last + 1} : Interval {};
}

std::size_t overlap(Interval a, Interval b)
{
   std::size_t lo = std::max(a.begin, b.begin);
   std::size_t hi = std::min(a.end, b.end);
   return hi > lo ? hi - lo : 0;
}

std::optional<Sender> classify_segment(const MagnitudeTrace &trace, Interval range, const AttackConfig &cfg)
{
   double carrier = quantile(trace, range, 0.5);

   if (carrier <= 0)
      return std::nullopt;

   if (quantile(trace, range, 0.05) < cfg.sender_thresholds.low * carrier)
      return Sender::Reader;

   double relative = std_dev(trace, range) / carrier;

   if (relative > cfg.std_diff_threshold && relative < cfg.sender_thresholds.high)
      return Sender::Card;

   return std::nullopt;
}

}

SenderThresholds SenderThresholds::from_modem(const ModemConfig &cfg)
{
   SenderThresholds t;
   t.low = cfg.reader_pause / cfg.reader_high + 0.5 * (1 - cfg.card_mod_depth);
   return t;
}

void AttackConfig::validate() const
{
   if (repetitions == 0)
      throw ParameterError("repetitions must be at least 1");

   if (!(discard_amplitude_threshold > 0) || !(std_diff_threshold > 0) || !(gradient_threshold > 0) ||
       !(subcarrier_threshold > 0) || !(subcarrier_hz > 0))
      throw ParameterError("attack thresholds must be positive");

   if (ma_window == 0 || gradient_window < 4)
      throw ParameterError("attack windows too short");

   if (!(sender_thresholds.low > 0) || !(sender_thresholds.high > 0))
      throw ParameterError("sender thresholds must be positive");

   if (averaging_n == 0 || averaging_n > 32 || (averaging_n & (averaging_n - 1)) != 0)
      throw ParameterError("averaging_n must be one of 1, 2, 4, 8, 16, 32");
}

AttackConfig AttackConfig::for_modem(const ModemConfig &modem)
{
   modem.validate();

   AttackConfig cfg;
   cfg.gradient_window = modem.samples_per_bit();
   cfg.ma_window = 2 * modem.samples_per_bit();
   cfg.sender_thresholds = SenderThresholds::from_modem(modem);
   cfg.subcarrier_hz = modem.subcarrier_hz;
   return cfg;
}

SimulatedSession simulate_session(const Transcript &transcript, const NoiseProfile &profile, const ModemConfig &cfg,
                                  std::uint64_t seed, const SessionLayout &layout,
                                  std::optional<std::uint64_t> jammer_seed)
{
   cfg.validate();
   profile.validate();

   if (transcript.messages.empty())
      throw StructuralError("transcript holds no messages");

   std::size_t spb = cfg.samples_per_bit();

   std::mt19937_64 rng(derive(seed, 0));
   auto jitterSpan = static_cast<std::ptrdiff_t>(layout.jitter_samples);
   std::uniform_int_distribution<std::ptrdiff_t> jitter(-jitterSpan, jitterSpan);

   std::size_t fieldBegin = static_cast<std::size_t>(
      std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(layout.lead_in_bits * spb) + jitter(rng)));

   std::vector<MagnitudeTrace> envelopes;
   envelopes.reserve(transcript.messages.size());

   std::size_t cursor = fieldBegin + layout.settle_bits * spb;
   // frame timing relative to the jammer belongs to the run, not the session,
   // so repeated sessions stay sample-aligned for averaging
   std::mt19937_64 frameRng(derive(jammer_seed.value_or(seed), 3));
   std::uniform_int_distribution<std::size_t> frameJitter(0, layout.frame_jitter_samples);

   SimulatedSession session;
   std::size_t jitterUsed = 0;

   for (std::size_t i = 0; i < transcript.messages.size(); i++)
   {
      if (i > 0)
         cursor += cfg.guard_bits * spb;

      std::size_t late = frameJitter(frameRng);
      cursor += late;
      jitterUsed += late;

      envelopes.push_back(modulate_message(transcript.messages[i], cfg));

      Interval span = active_span(envelopes.back().samples, cfg.reader_high);
      session.annotations.push_back({transcript.messages[i].sender, {cursor + span.begin, cursor + span.end}, i});

      cursor += envelopes.back().size();
   }

   std::size_t fieldEnd = cursor + layout.settle_bits * spb;
   // fixed capture length for a given transcript: the tail absorbs all jitter
   std::size_t total = layout.lead_in_bits * spb + layout.jitter_samples + (fieldEnd - fieldBegin) - jitterUsed +
                       layout.frame_jitter_samples * transcript.messages.size() + layout.tail_bits * spb;

   MagnitudeTrace clean;
   clean.sample_rate = cfg.sample_rate;
   clean.samples.assign(total, 0.0);
   std::fill(clean.samples.begin() + static_cast<std::ptrdiff_t>(fieldBegin),
             clean.samples.begin() + static_cast<std::ptrdiff_t>(fieldEnd), cfg.reader_high);

   for (std::size_t i = 0; i < envelopes.size(); i++)
   {
      auto start = session.annotations[i].range.begin;
      Interval span = active_span(envelopes[i].samples, cfg.reader_high);
      std::copy(envelopes[i].samples.begin(), envelopes[i].samples.end(),
                clean.samples.begin() + static_cast<std::ptrdiff_t>(start - span.begin));
   }

   clean = normalize(clean);

   session.field = {fieldBegin, fieldEnd};

   // std over the field plus an equal span of zeros
   {
      long double sum = 0, sq = 0;

      for (std::size_t i = fieldBegin; i < fieldEnd; i++)
      {
         sum += clean.samples[i];
         sq += clean.samples[i] * clean.samples[i];
      }

      auto n = static_cast<long double>(2 * (fieldEnd - fieldBegin));
      long double m = sum / n;
      session.reference_std = static_cast<double>(std::sqrt(std::max<long double>(0, sq / n - m * m)));
   }

   std::vector<Interval> fields {session.field};
   std::vector<Interval> cardRegions;

   for (const auto &a: session.annotations)
   {
      if (a.sender == Sender::Card)
         cardRegions.push_back(a.range);
   }

   // reactive jammers start emitting when the field comes up
   std::size_t origin = profile.reactive ? fieldBegin : 0;
   std::size_t span = profile.reactive ? fieldEnd - fieldBegin : total;
   std::uint64_t combSeed = jammer_seed.value_or(seed);

   MagnitudeTrace noise;
   noise.sample_rate = cfg.sample_rate;
   noise.samples.assign(total, 0.0);

   std::optional<MagnitudeTrace> local;

   std::visit(
      [&](const auto &k) {
         using T = std::decay_t<decltype(k)>;

         if constexpr (std::is_same_v<T, GaussianWhite>)
            local = gen_gaussian_noise(span, session.reference_std, k.std_factor, derive(seed, 1), cfg.sample_rate);
         else if constexpr (std::is_same_v<T, MultiTone>)
            local = gen_multitone_noise(span, k.spacing_hz, k.band, k.per_tone_amplitude.value_or(DefaultToneAmplitude),
                                        cfg.sample_rate, combSeed);
         else if constexpr (std::is_same_v<T, GaussianMixture>)
            local = gen_mixture_noise(span, k, derive(seed, 2), cfg.sample_rate);
      },
      profile.kind);

   if (local)
      std::copy(local->samples.begin(), local->samples.end(), noise.samples.begin() + static_cast<std::ptrdiff_t>(origin));

   session.trace = apply_noise(clean, noise, profile, fields, cardRegions);
   session.trace.label = "session";

   return session;
}

std::vector<Interval> detect_field_activation(const MagnitudeTrace &trace, const AttackConfig &cfg)
{
   if (trace.size() == 0)
      throw FieldNotFound("empty trace");

   auto smooth = moving_average(trace, std::min(cfg.ma_window, trace.size()));
   double peak = *std::max_element(smooth.samples.begin(), smooth.samples.end());

   if (!(peak > 0))
      throw FieldNotFound("trace holds no carrier");

   double threshold = 0.5 * peak;
   std::vector<Interval> out;
   std::size_t i = 0;

   while (i < smooth.size())
   {
      if (smooth.samples[i] <= threshold)
      {
         i++;
         continue;
      }

      std::size_t start = i;

      while (i < smooth.size() && smooth.samples[i] > threshold)
         i++;

      if (i - start >= cfg.gradient_window)
         out.push_back({start, i});
   }

   if (out.empty())
      throw FieldNotFound("no field activation found");

   return out;
}

std::vector<Segment> segment_messages(const MagnitudeTrace &trace, Interval field, const AttackConfig &cfg)
{
   if (field.end > trace.size() || field.length() < 2 * cfg.gradient_window)
      throw SegmentationEmpty("field interval too short or outside the trace");

   const auto &x = trace.samples;
   std::size_t w = cfg.gradient_window;
   std::size_t confirm = w / 4;

   MagnitudeTrace grad;
   grad.sample_rate = trace.sample_rate;
   grad.samples.resize(field.length() - 1);

   for (std::size_t n = 0; n < grad.size(); n++)
      grad.samples[n] = std::abs(x[field.begin + n + 1] - x[field.begin + n]);

   auto activity = moving_average(grad, w);

   // Manchester activity: the subcarrier content of adjacent half bits differs
   std::size_t half = w / 2;
   MagnitudeTrace manchester;
   manchester.sample_rate = trace.sample_rate;
   manchester.samples.assign(grad.size(), 0.0);

   {
      double omega = 2 * std::numbers::pi * cfg.subcarrier_hz / trace.sample_rate;
      std::vector<std::complex<double>> prefix(field.length() + 1);

      for (std::size_t n = 0; n < field.length(); n++)
         prefix[n + 1] = prefix[n] + x[field.begin + n] * std::polar(1.0, -omega * static_cast<double>(field.begin + n));

      // centred on the boundary between the two half bits
      for (std::size_t n = half; n + half <= field.length() && n < manchester.size(); n++)
      {
         auto a = prefix[n] - prefix[n - half];
         auto b = prefix[n + half] - prefix[n];
         manchester.samples[n] = std::abs(a - b) / static_cast<double>(half);
      }
   }

   auto card = moving_average(manchester, w);

   Interval inner {0, activity.size()};

   if (activity.size() > 4 * w)
      inner = {w, activity.size() - w};

   // thresholds sit 50% above the quiet floor plus a fixed margin
   double threshold = 1.5 * quantile(activity, inner, 0.05) + cfg.gradient_threshold;
   double cardThreshold = 1.5 * quantile(card, inner, 0.05) + cfg.subcarrier_threshold;

   auto active = [&](std::size_t i) {
      return activity.samples[i] > threshold || card.samples[i] > cardThreshold;
   };

   std::vector<Interval> runs;

   for (std::size_t i = 0; i < activity.size();)
   {
      if (!active(i))
      {
         i++;
         continue;
      }

      std::size_t start = i;

      while (i < activity.size() && active(i))
         i++;

      if (!runs.empty() && start - runs.back().end < 2 * w)
         runs.back().end = i;
      else
         runs.push_back({start, i});
   }

   const auto &g = grad.samples;
   std::vector<Interval> refined;

   for (const auto &run: runs)
   {
      std::size_t lo = run.begin > w / 2 ? run.begin - w / 2 : 0;
      std::size_t hi = std::min(g.size(), run.end + w / 2);

      double edge = 0.4 * *std::max_element(g.begin() + static_cast<std::ptrdiff_t>(lo),
                                            g.begin() + static_cast<std::ptrdiff_t>(hi));

      // an edge counts only when another one follows (or precedes) within a quarter bit
      std::optional<std::size_t> first, last;

      for (std::size_t n = lo; n < hi && !first; n++)
      {
         if (g[n] <= edge)
            continue;

         for (std::size_t m = n + 1; m <= std::min(hi - 1, n + confirm); m++)
         {
            if (g[m] > edge)
            {
               first = n;
               break;
            }
         }
      }

      for (std::size_t n = hi; n-- > lo && !last;)
      {
         if (g[n] <= edge)
            continue;

         for (std::size_t m = n; m-- > (n > confirm ? n - confirm : 0) && m >= lo;)
         {
            if (g[m] > edge)
            {
               last = n;
               break;
            }
         }
      }

      if (!first || !last || *last < *first)
         continue;

      Interval r {field.begin + *first + 1, field.begin + *last + 1};

      if (!refined.empty() && r.begin < refined.back().end + 2 * w)
         refined.back().end = std::max(refined.back().end, r.end);
      else
         refined.push_back(r);
   }

   std::vector<Segment> out;

   for (const auto &r: refined)
   {
      if (r.length() < w)
         continue;

      out.push_back({r, classify_segment(trace, r, cfg)});
   }

   if (out.empty())
      throw SegmentationEmpty("no message activity inside the field");

   return out;
}

std::optional<std::string> discard_reason(const MagnitudeTrace &trace, const AttackConfig &cfg)
{
   for (double v: trace.samples)
   {
      if (v > cfg.discard_amplitude_threshold)
         return "amplitude above threshold";
   }

   std::vector<Interval> fields;

   try
   {
      fields = detect_field_activation(trace, cfg);
   }
   catch (const FieldNotFound &)
   {
      return "no field activation";
   }

   std::size_t w = cfg.gradient_window;

   for (const auto &field: fields)
   {
      std::vector<Segment> segs;

      try
      {
         segs = segment_messages(trace, field, cfg);
      }
      catch (const SegmentationEmpty &)
      {
         continue;
      }

      auto gap = [&](std::size_t k) -> Interval {
         std::size_t from = k == 0 ? field.begin : segs[k - 1].range.end;
         std::size_t to = k == segs.size() ? field.end : segs[k].range.begin;

         if (to <= from + 2 * w)
            return {};

         std::size_t margin = std::min(w, (to - from) / 4);
         return {from + margin, to - margin};
      };

      for (std::size_t k = 0; k < segs.size(); k++)
      {
         if (segs[k].sender_hint != Sender::Card)
            continue;

         Interval noise = gap(k);

         if (noise.empty())
            noise = gap(k + 1);

         if (noise.empty())
            continue;

         if (std_dev(trace, segs[k].range) - std_dev(trace, noise) > cfg.std_diff_threshold)
            return std::nullopt;
      }
   }

   return "no detectable card signal";
}

std::vector<std::size_t> discard_corrupted(const std::vector<MagnitudeTrace> &traces, const AttackConfig &cfg)
{
   cfg.validate();

   std::vector<char> keep(traces.size(), 0);

   parallel_for(traces.size(), cfg.threads, [&](std::size_t i) { keep[i] = !discard_reason(traces[i], cfg); });

   std::vector<std::size_t> out;

   for (std::size_t i = 0; i < traces.size(); i++)
   {
      if (keep[i])
         out.push_back(i);
   }

   return out;
}

MagnitudeTrace average_traces(const std::vector<MagnitudeTrace> &traces, CardKind kind, std::size_t max_shift)
{
   if (kind == CardKind::Classic)
      throw StructuralError("Classic sessions use fresh nonces each time; averaging would mix different payloads");

   if (traces.empty())
      throw StructuralError("nothing to average");

   const auto &ref = traces.front();
   std::size_t len = ref.size();

   for (const auto &t: traces)
   {
      if (t.size() != len)
         throw StructuralError("traces to average differ in length");
   }

   if (traces.size() == 1)
      return ref;

   auto edgeOf = [](const MagnitudeTrace &t) {
      auto smooth = moving_average(t, std::min<std::size_t>(16, t.size()));
      double peak = *std::max_element(smooth.samples.begin(), smooth.samples.end());
      auto it = std::find_if(smooth.samples.begin(), smooth.samples.end(), [&](double v) { return v > 0.5 * peak; });
      return static_cast<std::size_t>(it - smooth.samples.begin());
   };

   std::size_t edge = edgeOf(ref);
   std::size_t reach = 2 * std::max<std::size_t>(max_shift, 8);
   Interval region {edge > reach ? edge - reach : 0, std::min(len, edge + reach)};

   auto at = [&](const MagnitudeTrace &t, std::ptrdiff_t i) {
      return t.samples[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(len) - 1))];
   };

   double refMean = mean(ref, region);
   auto shift = static_cast<std::ptrdiff_t>(max_shift);

   std::vector<double> acc(ref.samples);

   for (std::size_t k = 1; k < traces.size(); k++)
   {
      const auto &t = traces[k];
      double tMean = mean(t, region);

      std::ptrdiff_t best = 0;
      double bestScore = -std::numeric_limits<double>::infinity();

      for (std::ptrdiff_t lag = -shift; lag <= shift; lag++)
      {
         double score = 0;

         for (std::size_t n = region.begin; n < region.end; n++)
            score += (ref.samples[n] - refMean) * (at(t, static_cast<std::ptrdiff_t>(n) + lag) - tMean);

         // prefer the smaller shift on ties so identical traces stay put
         if (score > bestScore + 1e-12 || (std::abs(score - bestScore) <= 1e-12 && std::abs(lag) < std::abs(best)))
         {
            bestScore = score;
            best = lag;
         }
      }

      for (std::size_t n = 0; n < len; n++)
         acc[n] += at(t, static_cast<std::ptrdiff_t>(n) + best);
   }

   MagnitudeTrace out = ref;

   for (std::size_t n = 0; n < len; n++)
      out.samples[n] = acc[n] / static_cast<double>(traces.size());

   return out;
}

RecoveredTranscript recover_transcript(const MagnitudeTrace &trace, const AttackConfig &cfg, const ModemConfig &modem)
{
   RecoveredTranscript out;
   std::vector<Interval> fields;

   try
   {
      fields = detect_field_activation(trace, cfg);
   }
   catch (const FieldNotFound &)
   {
      return out;
   }

   for (const auto &field: fields)
   {
      std::vector<Segment> segs;

      try
      {
         segs = segment_messages(trace, field, cfg);
      }
      catch (const SegmentationEmpty &)
      {
         continue;
      }

      for (const auto &seg: segs)
      {
         RecoveredMessage msg;
         msg.sender = seg.sender_hint;
         msg.range = seg.range;

         if (!seg.sender_hint)
         {
            msg.failure = "unknown sender";
            out.messages.push_back(std::move(msg));
            continue;
         }

         try
         {
            Bits bits = demodulate(trace, seg, *seg.sender_hint, modem);
            msg.payload = decode_frame(bits, frame_kind_for(bits.size()));
         }
         catch (const Error &e)
         {
            msg.failure = e.what();
         }

         out.messages.push_back(std::move(msg));
      }
   }

   out.complete = !out.messages.empty() && std::all_of(out.messages.begin(), out.messages.end(),
                                                       [](const RecoveredMessage &m) { return m.payload.has_value(); });

   return out;
}

SessionCounts evaluate_session(const Transcript &truth, const std::vector<Annotation> &annotations,
                               const RecoveredTranscript &recovered)
{
   SessionCounts counts;

   for (const auto &a: annotations)
   {
      if (a.message_index >= truth.messages.size())
         throw StructuralError("annotation refers to a missing message");

      const Message &msg = truth.messages[a.message_index];
      bool card = msg.sender == Sender::Card;

      (card ? counts.card_total : counts.reader_total)++;

      if (recovered.discarded)
         continue;

      const RecoveredMessage *best = nullptr;
      std::size_t bestOverlap = 0;

      for (const auto &r: recovered.messages)
      {
         auto o = overlap(a.range, r.range);

         if (o > bestOverlap)
         {
            bestOverlap = o;
            best = &r;
         }
      }

      if (!best || 2 * bestOverlap < a.range.length())
         continue;

      bool correct = best->sender == msg.sender && best->payload && *best->payload == on_air_bytes(msg);

      if (card)
      {
         if (best->sender != Sender::Reader)
            counts.card_detected++;

         if (correct)
            counts.card_demodulated++;
      }
      else if (correct)
      {
         counts.reader_demodulated++;
      }
   }

   counts.success = !recovered.discarded && counts.card_demodulated == counts.card_total;

   return counts;
}

SessionMetrics aggregate_metrics(const std::vector<SessionCounts> &sessions, std::size_t kept)
{
   SessionMetrics m;
   m.kept = kept;

   std::size_t successes = 0;

   for (const auto &s: sessions)
   {
      m.totals.card_total += s.card_total;
      m.totals.card_detected += s.card_detected;
      m.totals.card_demodulated += s.card_demodulated;
      m.totals.reader_total += s.reader_total;
      m.totals.reader_demodulated += s.reader_demodulated;
      m.per_session_success.push_back(s.success);
      successes += s.success;
   }

   auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };

   m.card_detection_rate = ratio(m.totals.card_detected, m.totals.card_total);
   m.card_demodulation_rate = ratio(m.totals.card_demodulated, m.totals.card_total);
   m.reader_demodulation_rate = ratio(m.totals.reader_demodulated, m.totals.reader_total);
   m.attack_success_rate = ratio(successes, sessions.size());
   m.totals.success = successes == sessions.size() && !sessions.empty();

   return m;
}

TranscriptSource source_for(const CardMemory &memory)
{
   memory.validate();

   if (memory.kind == CardKind::Ultralight)
      return fixed_source(ultralight_transcript(memory));

   return [memory](std::size_t, std::uint64_t seed) { return classic_transcript(memory, seed); };
}

TranscriptSource fixed_source(const Transcript &transcript)
{
   return [transcript](std::size_t, std::uint64_t) { return transcript; };
}

std::uint64_t session_seed(std::uint64_t seed, std::size_t index)
{
   return derive(seed, 0x1000 + index);
}

std::vector<RecoveredTranscript> attack_batch(const std::vector<MagnitudeTrace> &traces, CardKind kind,
                                              const AttackConfig &cfg, const ModemConfig &modem)
{
   cfg.validate();
   modem.validate();

   if (cfg.averaging_n > 1 && kind == CardKind::Classic)
      throw ParameterError("averaging needs identical sessions; Classic sessions differ every time");

   std::size_t count = traces.size();
   std::vector<std::optional<std::string>> reasons(count);

   parallel_for(count, cfg.threads, [&](std::size_t r) { reasons[r] = discard_reason(traces[r], cfg); });

   std::vector<std::size_t> kept;

   for (std::size_t r = 0; r < count; r++)
   {
      if (!reasons[r])
         kept.push_back(r);
   }

   std::size_t group = std::min(cfg.averaging_n, kept.size());
   std::vector<RecoveredTranscript> out(count);

   parallel_for(count, cfg.threads, [&](std::size_t r) {
      auto &rec = out[r];

      if (reasons[r])
      {
         rec.discarded = true;
         rec.discard_reason = *reasons[r];
      }
      else if (group > 1)
      {
         // each kept trace leads its own group of the next kept traces, cyclically
         auto pos = static_cast<std::size_t>(std::find(kept.begin(), kept.end(), r) - kept.begin());
         std::vector<MagnitudeTrace> batch;

         for (std::size_t j = 0; j < group; j++)
            batch.push_back(traces[kept[(pos + j) % kept.size()]]);

         rec = recover_transcript(average_traces(batch, kind, modem.samples_per_bit()), cfg, modem);
      }
      else
      {
         rec = recover_transcript(traces[r], cfg, modem);
      }
   });

   return out;
}

AttackResult run_attack(const TranscriptSource &source, CardKind kind, const NoiseProfile &profile,
                        const AttackConfig &cfg, const ModemConfig &modem, std::uint64_t seed,
                        const SessionLayout &layout)
{
   cfg.validate();
   modem.validate();
   profile.validate();

   if (cfg.averaging_n > 1 && kind == CardKind::Classic)
      throw ParameterError("averaging needs identical sessions; Classic sessions differ every time");

   std::size_t reps = cfg.repetitions;
   std::uint64_t jammerSeed = jammer_seed(seed);

   AttackResult result;
   result.truths.resize(reps);
   result.annotations.resize(reps);

   std::vector<MagnitudeTrace> traces(reps);

   parallel_for(reps, cfg.threads, [&](std::size_t r) {
      auto ss = session_seed(seed, r);
      result.truths[r] = source(r, ss);

      auto sim = simulate_session(result.truths[r], profile, modem, ss, layout, jammerSeed);
      result.annotations[r] = std::move(sim.annotations);
      traces[r] = std::move(sim.trace);
   });

   result.recovered = attack_batch(traces, kind, cfg, modem);

   std::vector<SessionCounts> counts(reps);
   std::size_t kept = 0;

   for (std::size_t r = 0; r < reps; r++)
   {
      counts[r] = evaluate_session(result.truths[r], result.annotations[r], result.recovered[r]);
      kept += !result.recovered[r].discarded;
   }

   result.metrics = aggregate_metrics(counts, kept);

   return result;
}

std::uint64_t jammer_seed(std::uint64_t seed)
{
   return derive(seed, 0xC0DB);
}

AttackResult run_attack(const Transcript &transcript, const NoiseProfile &profile, const AttackConfig &cfg,
                        const ModemConfig &modem, std::uint64_t seed, const SessionLayout &layout)
{
   return run_attack(fixed_source(transcript), transcript.card_kind, profile, cfg, modem, seed, layout);
}

std::vector<double> default_sweep_values(SweepFamily family)
{
   if (family == SweepFamily::GaussianFactors)
      return {0.05, 0.10, 0.15, 0.20, 0.25, 0.30};

   return {0.05e6, 0.10e6, 0.15e6, 0.20e6, 0.25e6};
}

std::vector<SweepRow> countermeasure_sweep(const TranscriptSource &source, CardKind kind, SweepFamily family,
                                           const std::vector<double> &values, const AttackConfig &cfg,
                                           const ModemConfig &modem, const std::vector<std::uint64_t> &seeds)
{
   if (seeds.empty())
      throw ParameterError("sweep needs at least one seed");

   std::vector<SweepRow> rows;

   for (double value: values)
   {
      NoiseProfile profile;

      if (family == SweepFamily::GaussianFactors)
         profile.kind = GaussianWhite {value};
      else
         profile.kind = MultiTone {value, SubcarrierBand, std::nullopt};

      SweepRow row;
      row.param = value;

      for (auto s: seeds)
      {
         auto m = run_attack(source, kind, profile, cfg, modem, s).metrics;
         row.reader_demod_rate += m.reader_demodulation_rate;
         row.card_demod_rate += m.card_demodulation_rate;
         row.detection_rate += m.card_detection_rate;
         row.asr += m.attack_success_rate;
      }

      auto n = static_cast<double>(seeds.size());
      row.reader_demod_rate /= n;
      row.card_demod_rate /= n;
      row.detection_rate /= n;
      row.asr /= n;

      rows.push_back(row);
   }

   return rows;
}

}
