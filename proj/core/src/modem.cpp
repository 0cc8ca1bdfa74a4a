#include <nfcjam/error.hpp>
#include <nfcjam/modem.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace nfcjam {

void ModemConfig::validate() const
{
   if (!(sample_rate > 0) || !(bit_rate > 0))
      throw ParameterError("sample and bit rates must be positive");

   if (sample_rate < 2 * subcarrier_hz)
      throw ParameterError("sample rate must be at least twice the subcarrier frequency");

   if (!(card_mod_depth > 0 && card_mod_depth < 1))
      throw ParameterError("card modulation depth must lie in (0, 1)");

   if (!(reader_high > reader_pause))
      throw ParameterError("reader carrier level must exceed the pause level");

   if (samples_per_bit() < 8)
      throw ParameterError("need at least 8 samples per bit");
}

std::size_t ModemConfig::samples_per_bit() const
{
   return static_cast<std::size_t>(std::lround(sample_rate / bit_rate));
}

namespace {

enum class Miller
{
   X, // pause in the middle of the bit
   Y, // no pause
   Z  // pause at the start of the bit
};

double subcarrierWave(const ModemConfig &cfg, std::size_t n)
{
   double s = std::sin(2 * std::numbers::pi * cfg.subcarrier_hz * (static_cast<double>(n) + 0.5) / cfg.sample_rate);

   if (cfg.sinusoidal_subcarrier)
      return s;

   return s >= 0 ? 1.0 : -1.0;
}

}

MagnitudeTrace modulate_reader(const Bits &bits, const ModemConfig &cfg)
{
   cfg.validate();

   if (bits.empty())
      throw ParameterError("nothing to modulate");

   std::size_t spb = cfg.samples_per_bit();
   std::size_t pause = spb / 4;

   std::vector<Miller> symbols;
   symbols.reserve(bits.size() + 2);
   symbols.push_back(Miller::Z);

   int prev = 0;

   for (auto b: bits)
   {
      if (b)
         symbols.push_back(Miller::X);
      else
         symbols.push_back(prev ? Miller::Y : Miller::Z);

      prev = b ? 1 : 0;
   }

   // end of communication: logic 0
   symbols.push_back(prev ? Miller::Y : Miller::Z);

   MagnitudeTrace out;
   out.sample_rate = cfg.sample_rate;
   out.samples.assign(symbols.size() * spb, cfg.reader_high);

   for (std::size_t k = 0; k < symbols.size(); k++)
   {
      std::size_t offset;

      if (symbols[k] == Miller::Z)
         offset = 0;
      else if (symbols[k] == Miller::X)
         offset = spb / 2;
      else
         continue;

      std::fill_n(out.samples.begin() + static_cast<std::ptrdiff_t>(k * spb + offset), pause, cfg.reader_pause);
   }

   return out;
}

MagnitudeTrace modulate_card(const Bits &bits, const ModemConfig &cfg)
{
   cfg.validate();

   if (bits.empty())
      throw ParameterError("nothing to modulate");

   std::size_t spb = cfg.samples_per_bit();
   std::size_t half = spb / 2;

   MagnitudeTrace out;
   out.sample_rate = cfg.sample_rate;
   out.samples.assign((bits.size() + 2) * spb, cfg.reader_high);

   auto ripple = [&](std::size_t from) {
      for (std::size_t n = from; n < from + half; n++)
         out.samples[n] = cfg.reader_high * (1.0 + cfg.card_mod_depth * subcarrierWave(cfg, n));
   };

   ripple(0);

   for (std::size_t k = 0; k < bits.size(); k++)
      ripple((k + 1) * spb + (bits[k] ? 0 : half));

   return out;
}

MagnitudeTrace modulate_message(const Message &msg, const ModemConfig &cfg)
{
   auto bits = encode_frame(msg);
   return msg.sender == Sender::Reader ? modulate_reader(bits, cfg) : modulate_card(bits, cfg);
}

FrameKind frame_kind_for(std::size_t bitCount)
{
   return bitCount == 7 ? FrameKind::Short : FrameKind::Standard;
}

namespace {

Interval searchWindow(const MagnitudeTrace &trace, const Segment &seg, std::size_t margin)
{
   std::size_t begin = seg.range.begin > margin ? seg.range.begin - margin : 0;
   std::size_t end = std::min(trace.size(), seg.range.end + margin);
   return {begin, end};
}

Bits demodulateReader(const MagnitudeTrace &trace, const Segment &seg, const ModemConfig &cfg)
{
   std::size_t spb = cfg.samples_per_bit();
   std::size_t quarter = spb / 4;

   double carrier = quantile(trace, seg.range, 0.5);

   if (carrier <= 0)
      throw DemodError(0, "no carrier in reader segment");

   double pauseLevel = carrier * cfg.reader_pause / cfg.reader_high;
   double threshold = (carrier + pauseLevel) / 2;

   Interval window = searchWindow(trace, seg, spb);
   const auto &x = trace.samples;

   // runs of at least half a pause below threshold
   std::vector<Interval> pauses;

   for (std::size_t n = window.begin; n < window.end;)
   {
      if (x[n] >= threshold)
      {
         n++;
         continue;
      }

      std::size_t start = n;

      while (n < window.end && x[n] < threshold)
         n++;

      if (n - start >= quarter / 2)
         pauses.push_back({start, n});
   }

   if (pauses.empty())
      throw DemodError(0, "no carrier pause found");

   auto pauseStart = [&](const Interval &run) {
      auto twice = static_cast<std::ptrdiff_t>(run.begin + run.end) - static_cast<std::ptrdiff_t>(quarter);
      return std::max<std::ptrdiff_t>(0, twice / 2);
   };

   std::ptrdiff_t anchor = pauseStart(pauses.front());
   std::ptrdiff_t last = pauseStart(pauses.back());
   std::size_t symbols = static_cast<std::size_t>((last - anchor + static_cast<std::ptrdiff_t>(quarter)) / static_cast<std::ptrdiff_t>(spb)) + 1;

   std::vector<Miller> sequence;
   sequence.reserve(symbols);

   for (std::size_t k = 0; k < symbols; k++)
   {
      int pauseSlots = 0;
      int pauseAt = -1;

      for (std::size_t j = 0; j < 4; j++)
      {
         std::size_t begin = static_cast<std::size_t>(anchor) + k * spb + j * quarter;
         std::size_t count = 0;

         for (std::size_t n = begin; n < begin + quarter && n < x.size(); n++)
            count += x[n] < threshold;

         if (2 * count >= quarter)
         {
            pauseSlots++;
            pauseAt = static_cast<int>(j);
         }
         else if (count > cfg.reader_dip_tolerance)
         {
            throw DemodError(k, "spurious carrier dip");
         }
      }

      if (pauseSlots == 0)
         sequence.push_back(Miller::Y);
      else if (pauseSlots == 1 && pauseAt == 0)
         sequence.push_back(Miller::Z);
      else if (pauseSlots == 1 && pauseAt == 2)
         sequence.push_back(Miller::X);
      else
         throw DemodError(k, "pause pattern is not a Miller symbol");
   }

   if (sequence.front() != Miller::Z)
      throw DemodError(0, "missing start of communication");

   Bits logic {0};

   for (std::size_t k = 1; k < sequence.size(); k++)
   {
      int prev = logic.back();

      switch (sequence[k])
      {
         case Miller::X:
            logic.push_back(1);
            break;
         case Miller::Y:
            if (prev == 0)
               throw DemodError(k, "sequence Y after logic 0");
            logic.push_back(0);
            break;
         case Miller::Z:
            if (prev == 1)
               throw DemodError(k, "sequence Z after logic 1");
            logic.push_back(0);
            break;
      }
   }

   // a trailing X means the end-of-communication 0 was sent as an unseen Y
   if (sequence.back() == Miller::X)
      logic.push_back(0);

   if (logic.size() < 3)
      throw DemodError(0, "frame too short");

   return Bits(logic.begin() + 1, logic.end() - 1);
}

Bits demodulateCard(const MagnitudeTrace &trace, const Segment &seg, const ModemConfig &cfg)
{
   std::size_t spb = cfg.samples_per_bit();
   std::size_t half = spb / 2;

   const auto &x = trace.samples;
   double carrier = mean(trace, seg.range);
   double omega = 2 * std::numbers::pi * cfg.subcarrier_hz / cfg.sample_rate;

   // expected |D| of a full-depth bit, for the "is there any card" check
   std::complex<double> fullRipple = 0;

   for (std::size_t n = 0; n < half; n++)
      fullRipple += subcarrierWave(cfg, n) * std::polar(1.0, -omega * static_cast<double>(n));

   double expected = std::abs(fullRipple) * cfg.card_mod_depth * carrier;

   // search one bit beyond the segment on both sides
   std::size_t from = seg.range.begin > spb ? seg.range.begin - spb : 0;
   std::size_t to = std::min(x.size(), seg.range.end + spb);

   if (to - from < 2 * spb)
      throw DemodError(0, "segment shorter than one bit period");

   // the oscillator phase is absolute, so a stationary tone at the subcarrier
   // gives the same correlation in both half bits and cancels in D
   std::vector<std::complex<double>> prefix(to - from + 1);

   for (std::size_t i = from; i < to; i++)
      prefix[i - from + 1] = prefix[i - from] + (x[i] - carrier) * std::polar(1.0, -omega * static_cast<double>(i));

   auto halfBit = [&](std::size_t start) { return prefix[start - from + half] - prefix[start - from]; };

   auto differences = [&](std::size_t origin) {
      std::vector<std::complex<double>> d;

      for (std::size_t s = origin; s + spb <= to; s += spb)
         d.push_back(halfBit(s) - halfBit(s + half));

      return d;
   };

   // bit grid phase that concentrates the most Manchester energy
   std::size_t origin = from;
   double best = -1;

   for (std::size_t o = from; o < from + spb; o++)
   {
      double score = 0;

      for (auto &d: differences(o))
         score += std::abs(d);

      if (score > best)
      {
         best = score;
         origin = o;
      }
   }

   auto diffs = differences(origin);

   // bits inside the segment fix the subcarrier phase (up to a sign) and the
   // reference level; leakage in quadrature does not count towards either
   std::vector<std::size_t> body;
   std::complex<double> squared = 0;

   for (std::size_t k = 0; k < diffs.size(); k++)
   {
      std::size_t start = origin + k * spb;

      if (start >= seg.range.begin && start + spb <= seg.range.end)
      {
         body.push_back(k);
         squared += diffs[k] * diffs[k];
      }
   }

   if (body.empty())
      throw DemodError(0, "segment shorter than one bit period");

   auto phase = std::polar(1.0, -std::arg(squared) / 2);

   std::vector<double> magnitudes;

   for (auto k: body)
      magnitudes.push_back(std::abs((diffs[k] * phase).real()));

   std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(magnitudes.size() / 2), magnitudes.end());
   double reference = magnitudes[magnitudes.size() / 2];

   if (!(reference > 0.1 * expected) || !(reference > 0))
      throw DemodError(0, "no subcarrier modulation");

   double margin = cfg.card_pattern_margin * reference;

   std::size_t first = 0;

   while (first < diffs.size() && std::abs((diffs[first] * phase).real()) < margin)
      first++;

   if (first == diffs.size())
      throw DemodError(0, "no subcarrier modulation");

   // the start bit is a 1
   if ((diffs[first] * phase).real() < 0)
      phase = -phase;

   Bits bits;
   std::size_t k = first;

   for (; k < diffs.size(); k++)
   {
      double d = (diffs[k] * phase).real();

      if (std::abs(d) < margin)
         break;

      bits.push_back(d > 0 ? 1 : 0);
   }

   // an unmodulated bit period ends the frame; one earlier than a bit before
   // the segment end means a broken pattern
   if (k < diffs.size() && origin + (k + 2) * spb < seg.range.end)
      throw DemodError(k - first, "Manchester pattern violated");

   if (bits.size() < 2)
      throw DemodError(0, "frame too short");

   return Bits(bits.begin() + 1, bits.end());
}

}

Bits demodulate(const MagnitudeTrace &trace, const Segment &seg, Sender sender, const ModemConfig &cfg)
{
   cfg.validate();

   if (seg.range.empty() || seg.range.end > trace.size())
      throw ParameterError("segment outside trace");

   if (seg.range.length() <= cfg.samples_per_bit())
      throw DemodError(0, "segment shorter than one bit period");

   Bits bits = sender == Sender::Reader ? demodulateReader(trace, seg, cfg) : demodulateCard(trace, seg, cfg);

   if (cfg.invert_bits)
   {
      for (auto &b: bits)
         b ^= 1;
   }

   return bits;
}

Bits demodulate(const MagnitudeTrace &trace, Sender sender, const ModemConfig &cfg)
{
   return demodulate(trace, Segment {{0, trace.size()}, sender}, sender, cfg);
}

}
