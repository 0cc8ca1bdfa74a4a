#pragma once

#include <nfcjam/dsp.hpp>
#include <nfcjam/protocol.hpp>

#include <optional>

namespace nfcjam {

/// Physical-layer parameters for 106 kbit/s ISO/IEC 14443 Type A.
struct ModemConfig
{
   double sample_rate = DefaultSampleRate;
   double bit_rate = CarrierHz / 128;
   double subcarrier_hz = SubcarrierHz;

   /// reader envelope: carrier level and pause level (100% ASK)
   double reader_high = 1.0;
   double reader_pause = 0.0;

   /// card load-modulation ripple amplitude relative to the carrier
   double card_mod_depth = 0.08;

   /// idle carrier between consecutive frames, in bit periods
   std::size_t guard_bits = 20;

   /// flip demodulated bits; needed only for traces decoded with inverted polarity
   bool invert_bits = false;

   /// sinusoidal instead of square subcarrier ripple
   bool sinusoidal_subcarrier = false;

   /// A card bit is accepted when the half-bit correlation difference reaches
   /// this fraction of the message's median difference.
   double card_pattern_margin = 0.4;

   /// Samples below the pause threshold tolerated inside a carrier quarter slot.
   std::size_t reader_dip_tolerance = 0;

   void validate() const;

   std::size_t samples_per_bit() const;
};

/// A message-sized slice of a trace.
struct Segment
{
   Interval range;
   std::optional<Sender> sender_hint;

   bool operator==(const Segment &) const = default;
};

/// Modified Miller envelope: start-of-communication Z, the data bits, then the
/// end-of-communication logic 0. Pauses last a quarter of a bit period.
MagnitudeTrace modulate_reader(const Bits &bits, const ModemConfig &cfg);

/// Manchester load modulation on the subcarrier: start bit (logic 1), data
/// bits, then one unmodulated bit period.
MagnitudeTrace modulate_card(const Bits &bits, const ModemConfig &cfg);

/// Recover frame bits from `seg` of `trace`, start and end framing removed.
/// Throws DemodError when a bit period holds no valid pattern.
Bits demodulate(const MagnitudeTrace &trace, const Segment &seg, Sender sender, const ModemConfig &cfg);

/// Demodulate a whole trace holding a single frame.
Bits demodulate(const MagnitudeTrace &trace, Sender sender, const ModemConfig &cfg);

/// Envelope of one protocol message, as its sender would modulate it.
MagnitudeTrace modulate_message(const Message &msg, const ModemConfig &cfg);

/// FrameKind implied by a demodulated bit count.
FrameKind frame_kind_for(std::size_t bitCount);

}
