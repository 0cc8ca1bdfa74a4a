#pragma once

#include <nfcjam/dsp.hpp>
#include <nfcjam/jammer.hpp>
#include <nfcjam/modem.hpp>
#include <nfcjam/protocol.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nfcjam {

/// Bounds used to tell reader frames from card frames.
///
/// A segment is Reader when its robust minimum (5th percentile) falls below
/// `low` times the local carrier. Otherwise it is Card when its std relative to
/// the carrier lies between the attack's std_diff_threshold and `high`.
struct SenderThresholds
{
   double low = 0.46;
   double high = 0.5;

   /// low = reader_pause + 0.5 * (1 - card_mod_depth), the midpoint of the gap
   /// between a pause and the bottom of the card ripple.
   static SenderThresholds from_modem(const ModemConfig &cfg);
};

struct AttackConfig
{
   std::size_t repetitions = 80;
   double discard_amplitude_threshold = 1.5;
   double std_diff_threshold = 0.01;

   /// field detection smoothing, samples
   std::size_t ma_window = 64;

   /// activity window for segmentation; also the shortest accepted field burst and segment
   std::size_t gradient_window = 32;

   /// windowed mean |gradient| above the noise floor that marks a message
   double gradient_threshold = 0.01;

   /// Card frames are also found through the subcarrier: the windowed mean of
   /// |c(n) - c(n + half bit)| / half bit, c being the half-bit correlation
   /// with the subcarrier. A stationary tone at the subcarrier cancels out.
   double subcarrier_hz = SubcarrierHz;
   double subcarrier_threshold = 0.006;

   SenderThresholds sender_thresholds;

   /// kept traces averaged per analysed trace, one of 1, 2, 4, ..., 32
   std::size_t averaging_n = 1;

   /// worker threads, 0 = hardware concurrency
   std::size_t threads = 0;

   void validate() const;

   /// Defaults with bit-period windows and sender thresholds taken from `modem`.
   static AttackConfig for_modem(const ModemConfig &modem);
};

/// Where a transcript message sits in a simulated trace.
struct Annotation
{
   Sender sender = Sender::Reader;
   /// first to last modulated sample, half-open
   Interval range;
   std::size_t message_index = 0;

   bool operator==(const Annotation &) const = default;
};

/// Timing of a simulated capture, in bit periods.
struct SessionLayout
{
   std::size_t lead_in_bits = 64;
   /// carrier before the first and after the last frame
   std::size_t settle_bits = 16;
   std::size_t tail_bits = 64;
   /// the field switches on up to this many samples early or late
   std::size_t jitter_samples = 16;
   /// each frame starts up to this many samples late; drawn per jammer seed
   std::size_t frame_jitter_samples = 3;
};

struct SimulatedSession
{
   MagnitudeTrace trace;
   std::vector<Annotation> annotations;
   Interval field;
   /// std the Gaussian factor refers to; see simulate_session
   double reference_std = 0.0;
};

/// Synthesize one capture of `transcript` with the jammer of `profile` active.
///
/// The clean envelope is normalized to peak 1. Gaussian noise std is
/// factor * reference_std, where reference_std is the clean envelope's std over
/// a window made of the field-on interval plus an equal span of idle, so the
/// noise level does not depend on how much idle the capture includes.
/// Reactive noise is generated from the field-on instant onward. Comb phases
/// and frame offsets are drawn from `jammer_seed` (default: `seed`).
SimulatedSession simulate_session(const Transcript &transcript, const NoiseProfile &profile, const ModemConfig &cfg,
                                  std::uint64_t seed, const SessionLayout &layout = {},
                                  std::optional<std::uint64_t> jammer_seed = {});

/// Why a trace is rejected, or nullopt when it is kept.
std::optional<std::string> discard_reason(const MagnitudeTrace &trace, const AttackConfig &cfg);

/// Indices of the traces that survive the amplitude and std rules.
std::vector<std::size_t> discard_corrupted(const std::vector<MagnitudeTrace> &traces, const AttackConfig &cfg);

/// Maximal runs where the moving average exceeds half its maximum.
/// Throws FieldNotFound when there is none at least one gradient window long.
std::vector<Interval> detect_field_activation(const MagnitudeTrace &trace, const AttackConfig &cfg);

/// Message segments inside `field`, labelled by sender (no label = Unknown).
/// Throws SegmentationEmpty when nothing is found.
std::vector<Segment> segment_messages(const MagnitudeTrace &trace, Interval field, const AttackConfig &cfg);

/// Mean of traces aligned on their field-on edge (shift limited to `max_shift`).
/// Classic sessions carry fresh nonces every time and are refused.
MagnitudeTrace average_traces(const std::vector<MagnitudeTrace> &traces, CardKind kind, std::size_t max_shift);

struct RecoveredMessage
{
   std::optional<Sender> sender;
   Interval range;
   /// on-air bytes (CRC included) when demodulation and parity succeeded
   std::optional<Bytes> payload;
   std::string failure;

   bool operator==(const RecoveredMessage &) const = default;
};

struct RecoveredTranscript
{
   std::vector<RecoveredMessage> messages;
   bool discarded = false;
   std::string discard_reason;
   /// every segment decoded to bytes; says nothing about whether they are right
   bool complete = false;

   bool operator==(const RecoveredTranscript &) const = default;
};

/// Segment, label and demodulate every frame of an already kept trace.
RecoveredTranscript recover_transcript(const MagnitudeTrace &trace, const AttackConfig &cfg, const ModemConfig &modem);

/// Tallies for one repetition.
struct SessionCounts
{
   std::size_t card_total = 0;
   std::size_t card_detected = 0;
   std::size_t card_demodulated = 0;
   std::size_t reader_total = 0;
   std::size_t reader_demodulated = 0;
   bool success = false;

   bool operator==(const SessionCounts &) const = default;
};

/// Score `recovered` against the ground truth.
///
/// A truth message is detected when a recovered segment not labelled Reader
/// covers at least half of it, and demodulated when that segment carries the
/// right label and exactly the expected on-air bytes.
SessionCounts evaluate_session(const Transcript &truth, const std::vector<Annotation> &annotations,
                               const RecoveredTranscript &recovered);

struct SessionMetrics
{
   double card_detection_rate = 0.0;
   double card_demodulation_rate = 0.0;
   double reader_demodulation_rate = 0.0;
   double attack_success_rate = 0.0;
   std::vector<bool> per_session_success;

   SessionCounts totals;
   std::size_t kept = 0;

   /// the blocking card is considered bypassed as soon as one session succeeds
   bool bypassed() const { return attack_success_rate > 0; }
};

SessionMetrics aggregate_metrics(const std::vector<SessionCounts> &sessions, std::size_t kept);

struct AttackResult
{
   std::vector<RecoveredTranscript> recovered;
   std::vector<Transcript> truths;
   std::vector<std::vector<Annotation>> annotations;
   SessionMetrics metrics;
};

/// Transcript for repetition `index`; Classic sources draw fresh opaque bytes from `session_seed`.
using TranscriptSource = std::function<Transcript(std::size_t index, std::uint64_t session_seed)>;

TranscriptSource source_for(const CardMemory &memory);

TranscriptSource fixed_source(const Transcript &transcript);

/// Seed of repetition `index` within a run seeded with `seed`.
std::uint64_t session_seed(std::uint64_t seed, std::size_t index);

/// Seed shared by every session of a run for the jammer's comb phases and frame timing.
std::uint64_t jammer_seed(std::uint64_t seed);

/// Discard, optionally average, and recover every trace of a batch.
/// Discarded traces come back marked as such with their reason.
std::vector<RecoveredTranscript> attack_batch(const std::vector<MagnitudeTrace> &traces, CardKind kind,
                                              const AttackConfig &cfg, const ModemConfig &modem);

AttackResult run_attack(const TranscriptSource &source, CardKind kind, const NoiseProfile &profile,
                        const AttackConfig &cfg, const ModemConfig &modem, std::uint64_t seed,
                        const SessionLayout &layout = {});

AttackResult run_attack(const Transcript &transcript, const NoiseProfile &profile, const AttackConfig &cfg,
                        const ModemConfig &modem, std::uint64_t seed, const SessionLayout &layout = {});

enum class SweepFamily
{
   GaussianFactors,
   ToneSpacings
};

std::vector<double> default_sweep_values(SweepFamily family);

struct SweepRow
{
   double param = 0.0;
   double reader_demod_rate = 0.0;
   double card_demod_rate = 0.0;
   double detection_rate = 0.0;
   double asr = 0.0;
};

/// Mean rates per parameter over `seeds`, one run_attack per (parameter, seed).
std::vector<SweepRow> countermeasure_sweep(const TranscriptSource &source, CardKind kind, SweepFamily family,
                                           const std::vector<double> &values, const AttackConfig &cfg,
                                           const ModemConfig &modem, const std::vector<std::uint64_t> &seeds);

}
