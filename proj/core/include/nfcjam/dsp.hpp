#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace nfcjam {

/// ISO/IEC 14443 carrier frequency.
inline constexpr double CarrierHz = 13.56e6;

/// Default simulation rate, a quarter of the carrier (32 samples per 106 kbit/s bit).
inline constexpr double DefaultSampleRate = CarrierHz / 4;

/// Card subcarrier, fc/16.
inline constexpr double SubcarrierHz = CarrierHz / 16;

/// Half-open sample range [begin, end).
struct Interval
{
   std::size_t begin = 0;
   std::size_t end = 0;

   std::size_t length() const { return end > begin ? end - begin : 0; }
   bool empty() const { return end <= begin; }

   bool operator==(const Interval &) const = default;
};

enum class TraceOrigin
{
   Synthetic,
   File
};

/// Uniformly sampled envelope signal.
///
/// Invariants: every sample is finite and sample_rate > 0. The envelope is
/// dimensionless; traces produced by the simulator are normalized so that the
/// clean signal peaks at 1.0.
struct MagnitudeTrace
{
   std::vector<double> samples;
   double sample_rate = DefaultSampleRate;
   TraceOrigin origin = TraceOrigin::Synthetic;
   std::optional<std::string> label;

   std::size_t size() const { return samples.size(); }

   /// Throws ParameterError when an invariant is broken.
   void validate() const;

   bool operator==(const MagnitudeTrace &) const = default;
};

/// Raw I/Q capture prior to envelope detection.
struct ComplexTrace
{
   std::vector<double> i_samples;
   std::vector<double> q_samples;
   double sample_rate = DefaultSampleRate;
};

/// A frequency band given by its centre and half width.
struct BandSpec
{
   double center_hz = CarrierHz;
   double half_width_hz = SubcarrierHz;

   void validate() const;
};

/// Capture band used by the original GNURadio flow (fc +/- 423.75 kHz).
inline constexpr BandSpec NarrowCaptureBand {CarrierHz, 423.75e3};

/// Band occupied by the card response (fc +/- 847.5 kHz).
inline constexpr BandSpec CardBand {CarrierHz, 847.5e3};

MagnitudeTrace magnitude(const ComplexTrace &trace);

/// Kaiser-windowed sinc low-pass taps, normalized to unit DC gain.
///
/// The design targets <= 1 dB ripple below 0.8 * cutoff and >= 40 dB
/// attenuation above 1.5 * cutoff. `taps` == 0 picks the order from the Kaiser
/// estimate; an even request is rounded up so the filter stays type I.
std::vector<double> design_lowpass(double cutoff_hz, double sample_rate, std::size_t taps = 0);

/// Linear-phase FIR low-pass; output is aligned with the input (group delay
/// removed) and has the same length, edges are extended by replication.
MagnitudeTrace lowpass_filter(const MagnitudeTrace &trace, double cutoff_hz, std::size_t taps = 0);

/// Scale by 1 / max. All-zero input is returned unchanged.
MagnitudeTrace normalize(const MagnitudeTrace &trace);

double mean(const MagnitudeTrace &trace, Interval range);

/// Population standard deviation over `range`.
double std_dev(const MagnitudeTrace &trace, Interval range);

inline double std_dev(const MagnitudeTrace &trace)
{
   return std_dev(trace, {0, trace.size()});
}

/// Centered moving mean; at the edges the window shrinks to the available samples.
MagnitudeTrace moving_average(const MagnitudeTrace &trace, std::size_t window);

/// Forward difference, last sample repeated so the length is preserved.
std::vector<double> gradient(const std::vector<double> &samples);

/// Value at quantile q in [0, 1] (nearest rank) of the samples in `range`.
double quantile(const MagnitudeTrace &trace, Interval range, double q);

}
