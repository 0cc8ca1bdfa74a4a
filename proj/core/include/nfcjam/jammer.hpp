#pragma once

#include <nfcjam/dsp.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace nfcjam {

/// Comb band in the envelope domain: centred on the card subcarrier and
/// spanning the card's +/- 847.5 kHz bandwidth, i.e. (0, 1.695 MHz).
inline constexpr BandSpec SubcarrierBand {SubcarrierHz, 847.5e3};

/// Per-tone amplitude used when a MultiTone profile leaves it unset, in
/// normalized envelope units (clean peak = 1).
inline constexpr double DefaultToneAmplitude = 0.06;

/// White Gaussian noise whose std is `std_factor` times the clean signal std.
struct GaussianWhite
{
   double std_factor = 0.0;
};

/// Equal-amplitude tones at centre + k * spacing, k in [-K, K].
struct MultiTone
{
   double spacing_hz = 0.25e6;
   BandSpec band = SubcarrierBand;
   std::optional<double> per_tone_amplitude;
};

struct GaussianMixture
{
   std::vector<double> means;
   std::vector<double> stds;
   std::vector<double> weights;
};

/// Attenuates the card's load modulation; emits nothing.
struct Shielding
{
   double attenuation_factor = 0.0;
};

using NoiseKind = std::variant<GaussianWhite, MultiTone, GaussianMixture, Shielding>;

/// A blocking-card model. Reactive cards only emit while the reader field is on.
struct NoiseProfile
{
   NoiseKind kind = GaussianWhite {};
   bool reactive = true;

   void validate() const;

   bool additive() const { return !std::holds_alternative<Shielding>(kind); }
};

/// Zero-mean i.i.d. Gaussian samples with std = factor * clean_std.
MagnitudeTrace gen_gaussian_noise(std::size_t n, double clean_std, double factor, std::uint64_t seed,
                                  double sample_rate = DefaultSampleRate);

/// Number of comb tones on each side of the centre, floor(half_width / spacing).
std::size_t tone_half_count(double spacing_hz, const BandSpec &band);

/// Sum of 2K+1 cosines at band.center_hz + k * spacing_hz with seeded random phases.
MagnitudeTrace gen_multitone_noise(std::size_t n, double spacing_hz, const BandSpec &band, double amplitude,
                                   double sample_rate, std::uint64_t seed);

MagnitudeTrace gen_mixture_noise(std::size_t n, const GaussianMixture &mixture, std::uint64_t seed,
                                 double sample_rate = DefaultSampleRate);

/// Superpose `noise` on `clean`.
///
/// Reactive profiles contribute only inside `field_intervals`. For Shielding
/// the noise is ignored and the modulation inside `card_regions` is scaled
/// towards the local carrier level by the attenuation factor.
MagnitudeTrace apply_noise(const MagnitudeTrace &clean, const MagnitudeTrace &noise, const NoiseProfile &profile,
                           const std::vector<Interval> &field_intervals,
                           const std::vector<Interval> &card_regions = {});

nlohmann::ordered_json profile_to_json(const NoiseProfile &profile);

NoiseProfile profile_from_json(const nlohmann::json &json);

}
