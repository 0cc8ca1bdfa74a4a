#pragma once

#include <nfcjam/dsp.hpp>
#include <nfcjam/jammer.hpp>

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace nfcjam {

/// One-sided Welch estimate. `power` is linear (units^2 / Hz), `power_db` is
/// relative to the strongest bin.
struct PsdTable
{
   std::vector<double> frequency_hz;
   std::vector<double> power;
   std::vector<double> power_db;
   double bin_hz = 0.0;

   std::size_t size() const { return power.size(); }

   /// Integral of the PSD, comparable with the mean-square of the input.
   double total_power() const;
};

struct Histogram
{
   /// bins + 1 ascending edges
   std::vector<double> edges;
   /// fraction of samples per bin, sums to 1
   std::vector<double> probability;
};

struct SpectralPeak
{
   double offset_hz = 0.0;
   double prominence_db = 0.0;
};

enum class BlockingLabel
{
   ReactiveGaussian,
   ReactiveFixedFrequency,
   Active,
   Shielding
};

std::string_view to_string(BlockingLabel label);

BlockingLabel blocking_label_from_string(std::string_view text);

struct ClassifierConfig
{
   std::size_t segment_len = 1024;
   std::size_t histogram_bins = 64;
   double flatness_threshold = 0.5;
   double peak_threshold_db = 12.0;
   std::size_t min_peaks = 3;
   /// noise variance relative to the carrier power below which a recording counts as idle
   double idle_threshold = 1e-4;
   /// envelope-domain band holding the card response
   BandSpec band = SubcarrierBand;

   void validate() const;
};

struct SpectrumReport
{
   PsdTable psd;
   Histogram amplitude_histogram;
   double spectral_flatness = 0.0;
   std::vector<SpectralPeak> detected_peaks;
   BlockingLabel label = BlockingLabel::Shielding;

   /// Goodness of fit of the amplitude histogram against a Gaussian with the
   /// sample mean and std; reported only, never used to decide the label.
   double gaussian_p_value = 0.0;
   std::size_t histogram_modes = 0;
};

/// Hann-windowed, half-overlapping averaged periodogram.
PsdTable estimate_psd(const MagnitudeTrace &trace, std::size_t segment_len);

/// Histogram of sample values over [min, max]; a constant trace fills one bin.
Histogram amplitude_pdf(const MagnitudeTrace &trace, std::size_t bins);

/// Geometric over arithmetic mean of the linear PSD inside `band` (DC excluded).
double spectral_flatness(const PsdTable &psd, const BandSpec &band);

/// Local maxima inside `band` whose topographic prominence reaches `threshold_db`, by offset.
std::vector<SpectralPeak> find_peaks(const PsdTable &psd, const BandSpec &band, double threshold_db);

/// Local maxima of the 3-bin smoothed histogram that rise at least a tenth of
/// the tallest bin above the valleys around them.
std::size_t count_modes(const Histogram &hist);

/// Chi-square p-value of `hist` (built from `samples` values) against N(mean, std).
double gaussian_fit_p_value(const Histogram &hist, std::size_t samples, double mean, double std);

SpectrumReport classify_blocking_card(const MagnitudeTrace &with_field, const MagnitudeTrace &without_field,
                                      const ClassifierConfig &cfg = {});

nlohmann::ordered_json report_to_json(const SpectrumReport &report);

std::string psd_to_csv(const PsdTable &psd);

std::string histogram_to_csv(const Histogram &hist);

}
