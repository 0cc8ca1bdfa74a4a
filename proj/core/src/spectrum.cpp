#include <nfcjam/error.hpp>
#include <nfcjam/spectrum.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <numbers>

namespace nfcjam {

namespace {

/// a histogram mode must stand this fraction of the tallest bin above its surroundings
constexpr double ModeProminence = 0.1;

// the FFTW planner is not thread-safe; execution is
std::mutex plannerMutex;

struct FftwFree
{
   void operator()(void *p) const { fftw_free(p); }
};

std::string format_number(double v)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "%.9g", v);
   return buf;
}

// bin range [first, last] of `psd` falling inside `band`, DC excluded
std::pair<std::size_t, std::size_t> band_bins(const PsdTable &psd, const BandSpec &band)
{
   std::size_t first = psd.size(), last = 0;

   for (std::size_t k = 1; k < psd.size(); k++)
   {
      double f = psd.frequency_hz[k];

      if (f >= band.center_hz - band.half_width_hz && f <= band.center_hz + band.half_width_hz)
      {
         first = std::min(first, k);
         last = k;
      }
   }

   if (first > last)
      throw ParameterError("no PSD bins inside the analysis band");

   return {first, last};
}

double variance(const MagnitudeTrace &t)
{
   double s = std_dev(t);
   return s * s;
}

}

double PsdTable::total_power() const
{
   double sum = 0;

   for (double p: power)
      sum += p * bin_hz;

   return sum;
}

std::string_view to_string(BlockingLabel label)
{
   switch (label)
   {
      case BlockingLabel::ReactiveGaussian:
         return "ReactiveGaussian";
      case BlockingLabel::ReactiveFixedFrequency:
         return "ReactiveFixedFrequency";
      case BlockingLabel::Active:
         return "Active";
      case BlockingLabel::Shielding:
         return "Shielding";
   }

   return "?";
}

BlockingLabel blocking_label_from_string(std::string_view text)
{
   for (auto l: {BlockingLabel::ReactiveGaussian, BlockingLabel::ReactiveFixedFrequency, BlockingLabel::Active,
                 BlockingLabel::Shielding})
   {
      if (to_string(l) == text)
         return l;
   }

   throw ParameterError("unknown blocking card label '" + std::string(text) + "'");
}

void ClassifierConfig::validate() const
{
   if (segment_len < 16 || (segment_len & 1))
      throw ParameterError("PSD segment length must be even and at least 16");

   if (histogram_bins < 8)
      throw ParameterError("histogram needs at least 8 bins");

   if (!(flatness_threshold > 0 && flatness_threshold < 1) || !(peak_threshold_db > 0) || !(idle_threshold > 0))
      throw ParameterError("classifier thresholds out of range");

   band.validate();
}

PsdTable estimate_psd(const MagnitudeTrace &trace, std::size_t segment_len)
{
   if (segment_len < 2 || (segment_len & 1))
      throw ParameterError("PSD segment length must be even and at least 2");

   if (trace.size() < segment_len)
      throw ParameterError("trace shorter than one PSD segment");

   std::size_t n = segment_len;
   std::size_t bins = n / 2 + 1;
   std::size_t step = n / 2;
   std::size_t segments = (trace.size() - n) / step + 1;

   std::vector<double> window(n);
   double windowPower = 0;

   for (std::size_t i = 0; i < n; i++)
   {
      window[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
      windowPower += window[i] * window[i];
   }

   std::unique_ptr<double, FftwFree> in(static_cast<double *>(fftw_malloc(sizeof(double) * n)));
   std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * bins)));

   if (!in || !out)
      throw std::bad_alloc();

   fftw_plan plan;
   {
      std::lock_guard lock(plannerMutex);
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
   }

   PsdTable psd;
   psd.bin_hz = trace.sample_rate / static_cast<double>(n);
   psd.power.assign(bins, 0.0);

   for (std::size_t s = 0; s < segments; s++)
   {
      for (std::size_t i = 0; i < n; i++)
         in.get()[i] = trace.samples[s * step + i] * window[i];

      fftw_execute(plan);

      for (std::size_t k = 0; k < bins; k++)
      {
         double re = out.get()[k][0], im = out.get()[k][1];
         double p = (re * re + im * im) / (trace.sample_rate * windowPower);

         // one-sided: fold negative frequencies except DC and Nyquist
         if (k != 0 && k != n / 2)
            p *= 2;

         psd.power[k] += p;
      }
   }

   {
      std::lock_guard lock(plannerMutex);
      fftw_destroy_plan(plan);
   }

   double peak = 0;

   for (auto &p: psd.power)
   {
      p /= static_cast<double>(segments);
      peak = std::max(peak, p);
   }

   psd.frequency_hz.resize(bins);
   psd.power_db.resize(bins);

   for (std::size_t k = 0; k < bins; k++)
   {
      psd.frequency_hz[k] = static_cast<double>(k) * psd.bin_hz;
      psd.power_db[k] = peak > 0 ? 10 * std::log10(std::max(psd.power[k], peak * 1e-30) / peak) : 0.0;
   }

   return psd;
}

Histogram amplitude_pdf(const MagnitudeTrace &trace, std::size_t bins)
{
   if (bins < 8)
      throw ParameterError("histogram needs at least 8 bins");

   if (trace.size() == 0)
      throw ParameterError("empty trace");

   auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end());
   double low = *lo, high = *hi;

   if (high == low)
   {
      low -= 0.5;
      high += 0.5;
   }

   Histogram h;
   h.edges.resize(bins + 1);
   h.probability.assign(bins, 0.0);

   double width = (high - low) / static_cast<double>(bins);

   for (std::size_t i = 0; i <= bins; i++)
      h.edges[i] = low + width * static_cast<double>(i);

   h.edges.back() = high;

   std::vector<std::size_t> counts(bins, 0);

   for (double v: trace.samples)
   {
      auto b = static_cast<std::size_t>((v - low) / width);
      counts[std::min(b, bins - 1)]++;
   }

   for (std::size_t i = 0; i < bins; i++)
      h.probability[i] = static_cast<double>(counts[i]) / static_cast<double>(trace.size());

   return h;
}

double spectral_flatness(const PsdTable &psd, const BandSpec &band)
{
   auto [first, last] = band_bins(psd, band);

   double logSum = 0, sum = 0;

   for (std::size_t k = first; k <= last; k++)
   {
      if (!(psd.power[k] > 0))
         return 0.0;

      logSum += std::log(psd.power[k]);
      sum += psd.power[k];
   }

   auto count = static_cast<double>(last - first + 1);
   double flatness = std::exp(logSum / count) / (sum / count);

   return std::clamp(flatness, 0.0, 1.0);
}

std::vector<SpectralPeak> find_peaks(const PsdTable &psd, const BandSpec &band, double threshold_db)
{
   auto [first, last] = band_bins(psd, band);
   const auto &db = psd.power_db;

   std::vector<SpectralPeak> peaks;

   for (std::size_t i = first + 1; i < last; i++)
   {
      if (!(db[i] > db[i - 1] && db[i] >= db[i + 1]))
         continue;

      // lowest point on each side before terrain rises above this peak
      double leftMin = db[i], rightMin = db[i];

      for (std::size_t j = i; j-- > first && db[j] <= db[i];)
         leftMin = std::min(leftMin, db[j]);

      for (std::size_t j = i + 1; j <= last && db[j] <= db[i]; j++)
         rightMin = std::min(rightMin, db[j]);

      double prominence = db[i] - std::max(leftMin, rightMin);

      if (prominence >= threshold_db)
         peaks.push_back({psd.frequency_hz[i] - band.center_hz, prominence});
   }

   return peaks;
}

std::size_t count_modes(const Histogram &hist)
{
   const auto &p = hist.probability;
   std::size_t n = p.size();
   std::vector<double> smooth(n);

   for (std::size_t i = 0; i < n; i++)
   {
      double left = i > 0 ? p[i - 1] : 0.0;
      double right = i + 1 < n ? p[i + 1] : 0.0;
      smooth[i] = 0.25 * left + 0.5 * p[i] + 0.25 * right;
   }

   double top = n ? *std::max_element(smooth.begin(), smooth.end()) : 0.0;
   std::size_t modes = 0;

   // pad with zeros so a maximum at either end can still be a mode
   auto at = [&](std::ptrdiff_t i) {
      return i < 0 || i >= static_cast<std::ptrdiff_t>(n) ? 0.0 : smooth[static_cast<std::size_t>(i)];
   };

   for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); i++)
   {
      if (!(at(i) > at(i - 1)))
         continue;

      // walk across a plateau before deciding
      std::ptrdiff_t j = i;

      while (j + 1 < static_cast<std::ptrdiff_t>(n) && at(j + 1) == at(i))
         j++;

      if (at(i) > at(j + 1))
      {
         double leftMin = at(i), rightMin = at(i);

         for (std::ptrdiff_t k = i - 1; k >= -1 && at(k) <= at(i); k--)
            leftMin = std::min(leftMin, at(k));

         for (std::ptrdiff_t k = j + 1; k <= static_cast<std::ptrdiff_t>(n) && at(k) <= at(i); k++)
            rightMin = std::min(rightMin, at(k));

         if (at(i) - std::max(leftMin, rightMin) >= ModeProminence * top)
            modes++;
      }

      i = j;
   }

   return modes;
}

double gaussian_fit_p_value(const Histogram &hist, std::size_t samples, double mean, double std)
{
   if (!(std > 0) || samples == 0)
      return 0.0;

   boost::math::normal_distribution<double> normal(mean, std);
   std::size_t bins = hist.probability.size();

   double observed = 0, expected = 0, chi = 0;
   std::size_t cells = 0;
   auto n = static_cast<double>(samples);

   for (std::size_t i = 0; i < bins; i++)
   {
      // outer bins absorb the tails
      double lo = i == 0 ? 0.0 : boost::math::cdf(normal, hist.edges[i]);
      double hi = i + 1 == bins ? 1.0 : boost::math::cdf(normal, hist.edges[i + 1]);

      observed += hist.probability[i] * n;
      expected += (hi - lo) * n;

      // pool sparse cells so every expected count reaches 5
      if (expected >= 5 || i + 1 == bins)
      {
         if (expected > 0)
         {
            chi += (observed - expected) * (observed - expected) / expected;
            cells++;
         }

         observed = expected = 0;
      }
   }

   if (cells <= 3)
      return 0.0;

   boost::math::chi_squared_distribution<double> dist(static_cast<double>(cells - 3));
   return boost::math::cdf(boost::math::complement(dist, chi));
}

SpectrumReport classify_blocking_card(const MagnitudeTrace &with_field, const MagnitudeTrace &without_field,
                                      const ClassifierConfig &cfg)
{
   cfg.validate();
   with_field.validate();
   without_field.validate();

   if (with_field.sample_rate != without_field.sample_rate)
      throw ParameterError("recordings differ in sample rate");

   SpectrumReport report;
   report.psd = estimate_psd(with_field, cfg.segment_len);
   report.amplitude_histogram = amplitude_pdf(with_field, cfg.histogram_bins);
   report.spectral_flatness = spectral_flatness(report.psd, cfg.band);
   report.detected_peaks = find_peaks(report.psd, cfg.band, cfg.peak_threshold_db);
   report.histogram_modes = count_modes(report.amplitude_histogram);

   double level = mean(with_field, {0, with_field.size()});
   double sd = std_dev(with_field);
   report.gaussian_p_value = gaussian_fit_p_value(report.amplitude_histogram, with_field.size(), level, sd);

   // powers relative to the field-on level keep the rules scale invariant
   double reference = level * level;
   auto relative = [&](double v) {
      if (reference > 0)
         return v / reference;

      return v > 0 ? std::numeric_limits<double>::infinity() : 0.0;
   };

   if (relative(variance(without_field)) > cfg.idle_threshold)
      report.label = BlockingLabel::Active;
   else if (relative(variance(with_field)) <= cfg.idle_threshold)
      report.label = BlockingLabel::Shielding;
   else if (report.spectral_flatness >= cfg.flatness_threshold)
      report.label = BlockingLabel::ReactiveGaussian;
   else if (report.detected_peaks.size() >= cfg.min_peaks)
      report.label = BlockingLabel::ReactiveFixedFrequency;
   else
      report.label = BlockingLabel::ReactiveGaussian; // coloured noise without distinct tones

   return report;
}

nlohmann::ordered_json report_to_json(const SpectrumReport &report)
{
   nlohmann::ordered_json j;
   j["label"] = to_string(report.label);
   j["spectral_flatness"] = report.spectral_flatness;

   auto peaks = nlohmann::ordered_json::array();

   for (const auto &p: report.detected_peaks)
      peaks.push_back({{"offset_hz", p.offset_hz}, {"prominence_db", p.prominence_db}});

   j["detected_peaks"] = peaks;
   j["gaussian_p_value"] = report.gaussian_p_value;
   j["histogram_modes"] = report.histogram_modes;
   j["psd"] = {{"bin_hz", report.psd.bin_hz}, {"frequency_hz", report.psd.frequency_hz}, {"power_db", report.psd.power_db}};
   j["amplitude_histogram"] = {{"edges", report.amplitude_histogram.edges},
                               {"probability", report.amplitude_histogram.probability}};

   return j;
}

std::string psd_to_csv(const PsdTable &psd)
{
   std::string out = "frequency_hz,power_db,power\n";

   for (std::size_t k = 0; k < psd.size(); k++)
      out += format_number(psd.frequency_hz[k]) + "," + format_number(psd.power_db[k]) + "," + format_number(psd.power[k]) + "\n";

   return out;
}

std::string histogram_to_csv(const Histogram &hist)
{
   std::string out = "bin_low,bin_high,probability\n";

   for (std::size_t i = 0; i < hist.probability.size(); i++)
      out += format_number(hist.edges[i]) + "," + format_number(hist.edges[i + 1]) + "," + format_number(hist.probability[i]) + "\n";

   return out;
}

}
