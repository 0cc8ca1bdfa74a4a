#include <nfcjam/dsp.hpp>
#include <nfcjam/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace nfcjam {

void MagnitudeTrace::validate() const
{
   if (!(sample_rate > 0) || !std::isfinite(sample_rate))
      throw ParameterError("sample rate must be positive");

   for (std::size_t i = 0; i < samples.size(); i++)
   {
      if (!std::isfinite(samples[i]))
         throw ParameterError("non-finite sample at index " + std::to_string(i));
   }
}

void BandSpec::validate() const
{
   if (!(half_width_hz > 0))
      throw ParameterError("band half width must be positive");
}

MagnitudeTrace magnitude(const ComplexTrace &trace)
{
   if (trace.i_samples.size() != trace.q_samples.size())
      throw StructuralError("I and Q lengths differ");

   if (!(trace.sample_rate > 0))
      throw ParameterError("sample rate must be positive");

   MagnitudeTrace out;
   out.sample_rate = trace.sample_rate;
   out.samples.resize(trace.i_samples.size());

   for (std::size_t n = 0; n < out.samples.size(); n++)
      out.samples[n] = std::hypot(trace.i_samples[n], trace.q_samples[n]);

   return out;
}

std::vector<double> design_lowpass(double cutoff_hz, double sample_rate, std::size_t taps)
{
   double nyquist = sample_rate / 2;

   if (!(cutoff_hz > 0) || cutoff_hz >= nyquist)
      throw ParameterError("cutoff must lie in (0, sample_rate / 2)");

   // 10 dB of margin over the 40 dB stopband requirement
   constexpr double attenuation = 50.0;

   double beta = 0.1102 * (attenuation - 8.7);

   if (taps == 0)
   {
      double transition = 2 * std::numbers::pi * 0.7 * cutoff_hz / sample_rate;
      taps = static_cast<std::size_t>(std::ceil((attenuation - 8) / (2.285 * transition))) + 1;
   }

   taps |= 1;

   // put the -6 dB point in the middle of the [0.8, 1.5] x cutoff transition
   double edge = std::min(1.15 * cutoff_hz, (0.8 * cutoff_hz + nyquist) / 2);
   double wc = 2 * edge / sample_rate;

   std::vector<double> h(taps);
   double center = (taps - 1) / 2.0;
   double i0beta = std::cyl_bessel_i(0.0, beta);

   for (std::size_t n = 0; n < taps; n++)
   {
      double m = n - center;
      double sinc = m == 0 ? wc : std::sin(std::numbers::pi * wc * m) / (std::numbers::pi * m);
      double r = taps > 1 ? m / center : 0.0;
      double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1 - r * r))) / i0beta;
      h[n] = sinc * w;
   }

   double gain = std::accumulate(h.begin(), h.end(), 0.0);

   for (auto &v: h)
      v /= gain;

   return h;
}

MagnitudeTrace lowpass_filter(const MagnitudeTrace &trace, double cutoff_hz, std::size_t taps)
{
   auto h = design_lowpass(cutoff_hz, trace.sample_rate, taps);

   MagnitudeTrace out = trace;

   if (trace.samples.empty())
      return out;

   auto n = static_cast<std::ptrdiff_t>(trace.samples.size());
   auto half = static_cast<std::ptrdiff_t>(h.size() / 2);

   auto at = [&](std::ptrdiff_t k) {
      return trace.samples[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, n - 1))];
   };

   for (std::ptrdiff_t i = 0; i < n; i++)
   {
      double acc = 0;

      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(h.size()); k++)
         acc += h[static_cast<std::size_t>(k)] * at(i + half - k);

      out.samples[static_cast<std::size_t>(i)] = acc;
   }

   return out;
}

MagnitudeTrace normalize(const MagnitudeTrace &trace)
{
   MagnitudeTrace out = trace;

   if (trace.samples.empty())
      return out;

   double peak = *std::max_element(trace.samples.begin(), trace.samples.end());

   if (peak <= 0)
      return out;

   for (auto &v: out.samples)
      v /= peak;

   // exact 1.0 at the peak regardless of rounding in the division
   for (std::size_t i = 0; i < out.samples.size(); i++)
   {
      if (trace.samples[i] == peak)
         out.samples[i] = 1.0;
   }

   return out;
}

static void checkRange(const MagnitudeTrace &trace, Interval range)
{
   if (range.empty())
      throw ParameterError("empty sample range");

   if (range.end > trace.size())
      throw ParameterError("sample range exceeds trace length");
}

double mean(const MagnitudeTrace &trace, Interval range)
{
   checkRange(trace, range);

   double sum = 0;

   for (std::size_t i = range.begin; i < range.end; i++)
      sum += trace.samples[i];

   return sum / static_cast<double>(range.length());
}

double std_dev(const MagnitudeTrace &trace, Interval range)
{
   double m = mean(trace, range);
   double acc = 0;

   for (std::size_t i = range.begin; i < range.end; i++)
   {
      double d = trace.samples[i] - m;
      acc += d * d;
   }

   return std::sqrt(acc / static_cast<double>(range.length()));
}

MagnitudeTrace moving_average(const MagnitudeTrace &trace, std::size_t window)
{
   if (window == 0)
      throw ParameterError("moving average window must be at least 1");

   if (window > trace.size())
      throw ParameterError("moving average window longer than trace");

   std::size_t n = trace.size();

   // prefix sums in long double keep the centered mean within ~1e-15 of the naive sum
   std::vector<long double> prefix(n + 1, 0.0L);

   for (std::size_t i = 0; i < n; i++)
      prefix[i + 1] = prefix[i] + trace.samples[i];

   std::size_t before = (window - 1) / 2;
   std::size_t after = window - 1 - before;

   MagnitudeTrace out = trace;

   for (std::size_t i = 0; i < n; i++)
   {
      std::size_t lo = i >= before ? i - before : 0;
      std::size_t hi = std::min(n, i + after + 1);
      out.samples[i] = static_cast<double>((prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo));
   }

   return out;
}

std::vector<double> gradient(const std::vector<double> &samples)
{
   std::vector<double> out(samples.size(), 0.0);

   for (std::size_t i = 0; i + 1 < samples.size(); i++)
      out[i] = samples[i + 1] - samples[i];

   if (samples.size() >= 2)
      out.back() = out[out.size() - 2];

   return out;
}

double quantile(const MagnitudeTrace &trace, Interval range, double q)
{
   checkRange(trace, range);

   std::vector<double> values(trace.samples.begin() + static_cast<std::ptrdiff_t>(range.begin),
                              trace.samples.begin() + static_cast<std::ptrdiff_t>(range.end));

   auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1) + 0.5);
   std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());

   return values[k];
}

}
