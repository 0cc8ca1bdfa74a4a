#include <nfcjam/error.hpp>
#include <nfcjam/jammer.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>

namespace nfcjam {

void NoiseProfile::validate() const
{
   std::visit(
      [](const auto &k) {
         using T = std::decay_t<decltype(k)>;

         if constexpr (std::is_same_v<T, GaussianWhite>)
         {
            if (!(k.std_factor >= 0))
               throw ParameterError("std_factor must be non-negative");
         }
         else if constexpr (std::is_same_v<T, MultiTone>)
         {
            if (!(k.spacing_hz > 0))
               throw ParameterError("tone spacing must be positive");

            k.band.validate();

            if (k.per_tone_amplitude && !(*k.per_tone_amplitude >= 0))
               throw ParameterError("tone amplitude must be non-negative");
         }
         else if constexpr (std::is_same_v<T, GaussianMixture>)
         {
            if (k.means.empty() || k.means.size() != k.stds.size() || k.means.size() != k.weights.size())
               throw ParameterError("mixture needs equally many means, stds and weights");

            double total = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);

            if (std::abs(total - 1) > 1e-9)
               throw ParameterError("mixture weights must sum to 1");

            for (std::size_t i = 0; i < k.stds.size(); i++)
            {
               if (!(k.stds[i] >= 0) || !(k.weights[i] >= 0))
                  throw ParameterError("mixture stds and weights must be non-negative");
            }
         }
         else
         {
            if (!(k.attenuation_factor >= 0 && k.attenuation_factor < 1))
               throw ParameterError("attenuation factor must lie in [0, 1)");
         }
      },
      kind);
}

MagnitudeTrace gen_gaussian_noise(std::size_t n, double clean_std, double factor, std::uint64_t seed, double sample_rate)
{
   if (n == 0)
      throw ParameterError("noise length must be positive");

   if (!(factor >= 0) || !(clean_std >= 0))
      throw ParameterError("noise std must be non-negative");

   MagnitudeTrace out;
   out.sample_rate = sample_rate;
   out.samples.assign(n, 0.0);

   double sigma = factor * clean_std;

   if (sigma == 0)
      return out;

   std::mt19937_64 rng(seed);
   std::normal_distribution<double> normal(0.0, sigma);

   for (auto &v: out.samples)
      v = normal(rng);

   return out;
}

std::size_t tone_half_count(double spacing_hz, const BandSpec &band)
{
   if (!(spacing_hz > 0))
      throw ParameterError("tone spacing must be positive");

   // the epsilon keeps exact multiples (e.g. 0.2 MHz * 4 vs 0.8 MHz) from rounding down
   return static_cast<std::size_t>(std::floor(band.half_width_hz / spacing_hz + 1e-9));
}

MagnitudeTrace gen_multitone_noise(std::size_t n, double spacing_hz, const BandSpec &band, double amplitude,
                                   double sample_rate, std::uint64_t seed)
{
   band.validate();

   if (sample_rate < 2 * band.half_width_hz)
      throw ParameterError("sample rate too low for the comb band");

   auto k = static_cast<std::ptrdiff_t>(tone_half_count(spacing_hz, band));

   double lowest = band.center_hz - static_cast<double>(k) * spacing_hz;
   double highest = band.center_hz + static_cast<double>(k) * spacing_hz;

   if (lowest < 0 || highest > sample_rate / 2)
      throw ParameterError("comb tones fall outside (0, sample_rate / 2)");

   std::mt19937_64 rng(seed);
   std::uniform_real_distribution<double> uniform(0.0, 2 * std::numbers::pi);

   MagnitudeTrace out;
   out.sample_rate = sample_rate;
   out.samples.assign(n, 0.0);

   for (std::ptrdiff_t i = -k; i <= k; i++)
   {
      double w = 2 * std::numbers::pi * (band.center_hz + static_cast<double>(i) * spacing_hz) / sample_rate;
      double phase = uniform(rng);

      // rotate a phasor instead of calling cos() per sample, renormalizing periodically
      std::complex<double> step = std::polar(1.0, w);
      std::complex<double> z = std::polar(amplitude, phase);

      for (std::size_t t = 0; t < n; t++)
      {
         out.samples[t] += z.real();
         z *= step;

         if ((t & 1023) == 1023)
            z = std::polar(amplitude, std::arg(z));
      }
   }

   return out;
}

MagnitudeTrace gen_mixture_noise(std::size_t n, const GaussianMixture &mixture, std::uint64_t seed, double sample_rate)
{
   NoiseProfile {mixture}.validate();

   std::mt19937_64 rng(seed);
   std::discrete_distribution<std::size_t> pick(mixture.weights.begin(), mixture.weights.end());
   std::normal_distribution<double> normal(0.0, 1.0);

   MagnitudeTrace out;
   out.sample_rate = sample_rate;
   out.samples.resize(n);

   for (auto &v: out.samples)
   {
      auto c = pick(rng);
      v = mixture.means[c] + mixture.stds[c] * normal(rng);
   }

   return out;
}

MagnitudeTrace apply_noise(const MagnitudeTrace &clean, const MagnitudeTrace &noise, const NoiseProfile &profile,
                           const std::vector<Interval> &field_intervals, const std::vector<Interval> &card_regions)
{
   profile.validate();

   for (const auto &iv: field_intervals)
   {
      if (iv.end > clean.size() || iv.begin > iv.end)
         throw ParameterError("field interval outside trace");
   }

   MagnitudeTrace out = clean;

   if (const auto *shield = std::get_if<Shielding>(&profile.kind))
   {
      for (const auto &region: card_regions)
      {
         if (region.empty())
            continue;

         if (region.end > clean.size())
            throw ParameterError("card region outside trace");

         double carrier = quantile(clean, region, 0.5);

         for (std::size_t i = region.begin; i < region.end; i++)
            out.samples[i] = carrier + shield->attenuation_factor * (clean.samples[i] - carrier);
      }

      return out;
   }

   if (noise.size() != clean.size())
      throw StructuralError("noise and clean traces differ in length");

   if (profile.reactive)
   {
      for (const auto &iv: field_intervals)
      {
         for (std::size_t i = iv.begin; i < iv.end; i++)
            out.samples[i] += noise.samples[i];
      }
   }
   else
   {
      for (std::size_t i = 0; i < out.size(); i++)
         out.samples[i] += noise.samples[i];
   }

   return out;
}

nlohmann::ordered_json profile_to_json(const NoiseProfile &profile)
{
   nlohmann::ordered_json j;

   std::visit(
      [&](const auto &k) {
         using T = std::decay_t<decltype(k)>;

         if constexpr (std::is_same_v<T, GaussianWhite>)
         {
            j["kind"] = "gaussian_white";
            j["std_factor"] = k.std_factor;
         }
         else if constexpr (std::is_same_v<T, MultiTone>)
         {
            j["kind"] = "multi_tone";
            j["spacing_hz"] = k.spacing_hz;
            j["band"] = {{"center_hz", k.band.center_hz}, {"half_width_hz", k.band.half_width_hz}};
            j["per_tone_amplitude"] = k.per_tone_amplitude ? nlohmann::ordered_json(*k.per_tone_amplitude) : nlohmann::ordered_json(nullptr);
         }
         else if constexpr (std::is_same_v<T, GaussianMixture>)
         {
            j["kind"] = "gaussian_mixture";
            j["means"] = k.means;
            j["stds"] = k.stds;
            j["weights"] = k.weights;
         }
         else
         {
            j["kind"] = "shielding";
            j["attenuation_factor"] = k.attenuation_factor;
         }
      },
      profile.kind);

   j["reactive"] = profile.reactive;

   return j;
}

NoiseProfile profile_from_json(const nlohmann::json &json)
{
   NoiseProfile profile;

   try
   {
      auto kind = json.at("kind").get<std::string>();

      if (kind == "gaussian_white")
      {
         profile.kind = GaussianWhite {json.at("std_factor").get<double>()};
      }
      else if (kind == "multi_tone")
      {
         MultiTone tone;
         tone.spacing_hz = json.at("spacing_hz").get<double>();

         if (json.contains("band"))
         {
            tone.band.center_hz = json["band"].at("center_hz").get<double>();
            tone.band.half_width_hz = json["band"].at("half_width_hz").get<double>();
         }

         if (json.contains("per_tone_amplitude") && !json["per_tone_amplitude"].is_null())
            tone.per_tone_amplitude = json["per_tone_amplitude"].get<double>();

         profile.kind = tone;
      }
      else if (kind == "gaussian_mixture")
      {
         profile.kind = GaussianMixture {
            json.at("means").get<std::vector<double>>(),
            json.at("stds").get<std::vector<double>>(),
            json.at("weights").get<std::vector<double>>(),
         };
      }
      else if (kind == "shielding")
      {
         profile.kind = Shielding {json.at("attenuation_factor").get<double>()};
      }
      else
      {
         throw ParameterError("unknown noise profile kind '" + kind + "'");
      }

      profile.reactive = json.value("reactive", true);
   }
   catch (const nlohmann::json::exception &e)
   {
      throw ParameterError(std::string("malformed noise profile: ") + e.what());
   }

   profile.validate();

   return profile;
}

}
