#include <nfcjam/error.hpp>
#include <nfcjam/fixtures.hpp>

#include <random>

namespace nfcjam {

namespace {

constexpr double ReceiverFloor = 1e-3;

void add(MagnitudeTrace &into, const MagnitudeTrace &noise)
{
   for (std::size_t i = 0; i < into.size(); i++)
      into.samples[i] += noise.samples[i];
}

}

FixturePair make_fixture(BlockingLabel label, std::uint64_t seed, std::size_t samples, double sample_rate)
{
   if (samples < 1024)
      throw ParameterError("fixture too short");

   std::mt19937_64 rng(seed);
   std::uniform_real_distribution<double> unit(0.0, 1.0);

   auto floorNoise = [&] { return gen_gaussian_noise(samples, ReceiverFloor, 1.0, rng(), sample_rate); };

   FixturePair pair;
   pair.with_field = floorNoise();
   pair.without_field = floorNoise();

   double carrier = 1.0;

   switch (label)
   {
      case BlockingLabel::ReactiveGaussian:
         add(pair.with_field, gen_gaussian_noise(samples, 1.0, 0.03 + 0.12 * unit(rng), rng(), sample_rate));
         break;

      case BlockingLabel::ReactiveFixedFrequency:
      {
         static constexpr double spacings[] = {0.05e6, 0.10e6, 0.15e6, 0.20e6, 0.25e6};
         double spacing = spacings[rng() % 5];
         add(pair.with_field, gen_multitone_noise(samples, spacing, SubcarrierBand, 0.02 + 0.06 * unit(rng), sample_rate, rng()));
         break;
      }

      case BlockingLabel::Active:
      {
         auto noise = gen_gaussian_noise(samples, 1.0, 0.03 + 0.12 * unit(rng), rng(), sample_rate);
         add(pair.with_field, noise);
         add(pair.without_field, noise);
         break;
      }

      case BlockingLabel::Shielding:
         carrier = 0.2 + 0.6 * unit(rng);
         break;
   }

   for (auto &v: pair.with_field.samples)
      v += carrier;

   pair.with_field.label = std::string(to_string(label)) + " with field";
   pair.without_field.label = std::string(to_string(label)) + " without field";

   return pair;
}

}
