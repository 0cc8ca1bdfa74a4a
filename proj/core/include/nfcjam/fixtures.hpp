#pragma once

#include <nfcjam/spectrum.hpp>

#include <cstdint>

namespace nfcjam {

/// Recordings of one blocking card with and without the reader field.
struct FixturePair
{
   MagnitudeTrace with_field;
   MagnitudeTrace without_field;
};

/// Canonical synthetic recording pair for `label`; parameters vary with `seed`.
///
/// Both recordings carry a faint receiver noise floor. The carrier sits at 1
/// while the field is on; the card under test is idle.
FixturePair make_fixture(BlockingLabel label, std::uint64_t seed, std::size_t samples = 1 << 16,
                         double sample_rate = DefaultSampleRate);

}
