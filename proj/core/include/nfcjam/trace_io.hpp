#pragma once

#include <nfcjam/dsp.hpp>

#include <filesystem>
#include <string>

namespace nfcjam {

/// Trace files: `<base>.f32` holds raw little-endian float32 samples, `<base>.json`
/// the sidecar `{sample_rate_hz, label, origin}`.
///
/// Samples are stored as float32, so only float-representable traces round-trip
/// exactly; re-writing a trace that was read back reproduces the same bytes.
void write_trace(const std::filesystem::path &base, const MagnitudeTrace &trace);

MagnitudeTrace read_trace(const std::filesystem::path &base);

/// Round every sample to the nearest float32, i.e. what a write/read cycle yields.
MagnitudeTrace quantize_f32(const MagnitudeTrace &trace);

/// Write through a temporary sibling and rename, so readers never see partial files.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);

std::string read_file(const std::filesystem::path &path);

}
