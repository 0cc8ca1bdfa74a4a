#include <nfcjam/error.hpp>
#include <nfcjam/trace_io.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nfcjam {

namespace fs = std::filesystem;

namespace {

fs::path withSuffix(const fs::path &base, const char *suffix)
{
   return fs::path(base.string() + suffix);
}

std::uint32_t toLittle(std::uint32_t v)
{
   if constexpr (std::endian::native == std::endian::big)
      return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
   else
      return v;
}

}

void write_file_atomic(const fs::path &path, const std::string &content)
{
   fs::path tmp = path;
   tmp += ".tmp";

   {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);

      if (!out)
         throw IoError("cannot open " + tmp.string() + " for writing");

      out.write(content.data(), static_cast<std::streamsize>(content.size()));

      if (!out)
         throw IoError("write failed for " + tmp.string());
   }

   std::error_code ec;
   fs::rename(tmp, path, ec);

   if (ec)
      throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path &path)
{
   std::ifstream in(path, std::ios::binary);

   if (!in)
      throw IoError("cannot open " + path.string());

   std::ostringstream buffer;
   buffer << in.rdbuf();

   return buffer.str();
}

MagnitudeTrace quantize_f32(const MagnitudeTrace &trace)
{
   MagnitudeTrace out = trace;

   for (auto &v: out.samples)
      v = static_cast<double>(static_cast<float>(v));

   return out;
}

void write_trace(const fs::path &base, const MagnitudeTrace &trace)
{
   trace.validate();

   std::string raw(trace.samples.size() * 4, '\0');

   for (std::size_t i = 0; i < trace.samples.size(); i++)
   {
      auto word = toLittle(std::bit_cast<std::uint32_t>(static_cast<float>(trace.samples[i])));
      std::memcpy(raw.data() + 4 * i, &word, 4);
   }

   nlohmann::ordered_json sidecar;
   sidecar["sample_rate_hz"] = trace.sample_rate;
   sidecar["label"] = trace.label ? nlohmann::ordered_json(*trace.label) : nlohmann::ordered_json(nullptr);
   sidecar["origin"] = trace.origin == TraceOrigin::Synthetic ? "synthetic" : "file";

   write_file_atomic(withSuffix(base, ".f32"), raw);
   write_file_atomic(withSuffix(base, ".json"), sidecar.dump(2) + "\n");
}

MagnitudeTrace read_trace(const fs::path &base)
{
   auto raw = read_file(withSuffix(base, ".f32"));

   if (raw.size() % 4 != 0)
      throw IoError(base.string() + ".f32: size is not a multiple of 4 bytes");

   nlohmann::json sidecar;

   try
   {
      sidecar = nlohmann::json::parse(read_file(withSuffix(base, ".json")));
   }
   catch (const nlohmann::json::exception &e)
   {
      throw IoError(base.string() + ".json: " + e.what());
   }

   MagnitudeTrace trace;

   try
   {
      trace.sample_rate = sidecar.at("sample_rate_hz").get<double>();

      if (sidecar.contains("label") && !sidecar["label"].is_null())
         trace.label = sidecar["label"].get<std::string>();

      auto origin = sidecar.value("origin", std::string("file"));

      if (origin == "synthetic")
         trace.origin = TraceOrigin::Synthetic;
      else if (origin == "file")
         trace.origin = TraceOrigin::File;
      else
         throw IoError(base.string() + ".json: unknown origin '" + origin + "'");
   }
   catch (const nlohmann::json::exception &e)
   {
      throw IoError(base.string() + ".json: " + e.what());
   }

   trace.samples.resize(raw.size() / 4);

   for (std::size_t i = 0; i < trace.samples.size(); i++)
   {
      std::uint32_t word;
      std::memcpy(&word, raw.data() + 4 * i, 4);
      trace.samples[i] = static_cast<double>(std::bit_cast<float>(toLittle(word)));
   }

   trace.validate();

   return trace;
}

}
