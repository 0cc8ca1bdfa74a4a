#include "config.hpp"

#include <nfcjam/error.hpp>
#include <nfcjam/trace_io.hpp>

#include <cstdlib>
#include <set>
#include <string>

namespace nfcjam::cli {

namespace {

void check_keys(const nlohmann::json &obj, const std::set<std::string> &known, const std::string &where)
{
   if (!obj.is_object())
      throw ParameterError("config section '" + where + "' must be an object");

   for (const auto &[key, value]: obj.items())
   {
      if (!known.contains(key))
         throw ParameterError("unknown config key '" + where + "." + key + "'");
   }
}

template <typename T>
void take(const nlohmann::json &obj, const char *key, T &field)
{
   if (obj.contains(key))
      field = obj.at(key).get<T>();
}

void apply_band(const nlohmann::json &obj, BandSpec &band)
{
   check_keys(obj, {"center_hz", "half_width_hz"}, "classifier.band");
   take(obj, "center_hz", band.center_hz);
   take(obj, "half_width_hz", band.half_width_hz);
}

std::uint64_t parse_seed(const std::string &text)
{
   std::size_t used = 0;
   unsigned long long v = 0;

   try
   {
      v = std::stoull(text, &used, 0);
   }
   catch (const std::exception &)
   {
      used = 0;
   }

   if (used == 0 || used != text.size())
      throw ParameterError("NFCJAMLAB_SEED is not an unsigned integer: '" + text + "'");

   return v;
}

}

Settings default_settings()
{
   Settings s;
   s.attack = AttackConfig::for_modem(s.modem);

   if (const char *env = std::getenv("NFCJAMLAB_SEED"); env && *env)
      s.seed = parse_seed(env);

   return s;
}

void apply_config(Settings &s, const nlohmann::json &json)
{
   check_keys(json, {"modem", "attack", "layout", "classifier", "seed"}, "config");

   try
   {
      if (json.contains("modem"))
      {
         const auto &m = json.at("modem");
         check_keys(m,
                    {"sample_rate", "bit_rate", "subcarrier_hz", "reader_high", "reader_pause", "card_mod_depth",
                     "guard_bits", "invert_bits", "sinusoidal_subcarrier", "card_pattern_margin",
                     "reader_dip_tolerance"},
                    "modem");
         take(m, "sample_rate", s.modem.sample_rate);
         take(m, "bit_rate", s.modem.bit_rate);
         take(m, "subcarrier_hz", s.modem.subcarrier_hz);
         take(m, "reader_high", s.modem.reader_high);
         take(m, "reader_pause", s.modem.reader_pause);
         take(m, "card_mod_depth", s.modem.card_mod_depth);
         take(m, "guard_bits", s.modem.guard_bits);
         take(m, "invert_bits", s.modem.invert_bits);
         take(m, "sinusoidal_subcarrier", s.modem.sinusoidal_subcarrier);
         take(m, "card_pattern_margin", s.modem.card_pattern_margin);
         take(m, "reader_dip_tolerance", s.modem.reader_dip_tolerance);

         // thresholds that follow the modem are re-derived before the attack section overrides them
         s.attack = AttackConfig::for_modem(s.modem);
      }

      if (json.contains("attack"))
      {
         const auto &a = json.at("attack");
         check_keys(a,
                    {"repetitions", "discard_amplitude_threshold", "std_diff_threshold", "ma_window",
                     "gradient_window", "gradient_threshold", "subcarrier_hz", "subcarrier_threshold",
                     "sender_thresholds", "averaging_n", "threads"},
                    "attack");
         take(a, "repetitions", s.attack.repetitions);
         take(a, "discard_amplitude_threshold", s.attack.discard_amplitude_threshold);
         take(a, "std_diff_threshold", s.attack.std_diff_threshold);
         take(a, "ma_window", s.attack.ma_window);
         take(a, "gradient_window", s.attack.gradient_window);
         take(a, "gradient_threshold", s.attack.gradient_threshold);
         take(a, "subcarrier_hz", s.attack.subcarrier_hz);
         take(a, "subcarrier_threshold", s.attack.subcarrier_threshold);
         take(a, "averaging_n", s.attack.averaging_n);
         take(a, "threads", s.attack.threads);

         if (a.contains("sender_thresholds"))
         {
            const auto &t = a.at("sender_thresholds");
            check_keys(t, {"low", "high"}, "attack.sender_thresholds");
            take(t, "low", s.attack.sender_thresholds.low);
            take(t, "high", s.attack.sender_thresholds.high);
         }
      }

      if (json.contains("layout"))
      {
         const auto &l = json.at("layout");
         check_keys(l, {"lead_in_bits", "settle_bits", "tail_bits", "jitter_samples", "frame_jitter_samples"},
                    "layout");
         take(l, "lead_in_bits", s.layout.lead_in_bits);
         take(l, "settle_bits", s.layout.settle_bits);
         take(l, "tail_bits", s.layout.tail_bits);
         take(l, "jitter_samples", s.layout.jitter_samples);
         take(l, "frame_jitter_samples", s.layout.frame_jitter_samples);
      }

      if (json.contains("classifier"))
      {
         const auto &c = json.at("classifier");
         check_keys(c,
                    {"segment_len", "histogram_bins", "flatness_threshold", "peak_threshold_db", "min_peaks",
                     "idle_threshold", "band"},
                    "classifier");
         take(c, "segment_len", s.classifier.segment_len);
         take(c, "histogram_bins", s.classifier.histogram_bins);
         take(c, "flatness_threshold", s.classifier.flatness_threshold);
         take(c, "peak_threshold_db", s.classifier.peak_threshold_db);
         take(c, "min_peaks", s.classifier.min_peaks);
         take(c, "idle_threshold", s.classifier.idle_threshold);

         if (c.contains("band"))
            apply_band(c.at("band"), s.classifier.band);
      }

      take(json, "seed", s.seed);
   }
   catch (const nlohmann::json::exception &e)
   {
      throw ParameterError(std::string("bad config value: ") + e.what());
   }
}

Settings load_settings(const std::optional<std::filesystem::path> &config_file)
{
   auto s = default_settings();

   if (config_file)
   {
      nlohmann::json json;

      try
      {
         json = nlohmann::json::parse(read_file(*config_file));
      }
      catch (const nlohmann::json::parse_error &e)
      {
         throw ParameterError(config_file->string() + ": " + e.what());
      }

      apply_config(s, json);
   }

   return s;
}

nlohmann::ordered_json settings_to_json(const Settings &s)
{
   nlohmann::ordered_json j;

   j["modem"] = {{"sample_rate", s.modem.sample_rate},
                 {"bit_rate", s.modem.bit_rate},
                 {"subcarrier_hz", s.modem.subcarrier_hz},
                 {"reader_high", s.modem.reader_high},
                 {"reader_pause", s.modem.reader_pause},
                 {"card_mod_depth", s.modem.card_mod_depth},
                 {"guard_bits", s.modem.guard_bits},
                 {"invert_bits", s.modem.invert_bits},
                 {"sinusoidal_subcarrier", s.modem.sinusoidal_subcarrier},
                 {"card_pattern_margin", s.modem.card_pattern_margin},
                 {"reader_dip_tolerance", s.modem.reader_dip_tolerance}};

   j["attack"] = {{"repetitions", s.attack.repetitions},
                  {"discard_amplitude_threshold", s.attack.discard_amplitude_threshold},
                  {"std_diff_threshold", s.attack.std_diff_threshold},
                  {"ma_window", s.attack.ma_window},
                  {"gradient_window", s.attack.gradient_window},
                  {"gradient_threshold", s.attack.gradient_threshold},
                  {"subcarrier_hz", s.attack.subcarrier_hz},
                  {"subcarrier_threshold", s.attack.subcarrier_threshold},
                  {"sender_thresholds",
                   {{"low", s.attack.sender_thresholds.low}, {"high", s.attack.sender_thresholds.high}}},
                  {"averaging_n", s.attack.averaging_n},
                  {"threads", s.attack.threads}};

   j["layout"] = {{"lead_in_bits", s.layout.lead_in_bits},
                  {"settle_bits", s.layout.settle_bits},
                  {"tail_bits", s.layout.tail_bits},
                  {"jitter_samples", s.layout.jitter_samples},
                  {"frame_jitter_samples", s.layout.frame_jitter_samples}};

   j["classifier"] = {{"segment_len", s.classifier.segment_len},
                      {"histogram_bins", s.classifier.histogram_bins},
                      {"flatness_threshold", s.classifier.flatness_threshold},
                      {"peak_threshold_db", s.classifier.peak_threshold_db},
                      {"min_peaks", s.classifier.min_peaks},
                      {"idle_threshold", s.classifier.idle_threshold},
                      {"band",
                       {{"center_hz", s.classifier.band.center_hz},
                        {"half_width_hz", s.classifier.band.half_width_hz}}}};

   j["seed"] = s.seed;

   return j;
}

}
