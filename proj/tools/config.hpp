#pragma once

#include <nfcjam/modem.hpp>
#include <nfcjam/pipeline.hpp>
#include <nfcjam/spectrum.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace nfcjam::cli {

/// Everything a command may tune. Built from defaults, then a config file, then flags.
struct Settings
{
   ModemConfig modem;
   AttackConfig attack;
   SessionLayout layout;
   ClassifierConfig classifier;
   std::uint64_t seed = 1;
};

/// Defaults, with NFCJAMLAB_SEED taking the place of the built-in seed when set.
Settings default_settings();

/// Overlay the keys present in `json` ({modem, attack, layout, classifier, seed}).
/// Unknown keys are rejected so typos do not silently fall back to defaults.
void apply_config(Settings &settings, const nlohmann::json &json);

Settings load_settings(const std::optional<std::filesystem::path> &config_file);

nlohmann::ordered_json settings_to_json(const Settings &settings);

}
