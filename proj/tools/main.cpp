// nfcjam: simulate reader/card sessions under blocking-card noise, attack them,
// sweep countermeasures and classify blocking cards from recordings.

#include "config.hpp"

#include <nfcjam/error.hpp>
#include <nfcjam/jammer.hpp>
#include <nfcjam/metrics_io.hpp>
#include <nfcjam/pipeline.hpp>
#include <nfcjam/protocol.hpp>
#include <nfcjam/spectrum.hpp>
#include <nfcjam/trace_io.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef NFCJAM_VERSION
#define NFCJAM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace nfcjam;
using nfcjam::cli::Settings;

namespace {

enum Exit
{
   Ok = 0,
   Usage = 2,
   Io = 3,
   NoData = 4
};

struct Common
{
   std::optional<fs::path> config;
   std::optional<std::uint64_t> seed;
   std::optional<std::size_t> threads;
};

std::string session_name(std::size_t i)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "session_%04zu", i);
   return buf;
}

std::string recovered_name(std::size_t i)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "recovered_%04zu.json", i);
   return buf;
}

std::string dump(const nlohmann::ordered_json &j)
{
   return j.dump(2) + "\n";
}

void make_dir(const fs::path &dir)
{
   std::error_code ec;
   fs::create_directories(dir, ec);

   if (ec)
      throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Settings settings_for(const Common &common)
{
   auto s = cli::load_settings(common.config);

   if (common.seed)
      s.seed = *common.seed;

   if (common.threads)
      s.attack.threads = *common.threads;

   return s;
}

void write_manifest(const fs::path &dir, const std::string &command, const Settings &s,
                    nlohmann::ordered_json extra, const nlohmann::ordered_json &inputs,
                    std::vector<std::string> outputs)
{
   std::sort(outputs.begin(), outputs.end());

   nlohmann::ordered_json m;
   m["tool"] = "nfcjam";
   m["version"] = NFCJAM_VERSION;
   m["command"] = command;
   m["config"] = cli::settings_to_json(s);

   for (auto &[k, v]: extra.items())
      m["config"][k] = v;

   m["inputs"] = inputs;
   m["outputs"] = outputs;

   write_file_atomic(dir / "manifest.json", dump(m));
}

nlohmann::json read_json(const fs::path &path)
{
   auto text = read_file(path);

   try
   {
      return nlohmann::json::parse(text);
   }
   catch (const nlohmann::json::parse_error &e)
   {
      throw ParameterError(path.string() + ": " + e.what());
   }
}

CardMemory card_memory(const std::string &card, const std::optional<fs::path> &memory_file)
{
   if (memory_file)
      return memory_from_hex(read_file(*memory_file));

   if (card == "classic")
      return default_classic_memory();

   return default_ultralight_memory();
}

std::optional<CardKind> parse_card(const std::string &card)
{
   if (card.empty())
      return {};
   if (card == "ultralight")
      return CardKind::Ultralight;
   if (card == "classic")
      return CardKind::Classic;
   throw ParameterError("unknown card '" + card + "'");
}

/// Trace bases `dir/session_NNNN` in index order.
std::vector<fs::path> session_bases(const fs::path &dir)
{
   if (!fs::is_directory(dir))
      throw IoError(dir.string() + " is not a directory");

   std::vector<fs::path> out;

   for (const auto &entry: fs::directory_iterator(dir))
   {
      auto name = entry.path().filename().string();

      if (name.rfind("session_", 0) == 0 && entry.path().extension() == ".f32")
         out.push_back(dir / entry.path().stem());
   }

   std::sort(out.begin(), out.end());
   return out;
}

struct Truth
{
   std::vector<Transcript> transcripts;
   std::vector<std::vector<Annotation>> annotations;
};

/// Ground truth next to simulated traces; empty when any session lacks it.
Truth read_truth(const std::vector<fs::path> &bases)
{
   Truth t;

   for (const auto &base: bases)
   {
      fs::path tp = base.string() + ".transcript.json";
      fs::path ap = base.string() + ".annotations.json";

      if (!fs::exists(tp) || !fs::exists(ap))
         return {};

      t.transcripts.push_back(transcript_from_json(read_json(tp)));
      t.annotations.push_back(annotations_from_json(read_json(ap)));
   }

   return t;
}

SessionMetrics score(const Truth &truth, std::vector<RecoveredTranscript> &recovered)
{
   std::vector<SessionCounts> counts;
   std::size_t kept = 0;

   for (std::size_t i = 0; i < recovered.size(); i++)
   {
      counts.push_back(evaluate_session(truth.transcripts[i], truth.annotations[i], recovered[i]));
      kept += !recovered[i].discarded;
   }

   return aggregate_metrics(counts, kept);
}

void add_common(CLI::App *cmd, Common &common)
{
   cmd->add_option("--config", common.config, "JSON config file; flags override it");
   cmd->add_option("--seed", common.seed, "run seed (default: config, then NFCJAMLAB_SEED, then 1)");
   cmd->add_option("--threads", common.threads, "worker threads, 0 = all cores");
}

struct SimulateArgs
{
   Common common;
   std::string card = "ultralight";
   std::optional<fs::path> memory;
   std::optional<fs::path> profile;
   std::optional<std::size_t> reps;
   fs::path out;
};

int simulate(const SimulateArgs &a)
{
   auto s = settings_for(a.common);

   if (a.reps)
      s.attack.repetitions = *a.reps;

   s.attack.validate();
   s.modem.validate();

   NoiseProfile profile;

   if (a.profile)
      profile = profile_from_json(read_json(*a.profile));

   profile.validate();

   auto memory = card_memory(a.card, a.memory);
   auto source = source_for(memory);
   auto jseed = jammer_seed(s.seed);

   make_dir(a.out);

   std::vector<std::string> outputs;

   for (std::size_t i = 0; i < s.attack.repetitions; i++)
   {
      auto name = session_name(i);
      auto ss = session_seed(s.seed, i);
      auto transcript = source(i, ss);
      auto sim = simulate_session(transcript, profile, s.modem, ss, s.layout, jseed);

      sim.trace.label = std::string(to_string(transcript.card_kind));
      write_trace(a.out / name, sim.trace);
      write_file_atomic(a.out / (name + ".transcript.json"), dump(transcript_to_json(transcript)));
      write_file_atomic(a.out / (name + ".annotations.json"), dump(annotations_to_json(sim.annotations)));

      for (const char *suffix: {".f32", ".json", ".transcript.json", ".annotations.json"})
         outputs.push_back(name + suffix);
   }

   nlohmann::ordered_json extra;
   extra["card"] = to_string(memory.kind);
   extra["memory"] = memory_to_hex(memory);
   extra["profile"] = profile_to_json(profile);

   nlohmann::ordered_json inputs = nlohmann::ordered_json::object();

   if (a.profile)
      inputs["profile"] = a.profile->string();
   if (a.memory)
      inputs["memory"] = a.memory->string();

   write_manifest(a.out, "simulate", s, extra, inputs, outputs);
   return Ok;
}

struct AttackArgs
{
   Common common;
   fs::path in;
   fs::path out;
   std::optional<std::size_t> average;
   std::string card;
};

int attack(const AttackArgs &a)
{
   auto s = settings_for(a.common);

   if (a.average)
      s.attack.averaging_n = *a.average;

   s.attack.validate();

   auto bases = session_bases(a.in);

   if (bases.empty())
      throw FieldNotFound("no session traces in " + a.in.string());

   auto truth = read_truth(bases);
   auto kind = parse_card(a.card);

   if (!kind)
   {
      if (truth.transcripts.empty())
         throw ParameterError("no ground truth in " + a.in.string() + "; pass --card");

      kind = truth.transcripts.front().card_kind;
   }

   if (*kind == CardKind::Classic && s.attack.averaging_n > 1)
      throw ParameterError("--average needs identical sessions; Classic sessions differ every time");

   std::vector<MagnitudeTrace> traces;

   for (const auto &base: bases)
      traces.push_back(read_trace(base));

   auto recovered = attack_batch(traces, *kind, s.attack, s.modem);

   make_dir(a.out);

   std::vector<std::string> outputs;

   if (!truth.transcripts.empty())
   {
      auto metrics = score(truth, recovered);
      write_file_atomic(a.out / "metrics.json", dump(metrics_to_json(metrics)));
      write_file_atomic(a.out / "metrics.csv", metrics_to_csv(metrics, static_cast<double>(s.attack.averaging_n)));
      outputs.push_back("metrics.json");
      outputs.push_back("metrics.csv");
   }
   else
   {
      std::cerr << "nfcjam: no ground truth next to the traces; writing recovered transcripts only\n";
   }

   for (std::size_t i = 0; i < recovered.size(); i++)
   {
      write_file_atomic(a.out / recovered_name(i), dump(recovered_to_json(recovered[i])));
      outputs.push_back(recovered_name(i));
   }

   nlohmann::ordered_json extra;
   extra["card"] = to_string(*kind);

   write_manifest(a.out, "attack", s, extra, {{"traces", a.in.string()}}, outputs);

   bool noField = std::all_of(recovered.begin(), recovered.end(),
                              [](const auto &r) { return r.discarded && r.discard_reason == "no field activation"; });

   if (noField)
   {
      std::cerr << "nfcjam: no trace shows a reader field\n";
      return NoData;
   }

   return Ok;
}

struct MetricsArgs
{
   Common common;
   fs::path recovered;
   fs::path truth;
   fs::path out;
};

int metrics(const MetricsArgs &a)
{
   auto s = settings_for(a.common);
   auto bases = session_bases(a.truth);

   if (bases.empty())
      throw FieldNotFound("no session traces in " + a.truth.string());

   auto truth = read_truth(bases);

   if (truth.transcripts.empty())
      throw IoError("ground truth missing in " + a.truth.string());

   std::vector<RecoveredTranscript> recovered;

   for (std::size_t i = 0; i < bases.size(); i++)
      recovered.push_back(recovered_from_json(read_json(a.recovered / recovered_name(i))));

   auto m = score(truth, recovered);

   make_dir(a.out);
   write_file_atomic(a.out / "metrics.json", dump(metrics_to_json(m)));
   write_file_atomic(a.out / "metrics.csv", metrics_to_csv(m));

   write_manifest(a.out, "metrics", s, nlohmann::ordered_json::object(),
                  {{"recovered", a.recovered.string()}, {"truth", a.truth.string()}}, {"metrics.csv", "metrics.json"});
   return Ok;
}

struct CountermeasureArgs
{
   Common common;
   std::string family;
   std::vector<double> params;
   std::string card = "ultralight";
   std::optional<fs::path> memory;
   std::size_t seeds = 20;
   std::optional<std::size_t> reps;
   fs::path out;
};

int countermeasure(const CountermeasureArgs &a)
{
   SweepFamily family;

   if (a.family == "gaussian")
      family = SweepFamily::GaussianFactors;
   else if (a.family == "multitone")
      family = SweepFamily::ToneSpacings;
   else
      throw ParameterError("unknown family '" + a.family + "' (gaussian or multitone)");

   auto s = settings_for(a.common);

   if (a.reps)
      s.attack.repetitions = *a.reps;

   if (a.seeds == 0)
      throw ParameterError("--seeds must be at least 1");

   auto values = a.params.empty() ? default_sweep_values(family) : a.params;
   auto memory = card_memory(a.card, a.memory);

   std::vector<std::uint64_t> seeds;

   for (std::size_t i = 0; i < a.seeds; i++)
      seeds.push_back(s.seed + i);

   auto rows = countermeasure_sweep(source_for(memory), memory.kind, family, values, s.attack, s.modem, seeds);

   make_dir(a.out);
   write_file_atomic(a.out / "sweep.csv", sweep_to_csv(rows));

   nlohmann::ordered_json extra;
   extra["card"] = to_string(memory.kind);
   extra["memory"] = memory_to_hex(memory);
   extra["family"] = a.family;
   extra["params"] = values;
   extra["seeds"] = seeds;

   nlohmann::ordered_json inputs = nlohmann::ordered_json::object();

   if (a.memory)
      inputs["memory"] = a.memory->string();

   write_manifest(a.out, "countermeasure", s, extra, inputs, {"sweep.csv"});
   return Ok;
}

struct ClassifyArgs
{
   Common common;
   fs::path with_field;
   fs::path without_field;
   fs::path out;
};

fs::path trace_base(fs::path p)
{
   if (p.extension() == ".f32" || p.extension() == ".json")
      p.replace_extension();

   return p;
}

int classify(const ClassifyArgs &a)
{
   auto s = settings_for(a.common);

   auto with = read_trace(trace_base(a.with_field));
   auto without = read_trace(trace_base(a.without_field));
   auto report = classify_blocking_card(with, without, s.classifier);

   make_dir(a.out);
   write_file_atomic(a.out / "report.json", dump(report_to_json(report)));
   write_file_atomic(a.out / "psd.csv", psd_to_csv(report.psd));
   write_file_atomic(a.out / "pdf.csv", histogram_to_csv(report.amplitude_histogram));

   write_manifest(a.out, "classify", s, nlohmann::ordered_json::object(),
                  {{"with_field", a.with_field.string()}, {"without_field", a.without_field.string()}},
                  {"pdf.csv", "psd.csv", "report.json"});

   std::cout << to_string(report.label) << "\n";
   return Ok;
}

}

int main(int argc, char **argv)
{
   CLI::App app {"Blocking-card attack and countermeasure lab for ISO 14443A sessions", "nfcjam"};
   app.require_subcommand(1);
   app.set_version_flag("--version", NFCJAM_VERSION);

   SimulateArgs sim;
   auto *simCmd = app.add_subcommand("simulate", "write simulated session traces with ground truth");
   add_common(simCmd, sim.common);
   simCmd->add_option("--card", sim.card, "card kind")->check(CLI::IsMember({"ultralight", "classic"}));
   simCmd->add_option("--memory", sim.memory, "card memory dump (hex pages)");
   simCmd->add_option("--profile", sim.profile, "noise profile JSON (default: no noise)");
   simCmd->add_option("--reps", sim.reps, "sessions to simulate");
   simCmd->add_option("--out", sim.out, "output directory")->required();

   AttackArgs att;
   auto *attCmd = app.add_subcommand("attack", "recover transcripts from a directory of traces");
   add_common(attCmd, att.common);
   attCmd->add_option("--in", att.in, "trace directory")->required();
   attCmd->add_option("--out", att.out, "output directory")->required();
   attCmd->add_option("--average", att.average, "average this many kept traces (Ultralight only)")
      ->check(CLI::IsMember({1, 2, 4, 8, 16, 32}));
   attCmd->add_option("--card", att.card, "card kind when the traces carry no ground truth")
      ->check(CLI::IsMember({"ultralight", "classic"}));

   MetricsArgs met;
   auto *metCmd = app.add_subcommand("metrics", "recompute metrics from recovered transcripts");
   add_common(metCmd, met.common);
   metCmd->add_option("--recovered", met.recovered, "attack output directory")->required();
   metCmd->add_option("--truth", met.truth, "simulate output directory")->required();
   metCmd->add_option("--out", met.out, "output directory")->required();

   CountermeasureArgs cm;
   auto *cmCmd = app.add_subcommand("countermeasure", "sweep a noise family and report attack rates");
   add_common(cmCmd, cm.common);
   cmCmd->add_option("--family", cm.family, "gaussian or multitone")->required();
   cmCmd->add_option("--params", cm.params, "factors or tone spacings in Hz (default: the standard list)");
   cmCmd->add_option("--card", cm.card, "card kind")->check(CLI::IsMember({"ultralight", "classic"}));
   cmCmd->add_option("--memory", cm.memory, "card memory dump (hex pages)");
   cmCmd->add_option("--seeds", cm.seeds, "seeds per parameter, counted up from --seed");
   cmCmd->add_option("--reps", cm.reps, "sessions per seed");
   cmCmd->add_option("--out", cm.out, "output directory")->required();

   ClassifyArgs cls;
   auto *clsCmd = app.add_subcommand("classify", "classify a blocking card from two recordings");
   add_common(clsCmd, cls.common);
   clsCmd->add_option("--with", cls.with_field, "recording with the reader field on")->required();
   clsCmd->add_option("--without", cls.without_field, "recording with the field off")->required();
   clsCmd->add_option("--out", cls.out, "output directory")->required();

   try
   {
      app.parse(argc, argv);
   }
   catch (const CLI::ParseError &e)
   {
      int code = app.exit(e);
      return code == 0 ? Ok : Usage;
   }

   try
   {
      if (*simCmd)
         return simulate(sim);
      if (*attCmd)
         return attack(att);
      if (*metCmd)
         return metrics(met);
      if (*cmCmd)
         return countermeasure(cm);
      if (*clsCmd)
         return classify(cls);
   }
   catch (const FieldNotFound &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return NoData;
   }
   catch (const SegmentationEmpty &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return NoData;
   }
   catch (const IoError &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return Io;
   }
   catch (const fs::filesystem_error &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return Io;
   }
   catch (const Error &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return Usage;
   }
   catch (const nlohmann::json::exception &e)
   {
      std::cerr << "nfcjam: " << e.what() << "\n";
      return Usage;
   }

   return Usage;
}
