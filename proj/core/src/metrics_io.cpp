#include <nfcjam/error.hpp>
#include <nfcjam/metrics_io.hpp>

#include <cstdio>

namespace nfcjam {

namespace {

constexpr const char *SweepHeader = "param,reader_demod_rate,card_demod_rate,detection_rate,asr\n";

std::string row(double param, double reader, double card, double detection, double asr)
{
   char buf[160];
   std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g\n", param, reader, card, detection, asr);
   return buf;
}

Sender parse_sender(const std::string &s)
{
   if (s == "Reader")
      return Sender::Reader;
   if (s == "Card")
      return Sender::Card;
   throw ParameterError("unknown sender '" + s + "'");
}

}

nlohmann::ordered_json metrics_to_json(const SessionMetrics &m)
{
   nlohmann::ordered_json j;
   j["card_detection_rate"] = m.card_detection_rate;
   j["card_demodulation_rate"] = m.card_demodulation_rate;
   j["reader_demodulation_rate"] = m.reader_demodulation_rate;
   j["attack_success_rate"] = m.attack_success_rate;
   j["bypassed"] = m.bypassed();
   j["sessions"] = m.per_session_success.size();
   j["kept"] = m.kept;
   j["totals"] = {{"card_messages", m.totals.card_total},
                  {"card_detected", m.totals.card_detected},
                  {"card_demodulated", m.totals.card_demodulated},
                  {"reader_messages", m.totals.reader_total},
                  {"reader_demodulated", m.totals.reader_demodulated}};
   j["per_session_success"] = m.per_session_success;
   return j;
}

std::string metrics_to_csv(const SessionMetrics &m, double param)
{
   return SweepHeader + row(param, m.reader_demodulation_rate, m.card_demodulation_rate, m.card_detection_rate,
                            m.attack_success_rate);
}

std::string sweep_to_csv(const std::vector<SweepRow> &rows)
{
   std::string out = SweepHeader;

   for (const auto &r: rows)
      out += row(r.param, r.reader_demod_rate, r.card_demod_rate, r.detection_rate, r.asr);

   return out;
}

nlohmann::ordered_json recovered_to_json(const RecoveredTranscript &rec)
{
   nlohmann::ordered_json j;
   j["discarded"] = rec.discarded;
   j["discard_reason"] = rec.discard_reason;
   j["complete"] = rec.complete;

   auto messages = nlohmann::ordered_json::array();

   for (const auto &m: rec.messages)
   {
      nlohmann::ordered_json e;
      e["sender"] = m.sender ? std::string(to_string(*m.sender)) : std::string("Unknown");
      e["hex_payload"] = m.payload ? nlohmann::ordered_json(to_hex(*m.payload)) : nlohmann::ordered_json();
      e["failure"] = m.failure;
      e["begin"] = m.range.begin;
      e["end"] = m.range.end;
      messages.push_back(e);
   }

   j["messages"] = messages;
   return j;
}

RecoveredTranscript recovered_from_json(const nlohmann::json &j)
{
   RecoveredTranscript rec;

   try
   {
      rec.discarded = j.at("discarded").get<bool>();
      rec.discard_reason = j.at("discard_reason").get<std::string>();
      rec.complete = j.at("complete").get<bool>();

      for (const auto &e: j.at("messages"))
      {
         RecoveredMessage m;
         auto sender = e.at("sender").get<std::string>();

         if (sender != "Unknown")
            m.sender = parse_sender(sender);

         if (!e.at("hex_payload").is_null())
            m.payload = from_hex(e.at("hex_payload").get<std::string>());

         m.failure = e.at("failure").get<std::string>();
         m.range = {e.at("begin").get<std::size_t>(), e.at("end").get<std::size_t>()};

         if (m.range.end < m.range.begin)
            throw ParameterError("recovered message ends before it begins");

         rec.messages.push_back(std::move(m));
      }
   }
   catch (const nlohmann::json::exception &e)
   {
      throw ParameterError(std::string("malformed recovered transcript JSON: ") + e.what());
   }

   return rec;
}

nlohmann::ordered_json annotations_to_json(const std::vector<Annotation> &annotations)
{
   auto array = nlohmann::ordered_json::array();

   for (const auto &a: annotations)
   {
      nlohmann::ordered_json e;
      e["sender"] = to_string(a.sender);
      e["message_index"] = a.message_index;
      e["begin"] = a.range.begin;
      e["end"] = a.range.end;
      array.push_back(e);
   }

   return array;
}

std::vector<Annotation> annotations_from_json(const nlohmann::json &j)
{
   if (!j.is_array())
      throw ParameterError("annotations JSON must be an array");

   std::vector<Annotation> out;

   try
   {
      for (const auto &e: j)
      {
         Annotation a;
         a.sender = parse_sender(e.at("sender").get<std::string>());
         a.message_index = e.at("message_index").get<std::size_t>();
         a.range = {e.at("begin").get<std::size_t>(), e.at("end").get<std::size_t>()};
         out.push_back(a);
      }
   }
   catch (const nlohmann::json::exception &e)
   {
      throw ParameterError(std::string("malformed annotations JSON: ") + e.what());
   }

   return out;
}

}
