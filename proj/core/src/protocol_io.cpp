#include <nfcjam/error.hpp>
#include <nfcjam/protocol.hpp>

#include <cctype>
#include <sstream>

namespace nfcjam {

std::string to_hex(std::span<const std::uint8_t> bytes)
{
   static constexpr char digits[] = "0123456789ABCDEF";

   std::string out;
   out.reserve(bytes.size() * 2);

   for (auto b: bytes)
   {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0x0f]);
   }

   return out;
}

Bytes from_hex(std::string_view hex)
{
   auto nibble = [&](char c) -> int {
      if (c >= '0' && c <= '9')
         return c - '0';
      if (c >= 'a' && c <= 'f')
         return c - 'a' + 10;
      if (c >= 'A' && c <= 'F')
         return c - 'A' + 10;
      throw ParameterError("invalid hex digit '" + std::string(1, c) + "'");
   };

   if (hex.size() % 2 != 0)
      throw ParameterError("hex string has odd length");

   Bytes out(hex.size() / 2);

   for (std::size_t i = 0; i < out.size(); i++)
      out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));

   return out;
}

std::string bits_to_text(const Bits &bits)
{
   std::string out(bits.size(), '0');

   for (std::size_t i = 0; i < bits.size(); i++)
      out[i] = bits[i] ? '1' : '0';

   return out;
}

Bits bits_from_text(std::string_view text)
{
   Bits out;
   out.reserve(text.size());

   for (char c: text)
   {
      if (c == '0' || c == '1')
         out.push_back(static_cast<std::uint8_t>(c - '0'));
      else if (!std::isspace(static_cast<unsigned char>(c)))
         throw ParameterError("bit text may only contain '0' and '1'");
   }

   return out;
}

nlohmann::ordered_json transcript_to_json(const Transcript &transcript)
{
   auto array = nlohmann::ordered_json::array();

   for (const auto &msg: transcript.messages)
   {
      nlohmann::ordered_json entry;
      entry["sender"] = to_string(msg.sender);
      entry["hex_payload"] = to_hex(on_air_bytes(msg));
      entry["frame_kind"] = to_string(msg.kind);
      entry["description"] = msg.description;
      array.push_back(entry);
   }

   return array;
}

Transcript transcript_from_json(const nlohmann::json &json)
{
   if (!json.is_array())
      throw ParameterError("transcript JSON must be an array");

   Transcript t;
   t.card_kind = CardKind::Ultralight;

   try
   {
      for (const auto &entry: json)
      {
         Message msg;

         auto sender = entry.at("sender").get<std::string>();

         if (sender == "Reader")
            msg.sender = Sender::Reader;
         else if (sender == "Card")
            msg.sender = Sender::Card;
         else
            throw ParameterError("unknown sender '" + sender + "'");

         auto kind = entry.at("frame_kind").get<std::string>();

         if (kind == "Short")
            msg.kind = FrameKind::Short;
         else if (kind == "Standard")
            msg.kind = FrameKind::Standard;
         else
            throw ParameterError("unknown frame kind '" + kind + "'");

         msg.description = entry.at("description").get<std::string>();
         msg.crc = msg.kind == FrameKind::Standard && carries_crc(msg.description);
         msg.payload = from_hex(entry.at("hex_payload").get<std::string>());

         if (msg.crc)
         {
            if (msg.payload.size() < 3)
               throw ParameterError("'" + msg.description + "' payload too short for its CRC");

            std::span<const std::uint8_t> body(msg.payload.data(), msg.payload.size() - 2);
            auto crc = crc_a_bytes(body);

            if (crc[0] != msg.payload[msg.payload.size() - 2] || crc[1] != msg.payload.back())
               throw CrcError("'" + msg.description + "' has a bad CRC_A");

            msg.payload.resize(msg.payload.size() - 2);
         }

         if (msg.description == cmd::Auth)
            t.card_kind = CardKind::Classic;

         msg.validate();
         t.messages.push_back(std::move(msg));
      }
   }
   catch (const nlohmann::json::exception &e)
   {
      throw ParameterError(std::string("malformed transcript JSON: ") + e.what());
   }

   return t;
}

std::string memory_to_hex(const CardMemory &mem)
{
   std::ostringstream out;

   if (!mem.uid.empty())
      out << "# uid " << to_hex(mem.uid) << "\n";

   for (const auto &page: mem.pages)
      out << to_hex(page) << "\n";

   return out.str();
}

CardMemory memory_from_hex(std::string_view text)
{
   CardMemory mem;
   std::istringstream in{std::string(text)};
   std::string line;

   while (std::getline(in, line))
   {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
         line.pop_back();

      if (line.empty())
         continue;

      if (line[0] == '#')
      {
         if (line.rfind("# uid ", 0) == 0)
            mem.uid = from_hex(line.substr(6));

         continue;
      }

      mem.pages.push_back(from_hex(line));
   }

   if (mem.pages.empty())
      throw ParameterError("memory dump holds no pages");

   mem.kind = mem.pages.front().size() == 16 ? CardKind::Classic : CardKind::Ultralight;

   if (mem.uid.empty())
   {
      // fall back to the UID stored in the card's own manufacturer area
      if (mem.kind == CardKind::Classic)
         mem.uid.assign(mem.pages[0].begin(), mem.pages[0].begin() + 4);
      else if (mem.pages.size() >= 2)
         mem.uid = {mem.pages[0][0], mem.pages[0][1], mem.pages[0][2], mem.pages[1][0], mem.pages[1][1], mem.pages[1][2], mem.pages[1][3]};
   }

   mem.validate();

   return mem;
}

}
