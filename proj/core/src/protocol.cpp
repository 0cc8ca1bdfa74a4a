#include <nfcjam/error.hpp>
#include <nfcjam/protocol.hpp>

#include <algorithm>
#include <random>

namespace nfcjam {

std::string_view to_string(Sender sender)
{
   return sender == Sender::Reader ? "Reader" : "Card";
}

std::string_view to_string(FrameKind kind)
{
   return kind == FrameKind::Short ? "Short" : "Standard";
}

std::string_view to_string(CardKind kind)
{
   return kind == CardKind::Ultralight ? "Ultralight" : "Classic";
}

bool carries_crc(std::string_view description)
{
   static constexpr std::string_view withCrc[] = {
      cmd::Read, cmd::ReadResult, cmd::FastRead, cmd::FastReadResult, cmd::Halt,
      cmd::SelectUid, cmd::Sak, cmd::Auth,
   };

   return std::find(std::begin(withCrc), std::end(withCrc), description) != std::end(withCrc);
}

void Message::validate() const
{
   if (payload.empty())
      throw StructuralError("message '" + description + "' has an empty payload");

   if (kind == FrameKind::Short)
   {
      if (payload.size() != 1)
         throw StructuralError("short frame must carry exactly one byte");

      if (payload[0] & 0x80)
         throw StructuralError("short frame byte does not fit in 7 bits");

      if (crc)
         throw StructuralError("short frames carry no CRC");
   }
}

Message make_message(Sender sender, std::string_view description, Bytes payload)
{
   Message msg;
   msg.sender = sender;
   msg.payload = std::move(payload);
   msg.description = std::string(description);
   msg.kind = description == cmd::Wupa ? FrameKind::Short : FrameKind::Standard;
   msg.crc = carries_crc(description);
   return msg;
}

void CardMemory::validate() const
{
   std::size_t width = kind == CardKind::Ultralight ? 4 : 16;

   for (const auto &page: pages)
   {
      if (page.size() != width)
         throw ParameterError("card page of " + std::to_string(page.size()) + " bytes, expected " + std::to_string(width));
   }

   if (kind == CardKind::Ultralight)
   {
      if (pages.size() < 0x14)
         throw ParameterError("Ultralight memory needs at least 20 pages for FAST READ 00h..13h");

      if (uid.size() != 7 && uid.size() != 4)
         throw ParameterError("UID must be 4 or 7 bytes");
   }
   else
   {
      if (pages.size() < 8)
         throw ParameterError("Classic memory needs block 0x07");

      if (uid.size() != 4)
         throw ParameterError("Classic UID must be 4 bytes");
   }
}

std::uint16_t crc_a(std::span<const std::uint8_t> data)
{
   std::uint16_t crc = 0x6363;

   for (std::uint8_t b: data)
   {
      b ^= static_cast<std::uint8_t>(crc & 0xff);
      b ^= static_cast<std::uint8_t>(b << 4);
      crc = static_cast<std::uint16_t>((crc >> 8) ^ (b << 8) ^ (b << 3) ^ (b >> 4));
   }

   return crc;
}

std::array<std::uint8_t, 2> crc_a_bytes(std::span<const std::uint8_t> data)
{
   auto crc = crc_a(data);
   return {static_cast<std::uint8_t>(crc & 0xff), static_cast<std::uint8_t>(crc >> 8)};
}

std::uint8_t bcc(std::span<const std::uint8_t> uid)
{
   std::uint8_t v = 0;

   for (auto b: uid)
      v ^= b;

   return v;
}

Bytes on_air_bytes(const Message &msg)
{
   Bytes out = msg.payload;

   if (msg.crc)
   {
      auto c = crc_a_bytes(msg.payload);
      out.insert(out.end(), c.begin(), c.end());
   }

   return out;
}

Bits encode_frame(const Message &msg)
{
   msg.validate();

   Bits bits;

   if (msg.kind == FrameKind::Short)
   {
      for (int i = 0; i < 7; i++)
         bits.push_back((msg.payload[0] >> i) & 1);

      return bits;
   }

   auto data = on_air_bytes(msg);
   bits.reserve(data.size() * 9);

   for (auto byte: data)
   {
      int ones = 0;

      for (int i = 0; i < 8; i++)
      {
         std::uint8_t bit = (byte >> i) & 1;
         ones += bit;
         bits.push_back(bit);
      }

      // odd parity: total count of ones including the parity bit is odd
      bits.push_back(ones % 2 == 0 ? 1 : 0);
   }

   return bits;
}

Bytes decode_frame(const Bits &bits, FrameKind kind, bool expect_crc)
{
   if (kind == FrameKind::Short)
   {
      if (bits.size() != 7)
         throw FramingError("short frame must have 7 bits, got " + std::to_string(bits.size()));

      std::uint8_t v = 0;

      for (int i = 0; i < 7; i++)
         v |= static_cast<std::uint8_t>((bits[i] & 1) << i);

      return {v};
   }

   if (bits.empty() || bits.size() % 9 != 0)
      throw FramingError("standard frame length " + std::to_string(bits.size()) + " is not a multiple of 9");

   Bytes data;
   data.reserve(bits.size() / 9);

   for (std::size_t k = 0; k < bits.size() / 9; k++)
   {
      std::uint8_t v = 0;
      int ones = 0;

      for (int i = 0; i < 8; i++)
      {
         std::uint8_t bit = bits[9 * k + i] & 1;
         ones += bit;
         v |= static_cast<std::uint8_t>(bit << i);
      }

      if ((ones + (bits[9 * k + 8] & 1)) % 2 != 1)
         throw ParityError(k);

      data.push_back(v);
   }

   if (expect_crc)
   {
      if (data.size() < 3)
         throw FramingError("frame too short to hold a CRC");

      std::span<const std::uint8_t> body(data.data(), data.size() - 2);
      auto crc = crc_a_bytes(body);

      if (crc[0] != data[data.size() - 2] || crc[1] != data[data.size() - 1])
         throw CrcError("CRC_A mismatch");

      data.resize(data.size() - 2);
   }

   return data;
}

CardMemory default_ultralight_memory()
{
   CardMemory mem;
   mem.kind = CardKind::Ultralight;
   mem.uid = {0x04, 0x5a, 0x3c, 0x12, 0x9b, 0x6e, 0x80};

   for (int p = 0; p < 20; p++)
   {
      Bytes page(4);

      for (int j = 0; j < 4; j++)
         page[j] = static_cast<std::uint8_t>(4 * p + j);

      mem.pages.push_back(page);
   }

   return mem;
}

CardMemory default_classic_memory()
{
   CardMemory mem;
   mem.kind = CardKind::Classic;
   mem.uid = {0xde, 0xad, 0xbe, 0xef};

   for (int b = 0; b < 64; b++)
   {
      Bytes block(16);

      for (int j = 0; j < 16; j++)
         block[j] = static_cast<std::uint8_t>(16 * b + j);

      mem.pages.push_back(block);
   }

   // manufacturer block: UID, BCC, SAK, ATQA
   auto &block0 = mem.pages[0];
   std::copy(mem.uid.begin(), mem.uid.end(), block0.begin());
   block0[4] = bcc(mem.uid);
   block0[5] = 0x08;
   block0[6] = 0x04;
   block0[7] = 0x00;

   return mem;
}

Transcript ultralight_transcript(const CardMemory &mem)
{
   if (mem.kind != CardKind::Ultralight)
      throw ParameterError("Ultralight transcript needs Ultralight memory");

   mem.validate();

   auto pagesFrom = [&](std::size_t first, std::size_t last) {
      Bytes out;

      for (std::size_t p = first; p <= last; p++)
      {
         // READ wraps around the end of memory
         const auto &page = mem.pages[p % mem.pages.size()];
         out.insert(out.end(), page.begin(), page.end());
      }

      return out;
   };

   Transcript t;
   t.card_kind = CardKind::Ultralight;
   t.messages = {
      make_message(Sender::Reader, cmd::Wupa, {0x52}),
      make_message(Sender::Card, cmd::Atqa, {0x44, 0x00}),
      make_message(Sender::Reader, cmd::Read, {0x30, 0x00}),
      make_message(Sender::Card, cmd::ReadResult, pagesFrom(0, 3)),
      make_message(Sender::Reader, cmd::FastRead, {0x3a, 0x00, 0x13}),
      make_message(Sender::Card, cmd::FastReadResult, pagesFrom(0, 0x13)),
      make_message(Sender::Reader, cmd::Halt, {0x50, 0x00}),
   };

   return t;
}

Transcript classic_transcript(const CardMemory &mem, std::uint64_t seed)
{
   if (mem.kind != CardKind::Classic)
      throw ParameterError("Classic transcript needs Classic memory");

   mem.validate();

   std::mt19937_64 rng(seed);

   auto opaque = [&](std::size_t n) {
      Bytes out(n);

      for (auto &b: out)
         b = static_cast<std::uint8_t>(rng() >> 56);

      return out;
   };

   Bytes uidBcc = mem.uid;
   uidBcc.push_back(bcc(mem.uid));

   Bytes selectUid = {0x93, 0x70};
   selectUid.insert(selectUid.end(), uidBcc.begin(), uidBcc.end());

   auto nt = opaque(4);
   auto nrAr = opaque(8);
   auto at = opaque(4);

   // block 0x07 as seen on air: plaintext masked by an opaque session keystream
   Bytes block = mem.pages[7];
   auto keystream = opaque(16);

   for (std::size_t i = 0; i < block.size(); i++)
      block[i] ^= keystream[i];

   Transcript t;
   t.card_kind = CardKind::Classic;
   t.session_seed = seed;
   t.messages = {
      make_message(Sender::Reader, cmd::Wupa, {0x52}),
      make_message(Sender::Card, cmd::Atqa, {0x04, 0x00}),
      make_message(Sender::Reader, cmd::Select, {0x93, 0x20}),
      make_message(Sender::Card, cmd::UidBcc, uidBcc),
      make_message(Sender::Reader, cmd::SelectUid, selectUid),
      make_message(Sender::Card, cmd::Sak, {0x08}),
      make_message(Sender::Reader, cmd::Auth, {0x60, 0x07}),
      make_message(Sender::Card, cmd::TagNonce, nt),
      make_message(Sender::Reader, cmd::ReaderAnswer, nrAr),
      make_message(Sender::Card, cmd::TagAnswer, at),
      make_message(Sender::Reader, cmd::Read, {0x30, 0x07}),
      make_message(Sender::Card, cmd::ReadResult, block),
      make_message(Sender::Reader, cmd::Halt, {0x50, 0x00}),
   };

   return t;
}

}
