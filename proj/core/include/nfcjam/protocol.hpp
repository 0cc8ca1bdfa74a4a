#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nfcjam {

using Bytes = std::vector<std::uint8_t>;

/// One element per transmitted bit, each 0 or 1, in transmission order.
using Bits = std::vector<std::uint8_t>;

enum class Sender
{
   Reader,
   Card
};

enum class FrameKind
{
   Short,
   Standard
};

enum class CardKind
{
   Ultralight,
   Classic
};

std::string_view to_string(Sender sender);
std::string_view to_string(FrameKind kind);
std::string_view to_string(CardKind kind);

/// Command names used as Message descriptions.
namespace cmd {
inline constexpr std::string_view Wupa = "WUPA";
inline constexpr std::string_view Atqa = "ATQA";
inline constexpr std::string_view Read = "READ";
inline constexpr std::string_view ReadResult = "READ result";
inline constexpr std::string_view FastRead = "FAST READ";
inline constexpr std::string_view FastReadResult = "FAST READ result";
inline constexpr std::string_view Halt = "HALT";
inline constexpr std::string_view Select = "SELECT";
inline constexpr std::string_view UidBcc = "UID + BCC";
inline constexpr std::string_view SelectUid = "SELECT + UID";
inline constexpr std::string_view Sak = "SAK";
inline constexpr std::string_view Auth = "AUTH";
inline constexpr std::string_view TagNonce = "NT";
inline constexpr std::string_view ReaderAnswer = "NR + AR";
inline constexpr std::string_view TagAnswer = "AT";
}

/// Whether the command named `description` carries a CRC_A on air.
///
/// Commands that ISO/IEC 14443-3 sends without CRC: WUPA (short frame), ATQA,
/// the anticollision SELECT (NVB 0x20) and its UID + BCC answer, and the three
/// authentication exchanges (nonce and answers). Everything else in the
/// Ultralight and Classic flows, HALT included, is CRC-protected. Unknown
/// descriptions carry no CRC.
bool carries_crc(std::string_view description);

/// A single frame exchanged between reader and card.
///
/// `payload` excludes the CRC; `crc` tells whether CRC_A is appended on air.
/// Short frames hold exactly one byte of which the low 7 bits are sent.
struct Message
{
   Sender sender = Sender::Reader;
   Bytes payload;
   FrameKind kind = FrameKind::Standard;
   std::string description;
   bool crc = false;

   /// Throws StructuralError for an empty payload or a malformed short frame.
   void validate() const;

   bool operator==(const Message &) const = default;
};

/// Build a message whose frame kind and CRC flag follow the command table.
Message make_message(Sender sender, std::string_view description, Bytes payload);

struct Transcript
{
   std::vector<Message> messages;
   CardKind card_kind = CardKind::Ultralight;
   std::uint64_t session_seed = 0;

   bool operator==(const Transcript &) const = default;
};

/// Card contents: 4-byte pages (Ultralight) or 16-byte blocks (Classic).
struct CardMemory
{
   CardKind kind = CardKind::Ultralight;
   Bytes uid;
   std::vector<Bytes> pages;

   void validate() const;

   bool operator==(const CardMemory &) const = default;
};

/// CRC_A (ISO/IEC 14443-3): x^16 + x^12 + x^5 + 1, preset 0x6363, reflected.
std::uint16_t crc_a(std::span<const std::uint8_t> data);

/// CRC_A as transmitted, low byte first.
std::array<std::uint8_t, 2> crc_a_bytes(std::span<const std::uint8_t> data);

/// Block check character: XOR of the UID bytes.
std::uint8_t bcc(std::span<const std::uint8_t> uid);

/// Payload plus CRC when the message carries one.
Bytes on_air_bytes(const Message &msg);

/// Short frame: 7 data bits. Standard frame: per byte 8 data bits LSB first
/// followed by an odd parity bit, CRC_A bytes included when `msg.crc` is set.
Bits encode_frame(const Message &msg);

/// Inverse of encode_frame. Returns the payload without CRC.
///
/// Throws FramingError on a length inconsistent with `kind`, ParityError with
/// the failing byte index, CrcError when `expect_crc` is set and the check fails.
Bytes decode_frame(const Bits &bits, FrameKind kind, bool expect_crc = false);

/// 20 pages of incrementing bytes and a fixed 7-byte UID.
CardMemory default_ultralight_memory();

/// MIFARE Classic 1K layout: 64 blocks, block 0 carries UID + BCC.
CardMemory default_classic_memory();

/// WUPA, ATQA, READ 00h, READ result, FAST READ 00h..13h, FAST READ result, HALT.
Transcript ultralight_transcript(const CardMemory &mem);

/// The 13-step Classic flow up to reading block 0x07. Nonces, encrypted
/// answers and the encrypted block are opaque bytes drawn from `seed`.
Transcript classic_transcript(const CardMemory &mem, std::uint64_t seed);

/// Transcript as a JSON array of {sender, hex_payload, frame_kind, description};
/// hex_payload is the on-air byte string (CRC included).
nlohmann::ordered_json transcript_to_json(const Transcript &transcript);

Transcript transcript_from_json(const nlohmann::json &json);

/// Hex dump: optional `# uid <hex>` line, then one page or block per line.
std::string memory_to_hex(const CardMemory &mem);

CardMemory memory_from_hex(std::string_view text);

std::string to_hex(std::span<const std::uint8_t> bytes);

Bytes from_hex(std::string_view hex);

/// '0'/'1' text form of a bit sequence.
std::string bits_to_text(const Bits &bits);

Bits bits_from_text(std::string_view text);

}
