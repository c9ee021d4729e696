#pragma once

// Binary spike protocol between the vision client and the chip server.
//
// Every message is an 8-byte header followed by the payload:
//   byte 0-1  'T' 'N'
//   byte 2    version (1)
//   byte 3    type
//   byte 4-7  payload length, u32 little-endian
//
// Payloads (all integers little-endian):
//   HELLO     0x00  width u16, height u16, features u16, classes u16
//   SPIKES    0x01  tick u32, count u32, count x (x u16, y u16, f u16)
//   HISTOGRAM 0x02  tick u32, classes u32, classes x count u32
//   RESET     0x03  empty
//   ERROR     0x7F  code u16, UTF-8 text

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "neurotrail/error.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::protocol {

inline constexpr uint8_t kMagic0 = 'T';
inline constexpr uint8_t kMagic1 = 'N';
inline constexpr uint8_t kVersion = 1;
inline constexpr size_t kHeaderSize = 8;
inline constexpr uint32_t kMaxPayload = 16u << 20;

enum class MessageType : uint8_t { Hello = 0x00, Spikes = 0x01, Histogram = 0x02, Reset = 0x03, Error = 0x7F };

enum class ErrorCode : uint16_t {
    Malformed = 1,
    ShapeMismatch = 2,
    Busy = 3,
    OutOfRange = 4,
    Unexpected = 5,
};

struct Hello {
    uint16_t width = 0;
    uint16_t height = 0;
    uint16_t features = 0;
    uint16_t classes = 0;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct Spikes {
    uint32_t tick = 0;
    std::vector<SpikeEvent> events;
    friend bool operator==(const Spikes&, const Spikes&) = default;
};

struct Reset {
    friend bool operator==(const Reset&, const Reset&) = default;
};

struct ErrorMessage {
    uint16_t code = 0;
    std::string text;
    friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

using Message = std::variant<Hello, Spikes, ClassHistogram, Reset, ErrorMessage>;

MessageType type_of(const Message& m);

std::vector<uint8_t> encode(const Message& m);
void encode_into(const Message& m, std::vector<uint8_t>& out);

enum class DecodeStatus : uint8_t {
    Ok,
    NeedMore,         // stream prefix of a valid message
    BadMagic,
    BadVersion,
    UnknownType,
    PayloadTooLarge,
    Truncated,        // buffer ends before the declared payload
    LengthMismatch,   // payload length wrong for a fixed-size message
    CountMismatch,    // element count disagrees with payload length
    BadUtf8,
};

const char* status_name(DecodeStatus s);

struct DecodeResult {
    DecodeStatus status = DecodeStatus::NeedMore;
    std::optional<Message> message;
    size_t consumed = 0;  // bytes of one complete message when status is Ok
};

// Decodes the message at the front of a byte stream. Incomplete input gives
// NeedMore; any malformed header or payload gives its specific status.
DecodeResult decode_prefix(std::span<const uint8_t> bytes);

class DecodeError : public Error {
public:
    explicit DecodeError(DecodeStatus s, const std::string& what = {})
        : Error(s == DecodeStatus::BadVersion ? "unsupported-version" : "protocol",
                what.empty() ? status_name(s) : what),
          status_(s) {}
    DecodeStatus status() const { return status_; }

private:
    DecodeStatus status_;
};

// Decodes exactly one message occupying all of `bytes`. Short input is
// Truncated; extra bytes are a LengthMismatch.
Message decode_message(std::span<const uint8_t> bytes);

// The peer sent an ERROR message.
class RemoteError : public Error {
public:
    RemoteError(uint16_t code, const std::string& text)
        : Error("remote", "server error " + std::to_string(code) + ": " + text), code_(code) {}
    uint16_t code() const { return code_; }

private:
    uint16_t code_;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    uint16_t port = 9040;
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

// "host:port" or ":port"; throws ParseError.
Endpoint parse_endpoint(const std::string& text);
// NEUROTRAIL_ADDR when set, else 127.0.0.1:9040.
Endpoint default_endpoint();

}  // namespace neurotrail::protocol
