#include <cstdlib>

#include "neurotrail/bytes.hpp"
#include "neurotrail/protocol.hpp"

namespace neurotrail::protocol {

namespace {

bool valid_utf8(const uint8_t* p, size_t n) {
    size_t i = 0;
    while (i < n) {
        const uint8_t c = p[i];
        size_t len;
        uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (size_t k = 1; k < len; ++k) {
            if ((p[i + k] & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (p[i + k] & 0x3F);
        }
        // Overlong forms, surrogates and values past U+10FFFF.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
        if ((cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) return false;
        i += len;
    }
    return true;
}

DecodeResult fail(DecodeStatus s) { return {s, std::nullopt, 0}; }

}  // namespace

const char* status_name(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::Ok: return "ok";
        case DecodeStatus::NeedMore: return "incomplete message";
        case DecodeStatus::BadMagic: return "bad magic";
        case DecodeStatus::BadVersion: return "unsupported protocol version";
        case DecodeStatus::UnknownType: return "unknown message type";
        case DecodeStatus::PayloadTooLarge: return "payload too large";
        case DecodeStatus::Truncated: return "truncated payload";
        case DecodeStatus::LengthMismatch: return "payload length mismatch";
        case DecodeStatus::CountMismatch: return "element count mismatch";
        case DecodeStatus::BadUtf8: return "error text is not UTF-8";
    }
    return "?";
}

MessageType type_of(const Message& m) {
    switch (m.index()) {
        case 0: return MessageType::Hello;
        case 1: return MessageType::Spikes;
        case 2: return MessageType::Histogram;
        case 3: return MessageType::Reset;
        default: return MessageType::Error;
    }
}

void encode_into(const Message& m, std::vector<uint8_t>& out) {
    ByteWriter w;
    auto& buf = w.data();
    buf.swap(out);
    const size_t start = buf.size();
    w.u8(kMagic0);
    w.u8(kMagic1);
    w.u8(kVersion);
    w.u8(static_cast<uint8_t>(type_of(m)));
    w.u32(0);
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Hello>) {
                w.u16(v.width);
                w.u16(v.height);
                w.u16(v.features);
                w.u16(v.classes);
            } else if constexpr (std::is_same_v<T, Spikes>) {
                w.u32(v.tick);
                w.u32(static_cast<uint32_t>(v.events.size()));
                for (const auto& e : v.events) {
                    w.u16(e.x);
                    w.u16(e.y);
                    w.u16(e.f);
                }
            } else if constexpr (std::is_same_v<T, ClassHistogram>) {
                w.u32(v.tick);
                w.u32(static_cast<uint32_t>(v.counts.size()));
                for (uint32_t c : v.counts) w.u32(c);
            } else if constexpr (std::is_same_v<T, ErrorMessage>) {
                w.u16(v.code);
                w.chars(v.text);
            }
        },
        m);
    const size_t payload = buf.size() - start - kHeaderSize;
    if (payload > kMaxPayload) {
        buf.resize(start);
        buf.swap(out);
        throw ValidationError("message payload of " + std::to_string(payload) + " bytes exceeds the protocol limit");
    }
    for (int i = 0; i < 4; ++i) buf[start + 4 + i] = static_cast<uint8_t>(payload >> (8 * i));
    buf.swap(out);
}

std::vector<uint8_t> encode(const Message& m) {
    std::vector<uint8_t> out;
    encode_into(m, out);
    return out;
}

DecodeResult decode_prefix(std::span<const uint8_t> b) {
    // Header checks run on as many bytes as are available so garbage is
    // rejected without waiting for a full header.
    if (b.size() >= 1 && b[0] != kMagic0) return fail(DecodeStatus::BadMagic);
    if (b.size() >= 2 && b[1] != kMagic1) return fail(DecodeStatus::BadMagic);
    if (b.size() >= 3 && b[2] != kVersion) return fail(DecodeStatus::BadVersion);
    if (b.size() >= 4) {
        const uint8_t t = b[3];
        if (t != 0x00 && t != 0x01 && t != 0x02 && t != 0x03 && t != 0x7F) return fail(DecodeStatus::UnknownType);
    }
    if (b.size() < kHeaderSize) return fail(DecodeStatus::NeedMore);
    const uint32_t len = static_cast<uint32_t>(b[4]) | (static_cast<uint32_t>(b[5]) << 8) |
                         (static_cast<uint32_t>(b[6]) << 16) | (static_cast<uint32_t>(b[7]) << 24);
    if (len > kMaxPayload) return fail(DecodeStatus::PayloadTooLarge);
    const auto type = static_cast<MessageType>(b[3]);
    // Fixed-size payloads can be judged from the header alone.
    if ((type == MessageType::Hello && len != 8) || (type == MessageType::Reset && len != 0) ||
        ((type == MessageType::Spikes || type == MessageType::Histogram) && len < 8) ||
        (type == MessageType::Error && len < 2))
        return fail(DecodeStatus::LengthMismatch);
    if (b.size() < kHeaderSize + len) return fail(DecodeStatus::NeedMore);

    ByteReader r(b.subspan(kHeaderSize, len));
    DecodeResult res{DecodeStatus::Ok, std::nullopt, kHeaderSize + len};
    switch (type) {
        case MessageType::Hello: {
            Hello h;
            h.width = r.u16();
            h.height = r.u16();
            h.features = r.u16();
            h.classes = r.u16();
            res.message = h;
            break;
        }
        case MessageType::Spikes: {
            Spikes s;
            s.tick = r.u32();
            const uint32_t count = r.u32();
            if (static_cast<uint64_t>(count) * 6 != r.remaining()) return fail(DecodeStatus::CountMismatch);
            s.events.resize(count);
            for (auto& e : s.events) {
                e.x = r.u16();
                e.y = r.u16();
                e.f = r.u16();
            }
            res.message = std::move(s);
            break;
        }
        case MessageType::Histogram: {
            ClassHistogram h;
            h.tick = r.u32();
            const uint32_t count = r.u32();
            if (static_cast<uint64_t>(count) * 4 != r.remaining()) return fail(DecodeStatus::CountMismatch);
            h.counts.resize(count);
            for (auto& c : h.counts) c = r.u32();
            res.message = std::move(h);
            break;
        }
        case MessageType::Reset:
            res.message = Reset{};
            break;
        case MessageType::Error: {
            ErrorMessage e;
            e.code = r.u16();
            const auto text = r.bytes(r.remaining());
            if (!valid_utf8(text.data(), text.size())) return fail(DecodeStatus::BadUtf8);
            e.text.assign(text.begin(), text.end());
            res.message = std::move(e);
            break;
        }
    }
    return res;
}

Message decode_message(std::span<const uint8_t> bytes) {
    DecodeResult r = decode_prefix(bytes);
    if (r.status == DecodeStatus::NeedMore) throw DecodeError(DecodeStatus::Truncated);
    if (r.status != DecodeStatus::Ok) throw DecodeError(r.status);
    if (r.consumed != bytes.size())
        throw DecodeError(DecodeStatus::LengthMismatch,
                          std::to_string(bytes.size() - r.consumed) + " bytes after the declared payload");
    return std::move(*r.message);
}

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw ParseError("endpoint '" + text + "' is not host:port");
    Endpoint e;
    if (colon > 0) e.host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    char* end = nullptr;
    const long v = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || v < 0 || v > 65535) throw ParseError("bad port in endpoint '" + text + "'");
    e.port = static_cast<uint16_t>(v);
    return e;
}

Endpoint default_endpoint() {
    const char* env = std::getenv("NEUROTRAIL_ADDR");
    return env && *env ? parse_endpoint(env) : Endpoint{};
}

}  // namespace neurotrail::protocol
