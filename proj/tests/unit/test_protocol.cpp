#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <random>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/net.hpp"
#include "neurotrail/protocol.hpp"

using namespace neurotrail;
using namespace neurotrail::protocol;

namespace {

Message random_message(std::mt19937_64& rng) {
    auto u16 = [&] { return static_cast<uint16_t>(rng()); };
    switch (rng() % 5) {
        case 0: return Hello{u16(), u16(), u16(), u16()};
        case 1: {
            Spikes s{static_cast<uint32_t>(rng()), {}};
            s.events.resize(rng() % 50);
            for (auto& e : s.events) e = {u16(), u16(), u16()};
            return s;
        }
        case 2: {
            ClassHistogram h{static_cast<uint32_t>(rng()), {}};
            h.counts.resize(rng() % 6);
            for (auto& c : h.counts) c = static_cast<uint32_t>(rng());
            return h;
        }
        case 3: return Reset{};
        default: {
            static const char* texts[] = {"", "busy", "caf\xc3\xa9", "\xe2\x82\xac 5", "\xf0\x9f\x9a\x97 trail"};
            return ErrorMessage{u16(), texts[rng() % 5]};
        }
    }
}

DecodeStatus status_of(std::span<const uint8_t> bytes) {
    try {
        decode_message(bytes);
        return DecodeStatus::Ok;
    } catch (const DecodeError& e) {
        return e.status();
    }
}

// A listening socket that accepts and then does whatever `behave` says.
struct FakeServer {
    int fd = -1;
    uint16_t port = 0;
    std::thread thread;

    template <typename Fn>
    explicit FakeServer(Fn behave) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
        ::listen(fd, 1);
        socklen_t len = sizeof a;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
        port = ntohs(a.sin_port);
        thread = std::thread([this, behave] {
            int c = ::accept(fd, nullptr, nullptr);
            behave(c);
            ::close(c);
        });
    }
    ~FakeServer() {
        thread.join();
        ::close(fd);
    }
};

std::vector<uint8_t> read_message(int fd) {
    std::vector<uint8_t> buf;
    uint8_t b;
    while (decode_prefix(buf).status == DecodeStatus::NeedMore && ::recv(fd, &b, 1, 0) == 1) buf.push_back(b);
    return buf;
}

CoreletProgram default_program(uint64_t seed) {
    auto spec = make_default_architecture();
    randomize(spec, seed);
    return compile(spec);
}

struct RunningServer {
    Server server;
    std::thread thread;
    explicit RunningServer(CoreletProgram p, uint64_t max_sessions = 0)
        : server(std::move(p), ServerOptions{Endpoint{"127.0.0.1", 0}, {}, max_sessions, {}}),
          thread([this] { server.run(); }) {}
    ~RunningServer() {
        server.stop();
        thread.join();
    }
    Endpoint endpoint() const { return {"127.0.0.1", server.port()}; }
};

}  // namespace

TEST_CASE("SPIKES with no events has an 8-byte payload") {
    const auto b = encode(Spikes{7, {}});
    REQUIRE(b.size() == kHeaderSize + 8);
    CHECK(b[0] == 0x54);
    CHECK(b[1] == 0x4E);
    CHECK(b[2] == 1);
    CHECK(b[3] == 0x01);
    CHECK(b[4] == 8);
    CHECK(b[8] == 7);
    const auto one = encode(Spikes{1, {{0x0102, 3, 4}}});
    CHECK(one.size() == kHeaderSize + 8 + 6);
    CHECK(one[16] == 0x02);
    CHECK(one[17] == 0x01);
    CHECK(encode(Reset{}).size() == kHeaderSize);
    CHECK(encode(Hello{44, 36, 12, 3}).size() == kHeaderSize + 8);
    CHECK(encode(ClassHistogram{1, {1, 2, 3}}).size() == kHeaderSize + 8 + 12);
    CHECK(encode(ErrorMessage{3, "busy"}).size() == kHeaderSize + 2 + 4);
}

TEST_CASE("roundtrip of 10000 random messages") {
    std::mt19937_64 rng(1);
    std::vector<uint8_t> stream;
    std::vector<Message> sent;
    for (int i = 0; i < 10000; ++i) {
        const Message m = random_message(rng);
        const auto bytes = encode(m);
        REQUIRE(decode_message(bytes) == m);
        if (i < 300) {
            encode_into(m, stream);
            sent.push_back(m);
        }
    }
    // The same messages concatenated decode back in order from a stream.
    size_t pos = 0;
    for (const auto& m : sent) {
        const auto r = decode_prefix(std::span(stream).subspan(pos));
        REQUIRE(r.status == DecodeStatus::Ok);
        CHECK(*r.message == m);
        pos += r.consumed;
    }
    CHECK(pos == stream.size());
}

TEST_CASE("every strict prefix of a message needs more bytes") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto b = encode(random_message(rng));
        for (size_t n = 0; n < b.size(); ++n) {
            CHECK(decode_prefix(std::span(b).first(n)).status == DecodeStatus::NeedMore);
            CHECK(status_of(std::span(b).first(n)) == DecodeStatus::Truncated);
        }
    }
}

TEST_CASE("decode errors are distinct") {
    auto b = encode(Spikes{1, {{1, 2, 3}}});
    auto bad = b;
    bad[0] = 'X';
    CHECK(status_of(bad) == DecodeStatus::BadMagic);
    bad = b;
    bad[2] = 2;
    CHECK(status_of(bad) == DecodeStatus::BadVersion);
    try {
        decode_message(std::vector<uint8_t>{'T', 'N', 2});
        FAIL("expected version error");
    } catch (const DecodeError& e) {
        CHECK(e.kind() == "unsupported-version");
    }
    bad = b;
    bad[3] = 0x42;
    CHECK(status_of(bad) == DecodeStatus::UnknownType);
    bad = b;
    bad[12] = 2;  // count 2 but one event's worth of payload
    CHECK(status_of(bad) == DecodeStatus::CountMismatch);
    bad = b;
    bad.pop_back();
    CHECK(status_of(bad) == DecodeStatus::Truncated);
    bad = b;
    bad.push_back(0);
    CHECK(status_of(bad) == DecodeStatus::LengthMismatch);
    auto hello = encode(Hello{1, 2, 3, 4});
    hello[4] = 6;
    CHECK(status_of(hello) == DecodeStatus::LengthMismatch);
    auto huge = encode(Reset{});
    huge[7] = 0x7F;
    huge[3] = 0x01;
    CHECK(status_of(huge) == DecodeStatus::PayloadTooLarge);
    auto text = encode(ErrorMessage{1, "ok"});
    text.back() = 0xFF;
    CHECK(status_of(text) == DecodeStatus::BadUtf8);
    const auto overlong = encode(ErrorMessage{1, std::string("\xc0\xaf")});
    CHECK(status_of(overlong) == DecodeStatus::BadUtf8);
    auto hist = encode(ClassHistogram{1, {1, 2}});
    hist[12] = 3;
    CHECK(status_of(hist) == DecodeStatus::CountMismatch);
}

TEST_CASE("random bytes never crash the decoder") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100000; ++i) {
        std::vector<uint8_t> b(rng() % 40);
        for (auto& v : b) v = static_cast<uint8_t>(rng());
        if (b.size() >= 3 && rng() % 2) {
            b[0] = 'T';
            b[1] = 'N';
            b[2] = 1;
        }
        const auto r = decode_prefix(b);
        if (r.status == DecodeStatus::Ok) CHECK(r.consumed <= b.size());
    }
}

TEST_CASE("endpoint parsing") {
    CHECK(parse_endpoint("10.0.0.2:77").port == 77);
    CHECK(parse_endpoint(":9041").host == "127.0.0.1");
    CHECK_THROWS_AS(parse_endpoint("nohost"), ParseError);
    CHECK_THROWS_AS(parse_endpoint("h:70000"), ParseError);
    ::setenv("NEUROTRAIL_ADDR", "127.0.0.1:9999", 1);
    CHECK(default_endpoint().port == 9999);
    ::unsetenv("NEUROTRAIL_ADDR");
    CHECK(default_endpoint().port == 9040);
}

TEST_CASE("loopback: tick echo and equivalence with the local simulator") {
    const auto prog = default_program(1);
    RunningServer rs(prog);
    RemoteSession session(rs.endpoint(), prog.input_shape, 3);
    std::mt19937_64 rng(4);
    std::vector<std::vector<SpikeEvent>> frames;
    for (int i = 0; i < 20; ++i)
        frames.push_back(oracle::to_events(oracle::random_tensor(prog.input_shape, rng, 0.05 * (i % 5))));
    const auto local = run_frames(prog, frames);
    for (size_t i = 0; i < frames.size(); ++i) {
        const auto h = session.classify(frames[i], static_cast<uint32_t>(100 + 7 * i));
        CHECK(h.tick == 100 + 7 * i);
        CHECK(h.counts.size() == 3);
        CHECK(h.counts == local[i].counts);
    }
    session.client().reset();
    CHECK(session.classify(frames[3], 1).counts == local[3].counts);
}

TEST_CASE("HELLO with the wrong width is refused with shape-mismatch") {
    const auto prog = default_program(2);
    RunningServer rs(prog);
    Client c(rs.endpoint());
    try {
        c.hello(Hello{43, 36, 12, 3});
        FAIL("expected refusal");
    } catch (const RemoteError& e) {
        CHECK(e.code() == static_cast<uint16_t>(ErrorCode::ShapeMismatch));
    }
}

TEST_CASE("SPIKES before HELLO and out-of-range events are errors") {
    const auto prog = default_program(3);
    RunningServer rs(prog);
    {
        Client c(rs.endpoint());
        try {
            c.send_frame({}, 1);
            FAIL("expected refusal");
        } catch (const RemoteError& e) {
            CHECK(e.code() == static_cast<uint16_t>(ErrorCode::Unexpected));
        }
    }
    {
        RemoteSession s(rs.endpoint(), prog.input_shape, 3);
        try {
            s.classify({{44, 0, 0}}, 1);
            FAIL("expected refusal");
        } catch (const RemoteError& e) {
            CHECK(e.code() == static_cast<uint16_t>(ErrorCode::OutOfRange));
        }
    }
}

TEST_CASE("a second connection is refused as busy") {
    const auto prog = default_program(4);
    RunningServer rs(prog);
    Client c(rs.endpoint());
    c.hello(Hello{44, 36, 12, 3});
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(rs.server.port());
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
    const auto busy = read_message(fd);
    const auto m = decode_message(busy);
    REQUIRE(std::holds_alternative<ErrorMessage>(m));
    CHECK(std::get<ErrorMessage>(m).code == static_cast<uint16_t>(ErrorCode::Busy));
    ::close(fd);
    CHECK(rs.server.stats().refused == 1);
}

TEST_CASE("malformed bytes on an active session end it with ERROR") {
    const auto prog = default_program(5);
    RunningServer rs(prog);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(rs.server.port());
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
    const uint8_t junk[] = {'X', 'Y', 'Z', 0, 0, 0, 0, 0};
    ::send(fd, junk, sizeof junk, 0);
    const auto m = decode_message(read_message(fd));
    REQUIRE(std::holds_alternative<ErrorMessage>(m));
    CHECK(std::get<ErrorMessage>(m).code == static_cast<uint16_t>(ErrorCode::Malformed));
    uint8_t b;
    CHECK(::recv(fd, &b, 1, 0) == 0);  // closed
    ::close(fd);
}

TEST_CASE("server down is a connect error") {
    uint16_t port;
    {
        RunningServer rs(default_program(6));
        port = rs.server.port();
    }
    CHECK_THROWS_AS(Client(Endpoint{"127.0.0.1", port}), ConnectError);
}

TEST_CASE("a silent server times out and late replies are skipped") {
    FakeServer fake([](int c) {
        const auto first = decode_message(read_message(c));
        const auto tick0 = std::get<Spikes>(first).tick;
        const auto second = decode_message(read_message(c));
        const auto tick1 = std::get<Spikes>(second).tick;
        // Answer the first frame late, then the second.
        for (uint32_t t : {tick0, tick1}) {
            const auto b = encode(ClassHistogram{t, {t, 0, 0}});
            ::send(c, b.data(), b.size(), 0);
        }
        read_message(c);
    });
    Client client(Endpoint{"127.0.0.1", fake.port}, std::chrono::milliseconds(100));
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(client.send_frame({}, 5), TimeoutError);
    const auto waited = std::chrono::steady_clock::now() - t0;
    CHECK(waited >= std::chrono::milliseconds(90));
    CHECK(waited < std::chrono::milliseconds(400));
    const auto h = client.send_frame({}, 6);
    CHECK(h.tick == 6);
    CHECK(h.counts[0] == 6);
}

TEST_CASE("round trip of a 1000-spike frame is under 10 ms") {
    const auto prog = default_program(7);
    RunningServer rs(prog);
    RemoteSession session(rs.endpoint(), prog.input_shape, 3);
    std::mt19937_64 rng(8);
    std::vector<SpikeEvent> frame;
    while (frame.size() < 1000) {
        SpikeEvent e{static_cast<uint16_t>(rng() % 44), static_cast<uint16_t>(rng() % 36), static_cast<uint16_t>(rng() % 12)};
        if (std::find(frame.begin(), frame.end(), e) == frame.end()) frame.push_back(e);
    }
    std::vector<double> ms;
    for (uint32_t t = 0; t < 50; ++t) {
        const auto a = std::chrono::steady_clock::now();
        session.classify(frame, t);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - a).count());
    }
    std::sort(ms.begin(), ms.end());
    MESSAGE("median round trip " << ms[ms.size() / 2] << " ms");
    CHECK(ms[ms.size() / 2] < 10.0);
}

TEST_CASE("server stops after max_sessions") {
    const auto prog = default_program(9);
    Server server(prog, ServerOptions{Endpoint{"127.0.0.1", 0}, {}, 1, {}});
    std::thread t([&] { server.run(); });
    {
        RemoteSession s(Endpoint{"127.0.0.1", server.port()}, prog.input_shape, 3);
        s.classify({}, 0);
    }
    t.join();
    CHECK(server.stats().sessions == 1);
    CHECK(server.stats().frames == 1);
}
