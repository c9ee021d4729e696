#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/protocol.hpp"

namespace neurotrail::protocol {

struct ServerOptions {
    Endpoint endpoint;
    SimOptions sim;
    // Return from run() after this many sessions have ended (0 = never).
    uint64_t max_sessions = 0;
    std::function<void(const std::string&)> log;
};

struct ServerStats {
    uint64_t sessions = 0;
    uint64_t refused = 0;
    uint64_t frames = 0;
    uint64_t errors_sent = 0;
};

// Single-session chip server. Each accepted session gets a fresh chip, must
// open with HELLO, and then receives one HISTOGRAM per SPIKES in order.
// Connections arriving while a session is active get ERROR busy.
class Server {
public:
    Server(CoreletProgram program, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Port actually bound (useful with port 0).
    uint16_t port() const { return port_; }
    // Serves until stop() or max_sessions.
    void run();
    // Safe from any thread or a signal handler.
    void stop();
    ServerStats stats() const;

private:
    struct Session;
    bool serve_bytes(Session& s);
    void send_error(int fd, ErrorCode code, const std::string& text);
    void log(const std::string& line) const;

    CoreletProgram program_;
    ServerOptions options_;
    int listen_fd_ = -1;
    int wake_[2] = {-1, -1};
    uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<uint64_t> sessions_{0}, refused_{0}, frames_{0}, errors_{0};
};

// Blocking lockstep client for one session.
class Client {
public:
    // Throws ConnectError when the server cannot be reached.
    Client(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::milliseconds(500));
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    // Sends HELLO and returns the server's; RemoteError when refused.
    Hello hello(const Hello& mine);
    // One SPIKES out, the HISTOGRAM for `tick` back. Replies for older ticks
    // (late answers to frames that already timed out) are skipped. Throws
    // TimeoutError when no matching reply arrives in time.
    ClassHistogram send_frame(const std::vector<SpikeEvent>& spikes, uint32_t tick);
    // RESET and wait for the acknowledgement.
    void reset();

    void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
    std::chrono::milliseconds timeout() const { return timeout_; }

private:
    Message receive(std::chrono::steady_clock::time_point deadline);
    void send(const Message& m);

    int fd_ = -1;
    std::chrono::milliseconds timeout_;
    std::vector<uint8_t> inbox_;
    std::vector<uint8_t> outbox_;
};

// HistogramSource over a remote session: connects, negotiates the input
// shape and class count, then classifies frame by frame.
class RemoteSession : public pilot::HistogramSource {
public:
    RemoteSession(const Endpoint& endpoint, const Shape3& input, uint16_t classes,
                  std::chrono::milliseconds timeout = std::chrono::milliseconds(500));
    ClassHistogram classify(const std::vector<SpikeEvent>& spikes, uint32_t tick) override;
    Client& client() { return client_; }

private:
    Client client_;
};

}  // namespace neurotrail::protocol
