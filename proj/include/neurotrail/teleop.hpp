#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "neurotrail/trail_world.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::world {

// Websocket teleoperation of a SimWorld. The world advances in real time at
// 1/dt frames per second; the newest frame is pushed to the client as a
// binary raw-frame message at most push_hz times per second (older unsent
// frames are dropped). The client sends text messages
// {"cmd": "left"|"forward"|"right"|"stop", "recording": bool}. While
// recording, every frame is labeled with the command active at that frame
// and written to dataset_dir (Stop frames excluded).
struct TeleopOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 9050;  // 0 picks a free port
    double push_hz = 15.0;
    double base_speed = 0.5;
    std::string dataset_dir;  // empty disables recording
    double duration_s = 0;    // stop after this much wall time when positive
};

struct TeleopStats {
    uint64_t frames = 0;
    uint64_t pushed = 0;
    uint64_t commands = 0;
    uint64_t rejected = 0;
    uint64_t recorded = 0;
    uint64_t interventions = 0;
    std::array<uint64_t, kNumClasses> per_class{};
};

struct TeleopCommand {
    DriveCommand cmd = DriveCommand::Stop;
    std::optional<bool> recording;
};

// Parses one client message; throws ParseError on anything else.
TeleopCommand parse_teleop_command(std::string_view text);

class TeleopServer {
public:
    TeleopServer(const TrailMap& map, const WorldConfig& world, const TeleopOptions& options);
    ~TeleopServer();
    TeleopServer(const TeleopServer&) = delete;
    TeleopServer& operator=(const TeleopServer&) = delete;

    uint16_t port() const;
    // Serves one client at a time until stop() or duration_s elapses.
    void run();
    // Safe to call from any thread.
    void stop();
    // Read after run() returns.
    TeleopStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace neurotrail::world
