#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neurotrail/image.hpp"
#include "neurotrail/trinary_net.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::pilot {

// Most active class in (Left, Forward, Right) order. Ties prefer Forward,
// then Left. Throws ShapeError unless there are exactly three counts.
DriveCommand decide(const ClassHistogram& h);

inline constexpr double kInnerWheelFactor = 0.2;

// Forward -> (v, v); Left -> (0.2v, v); Right -> (v, 0.2v); Stop -> (0, 0).
WheelSpeeds to_wheels(DriveCommand cmd, double base_speed);

// Anything that turns a frame's spikes into a class histogram: an in-process
// chip or a remote server session. Implementations throw TimeoutError when a
// reply is late and other neurotrail::Error kinds when the session is lost.
class HistogramSource {
public:
    virtual ~HistogramSource() = default;
    virtual ClassHistogram classify(const std::vector<SpikeEvent>& spikes, uint32_t tick) = 0;
};

struct Pose2 {
    double x = 0;
    double y = 0;
    double heading = 0;
    friend bool operator==(const Pose2&, const Pose2&) = default;
};

// Camera plus actuators. A simulated world renders frames and integrates
// the robot; next_frame returns nullopt once the run is over.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<RgbImage> next_frame() = 0;
    virtual void actuate(DriveCommand cmd, const WheelSpeeds& wheels) = 0;
    virtual std::optional<Pose2> pose() const { return std::nullopt; }
    // True when the last actuation ended with an automatic reset onto the trail.
    virtual bool intervened() const { return false; }
};

struct DriveConfig {
    double base_speed = 0.5;
    uint64_t max_cycles = 0;  // 0 = until the frame source ends
    // Consecutive timeouts tolerated while holding the last command; the
    // next one stops the robot.
    int timeout_hold_cycles = 2;
};

struct DriveLogEntry {
    uint32_t tick = 0;
    std::optional<std::array<uint32_t, kNumClasses>> counts;  // empty on timeout
    DriveCommand command = DriveCommand::Stop;
    std::optional<Pose2> pose;
    bool intervention = false;
    friend bool operator==(const DriveLogEntry&, const DriveLogEntry&) = default;
};

struct DriveLog {
    std::vector<DriveLogEntry> entries;
    uint64_t interventions = 0;
    bool session_lost = false;
    std::string termination;

    std::string to_jsonl() const;
    void write_jsonl(const std::string& path) const;
};

// frame -> preprocess -> classify -> decide -> actuate, once per cycle.
DriveLog drive_loop(HistogramSource& session, FrameSource& source, const TrinaryNetworkSpec& spec,
                    const DriveConfig& config);

}  // namespace neurotrail::pilot
