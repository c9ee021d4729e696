#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neurotrail {

// Width x height x features volume. Flat index of (x, y, f) is (f*h + y)*w + x,
// so iterating flat indices visits events in (f, y, x) order.
struct Shape3 {
    int width = 0;
    int height = 0;
    int features = 0;

    size_t size() const { return static_cast<size_t>(width) * height * features; }
    size_t index(int x, int y, int f) const {
        return (static_cast<size_t>(f) * height + y) * width + x;
    }
    bool contains(int x, int y, int f) const {
        return x >= 0 && y >= 0 && f >= 0 && x < width && y < height && f < features;
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

// One spiking input neuron, addressed by column, row and feature.
struct SpikeEvent {
    uint16_t x = 0;
    uint16_t y = 0;
    uint16_t f = 0;
    friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

// Output-population spike counts for one frame.
struct ClassHistogram {
    uint32_t tick = 0;
    std::vector<uint32_t> counts;
    friend bool operator==(const ClassHistogram&, const ClassHistogram&) = default;
};

enum class DriveCommand : uint8_t { Left = 0, Forward = 1, Right = 2, Stop = 3 };

inline constexpr int kNumClasses = 3;

// Differential-drive wheel commands as fractions of full speed.
struct WheelSpeeds {
    double left = 0;
    double right = 0;
    friend bool operator==(const WheelSpeeds&, const WheelSpeeds&) = default;
};

std::string_view command_name(DriveCommand c);
std::optional<DriveCommand> parse_command(std::string_view name);

}  // namespace neurotrail
