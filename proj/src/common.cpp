#include <fstream>
#include <iterator>

#include "neurotrail/bytes.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail {

std::string to_string(const Shape3& s) {
    return std::to_string(s.width) + "x" + std::to_string(s.height) + "x" + std::to_string(s.features);
}

std::string_view command_name(DriveCommand c) {
    switch (c) {
        case DriveCommand::Left: return "left";
        case DriveCommand::Forward: return "forward";
        case DriveCommand::Right: return "right";
        case DriveCommand::Stop: return "stop";
    }
    return "?";
}

std::optional<DriveCommand> parse_command(std::string_view name) {
    if (name == "left") return DriveCommand::Left;
    if (name == "forward") return DriveCommand::Forward;
    if (name == "right") return DriveCommand::Right;
    if (name == "stop") return DriveCommand::Stop;
    return std::nullopt;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to " + path);
}

}  // namespace neurotrail
