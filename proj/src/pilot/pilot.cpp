#include "json.hpp"

#include <fstream>
#include <sstream>

#include "neurotrail/error.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/vision.hpp"

namespace neurotrail::pilot {

DriveCommand decide(const ClassHistogram& h) {
    if (h.counts.size() != kNumClasses)
        throw ShapeError("histogram has " + std::to_string(h.counts.size()) + " classes, expected 3");
    const uint32_t l = h.counts[0], f = h.counts[1], r = h.counts[2];
    if (f >= l && f >= r) return DriveCommand::Forward;
    if (l >= r) return DriveCommand::Left;
    return DriveCommand::Right;
}

WheelSpeeds to_wheels(DriveCommand cmd, double v) {
    switch (cmd) {
        case DriveCommand::Forward: return {v, v};
        case DriveCommand::Left: return {kInnerWheelFactor * v, v};
        case DriveCommand::Right: return {v, kInnerWheelFactor * v};
        case DriveCommand::Stop: return {0, 0};
    }
    return {0, 0};
}

std::string DriveLog::to_jsonl() const {
    std::ostringstream out;
    for (const auto& e : entries) {
        nlohmann::json j;
        j["tick"] = e.tick;
        j["counts"] = e.counts ? nlohmann::json(*e.counts) : nlohmann::json(nullptr);
        j["command"] = command_name(e.command);
        if (e.pose) j["pose"] = {{"x", e.pose->x}, {"y", e.pose->y}, {"heading", e.pose->heading}};
        if (e.intervention) j["intervention"] = true;
        out << j.dump() << '\n';
    }
    return out.str();
}

void DriveLog::write_jsonl(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f << to_jsonl();
}

DriveLog drive_loop(HistogramSource& session, FrameSource& source, const TrinaryNetworkSpec& spec,
                    const DriveConfig& config) {
    DriveLog log;
    DriveCommand last = DriveCommand::Stop;
    int timeouts = 0;
    for (uint32_t tick = 0; config.max_cycles == 0 || tick < config.max_cycles; ++tick) {
        auto frame = source.next_frame();
        if (!frame) {
            log.termination = "end of frames";
            break;
        }
        const auto spikes = vision::preprocess(*frame, spec);
        DriveLogEntry entry;
        entry.tick = tick;
        try {
            const ClassHistogram h = session.classify(spikes, tick);
            entry.command = decide(h);
            entry.counts = std::array<uint32_t, kNumClasses>{h.counts[0], h.counts[1], h.counts[2]};
            timeouts = 0;
        } catch (const TimeoutError&) {
            ++timeouts;
            entry.command = timeouts > config.timeout_hold_cycles ? DriveCommand::Stop : last;
        } catch (const Error& e) {
            log.session_lost = true;
            log.termination = std::string("session lost: ") + e.what();
            break;
        }
        last = entry.command;
        source.actuate(entry.command, to_wheels(entry.command, config.base_speed));
        entry.pose = source.pose();
        entry.intervention = source.intervened();
        log.interventions += entry.intervention;
        log.entries.push_back(entry);
    }
    if (log.termination.empty()) log.termination = "cycle limit";
    return log;
}

}  // namespace neurotrail::pilot
