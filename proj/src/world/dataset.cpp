#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "json.hpp"

#include "neurotrail/dataset.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/vision.hpp"

namespace neurotrail::world {

void Recorder::check_time(int64_t t) {
    if (t < last_time_)
        throw DataError("timestamp " + std::to_string(t) + " ms is earlier than " + std::to_string(last_time_) + " ms");
    last_time_ = t;
}

void Recorder::flush() {
    if (!have_frame_) return;
    if (labeled_ && pending_.command != DriveCommand::Stop) {
        ++emitted_;
        sink_(std::move(pending_));
    } else {
        ++dropped_;
    }
    have_frame_ = false;
    labeled_ = false;
    pending_ = {};
}

void Recorder::add_frame(int64_t t, RgbImage frame) {
    check_time(t);
    flush();
    pending_.timestamp_ms = t;
    pending_.frame = std::move(frame);
    have_frame_ = true;
}

void Recorder::add_command(int64_t t, DriveCommand command) {
    check_time(t);
    if (!have_frame_) return;  // no frame at or before this command
    pending_.command = command;
    labeled_ = true;
}

void Recorder::finish() { flush(); }

DriveDataset record(const std::vector<TimedFrame>& frames, const std::vector<TimedCommand>& commands) {
    DriveDataset ds;
    Recorder rec([&](DriveSample&& s) { ds.samples.push_back(std::move(s)); });
    size_t i = 0, j = 0;
    while (i < frames.size() || j < commands.size()) {
        if (j == commands.size() || (i < frames.size() && frames[i].timestamp_ms <= commands[j].timestamp_ms)) {
            if (i > 0 && frames[i].timestamp_ms < frames[i - 1].timestamp_ms) throw DataError("frame timestamps are not ordered");
            rec.add_frame(frames[i].timestamp_ms, frames[i].image);
            ++i;
        } else {
            if (j > 0 && commands[j].timestamp_ms < commands[j - 1].timestamp_ms)
                throw DataError("command timestamps are not ordered");
            rec.add_command(commands[j].timestamp_ms, commands[j].command);
            ++j;
        }
    }
    rec.finish();
    return ds;
}

std::pair<DriveDataset, DriveDataset> split_dataset(const DriveDataset& ds) {
    std::pair<DriveDataset, DriveDataset> out;
    for (size_t i = 0; i < ds.samples.size(); ++i)
        (is_test_index(i) ? out.second : out.first).samples.push_back(ds.samples[i]);
    return out;
}

std::string frame_path(const std::string& dir, uint64_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "%06llu.png", static_cast<unsigned long long>(index));
    return (std::filesystem::path(dir) / "frames" / name).string();
}

DatasetWriter::DatasetWriter(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(std::filesystem::path(dir) / "frames", ec);
    if (ec) throw IoError("cannot create dataset directory " + dir + ": " + ec.message());
    labels_.open(std::filesystem::path(dir) / "labels.jsonl", std::ios::trunc);
    if (!labels_) throw IoError("cannot write labels in " + dir);
}

void DatasetWriter::write(const DriveSample& s) {
    if (s.command == DriveCommand::Stop) throw DataError("Stop samples are not part of a dataset");
    write_png(frame_path(dir_, count_), s.frame);
    nlohmann::json j{{"index", count_}, {"timestamp_ms", s.timestamp_ms}, {"command", command_name(s.command)}};
    labels_ << j.dump() << "\n";
    labels_.flush();
    if (!labels_) throw IoError("short write to labels in " + dir_);
    ++per_class_[static_cast<size_t>(s.command)];
    ++count_;
}

std::vector<LabelRecord> read_labels(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "labels.jsonl";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<LabelRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            LabelRecord r;
            r.index = j.at("index").get<uint64_t>();
            r.timestamp_ms = j.at("timestamp_ms").get<int64_t>();
            const auto cmd = parse_command(j.at("command").get<std::string>());
            if (!cmd) throw ParseError("unknown command");
            if (*cmd == DriveCommand::Stop) throw DataError("labels.jsonl line " + std::to_string(line_no) + " is a Stop sample");
            r.command = *cmd;
            out.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("labels.jsonl line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("labels.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

LabeledImage to_labeled(const RgbImage& frame, DriveCommand command) {
    LabeledImage s;
    s.image = frame.width == vision::kNetWidth && frame.height == vision::kNetHeight ? frame : vision::downsample(frame);
    s.label = static_cast<int>(command);
    return s;
}

TrainingData load_training_data(const std::string& dir) {
    TrainingData data;
    for (const LabelRecord& r : read_labels(dir)) {
        LabeledImage s = to_labeled(read_frame_file(frame_path(dir, r.index)), r.command);
        (is_test_index(r.index) ? data.test : data.train).push_back(std::move(s));
    }
    return data;
}

CollectStats collect_oracle(const TrailMap& map, const CollectConfig& c, const Recorder::Sink& sink) {
    CollectStats stats;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u01(0, 1);
    Recorder rec([&](DriveSample&& s) {
        ++stats.per_class[static_cast<size_t>(s.command)];
        ++stats.frames;
        sink(std::move(s));
    });
    int64_t clock_offset = 0;
    uint64_t submitted = 0;
    while (submitted < c.frames) {
        WorldConfig wc = c.world;
        wc.render.noise_seed ^= rng();
        SimWorld world(map, wc);
        const double half = 0.5 * map.width;
        world.set_pose(world.geometry().pose_at(wc.start_s, (2 * u01(rng) - 1) * c.start_offset * half));
        ++stats.passes;
        int burst = 0;
        DriveCommand burst_cmd = DriveCommand::Forward;
        int64_t last_t = clock_offset;
        while (submitted < c.frames) {
            auto frame = world.next_frame();
            if (!frame) break;
            double signal;
            try {
                signal = steering_signal(world.geometry(), *world.pose(), c.oracle);
            } catch (const EndOfTrail&) {
                break;
            }
            const DriveCommand label = signal > c.oracle.deadband    ? DriveCommand::Left
                                       : signal < -c.oracle.deadband ? DriveCommand::Right
                                                                     : DriveCommand::Forward;
            last_t = clock_offset + world.timestamp_ms();
            if (std::abs(std::abs(signal) - c.oracle.deadband) >= c.label_margin) {
                rec.add_frame(last_t, std::move(*frame));
                rec.add_command(last_t, label);
                ++submitted;
            }
            DriveCommand exec = label;
            if (burst > 0) {
                exec = burst_cmd;
                --burst;
            } else if (u01(rng) < c.perturb_rate) {
                burst = c.perturb_min_frames +
                        static_cast<int>(u01(rng) * (c.perturb_max_frames - c.perturb_min_frames + 1));
                burst_cmd = static_cast<DriveCommand>(rng() % 3);
            }
            world.actuate(exec, pilot::to_wheels(exec, c.base_speed));
        }
        stats.interventions += world.interventions();
        clock_offset = last_t + 1000;
        if (world.frames() == 0) throw DataError("map is too short to collect from");
    }
    rec.finish();
    return stats;
}

}  // namespace neurotrail::world
