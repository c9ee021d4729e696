#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "neurotrail/image.hpp"
#include "neurotrail/train.hpp"
#include "neurotrail/trail_world.hpp"
#include "neurotrail/types.hpp"

namespace neurotrail::world {

struct DriveSample {
    int64_t timestamp_ms = 0;
    RgbImage frame;
    DriveCommand command = DriveCommand::Forward;
};

struct DriveDataset {
    std::vector<DriveSample> samples;
};

// Pairs a time-ordered stream of frames and commands: each command labels
// the latest frame at or before its timestamp, the last such command wins,
// and frames left unlabeled or labeled Stop are dropped. Labeled frames are
// handed to the sink once the next frame arrives (or on finish). Timestamps
// going backwards throw DataError.
class Recorder {
public:
    using Sink = std::function<void(DriveSample&&)>;
    explicit Recorder(Sink sink) : sink_(std::move(sink)) {}

    void add_frame(int64_t timestamp_ms, RgbImage frame);
    void add_command(int64_t timestamp_ms, DriveCommand command);
    void finish();

    uint64_t emitted() const { return emitted_; }
    uint64_t dropped() const { return dropped_; }

private:
    void check_time(int64_t t);
    void flush();

    Sink sink_;
    int64_t last_time_ = INT64_MIN;
    bool have_frame_ = false;
    bool labeled_ = false;
    DriveSample pending_;
    uint64_t emitted_ = 0;
    uint64_t dropped_ = 0;
};

struct TimedFrame {
    int64_t timestamp_ms = 0;
    RgbImage image;
};

struct TimedCommand {
    int64_t timestamp_ms = 0;
    DriveCommand command = DriveCommand::Stop;
};

// Batch form of Recorder; each list must be sorted by time. On equal
// timestamps the frame counts as at-or-before the command.
DriveDataset record(const std::vector<TimedFrame>& frames, const std::vector<TimedCommand>& commands);

// Every sample whose index is 4 mod 5 is a test sample.
inline bool is_test_index(size_t index) { return index % 5 == 4; }
std::pair<DriveDataset, DriveDataset> split_dataset(const DriveDataset& ds);

// On-disk layout: frames/NNNNNN.png and labels.jsonl with one
// {"index", "timestamp_ms", "command"} object per line.
class DatasetWriter {
public:
    explicit DatasetWriter(const std::string& dir);
    void write(const DriveSample& sample);
    uint64_t count() const { return count_; }
    const std::array<uint64_t, kNumClasses>& per_class() const { return per_class_; }

private:
    std::string dir_;
    std::ofstream labels_;
    uint64_t count_ = 0;
    std::array<uint64_t, kNumClasses> per_class_{};
};

struct LabelRecord {
    uint64_t index = 0;
    int64_t timestamp_ms = 0;
    DriveCommand command = DriveCommand::Forward;
};

std::vector<LabelRecord> read_labels(const std::string& dir);
std::string frame_path(const std::string& dir, uint64_t index);

// Loads and downsamples a dataset directory, split by the every-fifth rule.
struct TrainingData {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> test;
};
TrainingData load_training_data(const std::string& dir);
LabeledImage to_labeled(const RgbImage& frame, DriveCommand command);

struct CollectConfig {
    WorldConfig world;
    OracleConfig oracle;
    double base_speed = 0.5;
    uint64_t frames = 5400;
    // Recovery data: with this probability per frame the executed command
    // is replaced by a random one for a short burst; labels stay the
    // oracle's.
    double perturb_rate = 0.04;
    int perturb_min_frames = 4;
    int perturb_max_frames = 20;
    // Each pass over the map starts with a random lateral offset within
    // this fraction of the half width.
    double start_offset = 0.5;
    // Frames whose steering signal lies within this distance of the
    // deadband edge are driven but not recorded.
    double label_margin = 0.03;
    uint64_t seed = 1;
};

struct CollectStats {
    uint64_t frames = 0;
    uint64_t interventions = 0;
    uint64_t passes = 0;
    std::array<uint64_t, kNumClasses> per_class{};
};

// Drives the map with the oracle pilot and feeds every frame and label to
// the sink through a Recorder until `frames` samples were produced.
CollectStats collect_oracle(const TrailMap& map, const CollectConfig& config, const Recorder::Sink& sink);

}  // namespace neurotrail::world
