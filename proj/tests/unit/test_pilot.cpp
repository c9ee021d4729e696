#include <doctest.h>

#include <random>
#include <sstream>

#include "json.hpp"

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/corelet.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/pilot.hpp"

using namespace neurotrail;
using namespace neurotrail::pilot;

namespace {

ClassHistogram hist(uint32_t l, uint32_t f, uint32_t r) { return {0, {l, f, r}}; }

class GrayCamera : public FrameSource {
public:
    std::optional<RgbImage> next_frame() override {
        RgbImage img(176, 144);
        std::fill(img.pixels.begin(), img.pixels.end(), static_cast<uint8_t>(frames++ * 7));
        return img;
    }
    void actuate(DriveCommand cmd, const WheelSpeeds& w) override {
        commands.push_back(cmd);
        wheels.push_back(w);
    }
    int frames = 0;
    std::vector<DriveCommand> commands;
    std::vector<WheelSpeeds> wheels;
};

// Answers with a fixed histogram, except on scripted ticks where it times
// out or drops the session.
class ScriptedSession : public HistogramSource {
public:
    ClassHistogram classify(const std::vector<SpikeEvent>&, uint32_t tick) override {
        ticks.push_back(tick);
        if (tick >= timeout_from && tick < timeout_until) throw TimeoutError("late");
        if (tick == lose_at) throw ConnectError("peer closed");
        return {tick, {1, 0, 0}};
    }
    uint32_t timeout_from = UINT32_MAX, timeout_until = UINT32_MAX, lose_at = UINT32_MAX;
    std::vector<uint32_t> ticks;
};

}  // namespace

TEST_CASE("decide picks the most active class") {
    CHECK(decide(hist(5, 9, 2)) == DriveCommand::Forward);
    CHECK(decide(hist(9, 5, 2)) == DriveCommand::Left);
    CHECK(decide(hist(1, 5, 9)) == DriveCommand::Right);
}

TEST_CASE("decide tie rule prefers Forward then Left") {
    CHECK(decide(hist(7, 7, 1)) == DriveCommand::Forward);
    CHECK(decide(hist(1, 7, 7)) == DriveCommand::Forward);
    CHECK(decide(hist(7, 1, 7)) == DriveCommand::Left);
    CHECK(decide(hist(0, 0, 0)) == DriveCommand::Forward);
}

TEST_CASE("decide is scale invariant and permutation covariant") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2000; ++i) {
        const uint32_t a = rng() % 31, b = rng() % 31, c = rng() % 31;
        const uint32_t k = 1 + rng() % 9;
        CHECK(decide(hist(a, b, c)) == decide(hist(k * a, k * b, k * c)));
        // With distinct counts the argmax follows the permutation.
        if (a != b && b != c && a != c) {
            const DriveCommand d = decide(hist(a, b, c));
            const DriveCommand swapped = decide(hist(c, b, a));
            const DriveCommand expect = d == DriveCommand::Left    ? DriveCommand::Right
                                        : d == DriveCommand::Right ? DriveCommand::Left
                                                                   : DriveCommand::Forward;
            CHECK(swapped == expect);
        }
    }
}

TEST_CASE("decide rejects other arities") {
    CHECK_THROWS_AS(decide(ClassHistogram{0, {1, 2}}), ShapeError);
    CHECK_THROWS_AS(decide(ClassHistogram{0, {1, 2, 3, 4}}), ShapeError);
}

TEST_CASE("wheel speeds") {
    CHECK(to_wheels(DriveCommand::Forward, 0.5) == WheelSpeeds{0.5, 0.5});
    CHECK(to_wheels(DriveCommand::Stop, 0.7) == WheelSpeeds{0, 0});
    const WheelSpeeds l = to_wheels(DriveCommand::Left, 0.8);
    const WheelSpeeds r = to_wheels(DriveCommand::Right, 0.8);
    CHECK(l.left == doctest::Approx(0.16));
    CHECK(l.right == doctest::Approx(0.8));
    CHECK(l.left == r.right);
    CHECK(l.right == r.left);
    for (double v : {0.01, 0.3, 1.0})
        for (auto c : {DriveCommand::Left, DriveCommand::Forward, DriveCommand::Right, DriveCommand::Stop}) {
            const WheelSpeeds w = to_wheels(c, v);
            CHECK(std::abs(w.left) <= 1.0);
            CHECK(std::abs(w.right) <= 1.0);
        }
}

TEST_CASE("drive loop runs one command per histogram") {
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 2);
    GrayCamera cam;
    ScriptedSession session;
    const DriveLog log = drive_loop(session, cam, spec, {0.5, 100, 2});
    REQUIRE(log.entries.size() == 100u);
    CHECK(cam.commands.size() == 100u);
    for (size_t i = 0; i < log.entries.size(); ++i) {
        CHECK(log.entries[i].tick == i);
        CHECK(log.entries[i].command == DriveCommand::Left);
        CHECK(log.entries[i].counts.has_value());
    }
    CHECK(log.termination == "cycle limit");
    CHECK_FALSE(log.session_lost);
}

TEST_CASE("drive loop holds the last command through two timeouts then stops") {
    TrinaryNetworkSpec spec = make_default_architecture();
    GrayCamera cam;
    ScriptedSession session;
    session.timeout_from = 5;
    session.timeout_until = 12;
    const DriveLog log = drive_loop(session, cam, spec, {0.5, 20, 2});
    REQUIRE(log.entries.size() == 20u);
    CHECK(log.entries[5].command == DriveCommand::Left);
    CHECK(log.entries[6].command == DriveCommand::Left);
    CHECK_FALSE(log.entries[5].counts.has_value());
    // Third consecutive timeout: stopped.
    for (int t = 7; t < 12; ++t) CHECK(log.entries[t].command == DriveCommand::Stop);
    CHECK(cam.wheels[7] == WheelSpeeds{0, 0});
    CHECK(log.entries[12].command == DriveCommand::Left);
}

TEST_CASE("drive loop ends with a partial log when the session is lost") {
    TrinaryNetworkSpec spec = make_default_architecture();
    GrayCamera cam;
    ScriptedSession session;
    session.lose_at = 7;
    const DriveLog log = drive_loop(session, cam, spec, {0.5, 50, 2});
    CHECK(log.entries.size() == 7u);
    CHECK(log.session_lost);
    CHECK(log.termination.find("session lost") == 0);
}

TEST_CASE("drive loop with an in-process chip logs histograms") {
    TrinaryNetworkSpec spec = make_default_architecture();
    randomize(spec, 9);
    const CoreletProgram prog = compile(spec);
    LocalChip chip(prog);
    GrayCamera cam;
    const DriveLog log = drive_loop(chip, cam, spec, {0.5, 5, 2});
    REQUIRE(log.entries.size() == 5u);
    for (const auto& e : log.entries) {
        REQUIRE(e.counts.has_value());
        uint32_t sum = 0;
        for (uint32_t c : *e.counts) sum += c;
        CHECK(sum <= 90u);
        CHECK(e.command != DriveCommand::Stop);
    }
}

TEST_CASE("drive log JSON lines") {
    DriveLog log;
    log.entries.push_back({0, std::array<uint32_t, 3>{1, 2, 3}, DriveCommand::Forward, Pose2{1, 2, 0.5}, false});
    log.entries.push_back({1, std::nullopt, DriveCommand::Stop, std::nullopt, true});
    std::istringstream in(log.to_jsonl());
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 2u);
    CHECK(rows[0]["tick"] == 0);
    CHECK(rows[0]["counts"] == nlohmann::json::array({1, 2, 3}));
    CHECK(rows[0]["command"] == "forward");
    CHECK(rows[0]["pose"]["heading"] == 0.5);
    CHECK(rows[1]["counts"].is_null());
    CHECK(rows[1]["command"] == "stop");
    CHECK_FALSE(rows[1].contains("pose"));
}
