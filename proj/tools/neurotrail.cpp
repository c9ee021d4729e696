#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "neurotrail/chip_sim.hpp"
#include "neurotrail/corelet.hpp"
#include "neurotrail/dataset.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/net.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/teleop.hpp"
#include "neurotrail/train.hpp"
#include "neurotrail/trail_world.hpp"
#include "neurotrail/verify.hpp"
#include "neurotrail/vision.hpp"

using namespace neurotrail;
namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw UsageError(what + " " + path + " does not exist");
}

void require_dir(const std::string& path, const std::string& what) {
    if (!fs::is_directory(path)) throw UsageError(what + " " + path + " is not a directory");
}

void require_writable_parent(const std::string& path) {
    const fs::path parent = fs::absolute(path).parent_path();
    if (!fs::is_directory(parent)) throw UsageError("output directory " + parent.string() + " does not exist");
}

// Blocks SIGINT/SIGTERM in every thread and runs `on_signal` from a
// dedicated waiter thread, so servers can be stopped with Ctrl-C.
class SignalStop {
public:
    explicit SignalStop(std::function<void()> on_signal) {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        sigaddset(&set_, SIGUSR1);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
        waiter_ = std::thread([this, f = std::move(on_signal)] {
            int sig = 0;
            sigwait(&set_, &sig);
            if (sig != SIGUSR1) f();
        });
    }
    ~SignalStop() {
        pthread_kill(waiter_.native_handle(), SIGUSR1);
        waiter_.join();
    }

private:
    sigset_t set_;
    std::thread waiter_;
};

CoreletProgram program_for(const std::string& program_path, const std::string& model_path) {
    if (!program_path.empty()) return load_program_file(program_path);
    return compile(load_spec(model_path));
}

void print_confusion(const ConfusionMatrix& cm) {
    std::printf("confusion (rows truth, columns predicted)\n");
    std::printf("%10s %8s %8s %8s\n", "", "left", "forward", "right");
    const char* names[] = {"left", "forward", "right"};
    for (int t = 0; t < kNumClasses; ++t)
        std::printf("%10s %8u %8u %8u\n", names[t], cm.counts[t][0], cm.counts[t][1], cm.counts[t][2]);
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const size_t i = std::min(v.size() - 1, static_cast<size_t>(p * static_cast<double>(v.size() - 1) + 0.5));
    return v[i];
}

// ---------------------------------------------------------------- gen-map

struct GenMapArgs {
    std::string out;
    world::MapConfig map;
};

int run_gen_map(const GenMapArgs& a) {
    require_writable_parent(a.out);
    const world::TrailMap m = world::generate_map(a.map);
    world::save_map(m, a.out);
    const world::TrailGeometry g(m);
    std::printf("map %s: %.1f m, width %.2f m, %zu control points, seed %llu\n", a.out.c_str(), g.length(), m.width,
                m.control_points.size(), static_cast<unsigned long long>(m.seed));
    return 0;
}

// ---------------------------------------------------------------- collect

struct CollectArgs {
    bool oracle = false;
    bool teleop = false;
    std::string map;
    std::string out;
    world::CollectConfig collect;
    world::TeleopOptions teleop_opt;
};

int run_collect(CollectArgs& a) {
    require_file(a.map, "map");
    const world::TrailMap m = world::load_map(a.map);
    if (a.oracle) {
        world::DatasetWriter writer(a.out);
        const auto st = world::collect_oracle(m, a.collect, [&](world::DriveSample&& s) { writer.write(s); });
        std::printf("collected %llu frames into %s: left %llu forward %llu right %llu, %llu interventions\n",
                    static_cast<unsigned long long>(st.frames), a.out.c_str(),
                    static_cast<unsigned long long>(st.per_class[0]), static_cast<unsigned long long>(st.per_class[1]),
                    static_cast<unsigned long long>(st.per_class[2]), static_cast<unsigned long long>(st.interventions));
        return 0;
    }
    a.teleop_opt.dataset_dir = a.out;
    world::WorldConfig wc = a.collect.world;
    world::TeleopServer server(m, wc, a.teleop_opt);
    std::printf("teleop websocket on ws://%s:%u, recording into %s\n", a.teleop_opt.host.c_str(), server.port(),
                a.out.c_str());
    std::fflush(stdout);
    {
        SignalStop stop([&] { server.stop(); });
        server.run();
    }
    const auto st = server.stats();
    std::printf("recorded %llu frames: left %llu forward %llu right %llu\n", static_cast<unsigned long long>(st.recorded),
                static_cast<unsigned long long>(st.per_class[0]), static_cast<unsigned long long>(st.per_class[1]),
                static_cast<unsigned long long>(st.per_class[2]));
    return 0;
}

// ---------------------------------------------------------------- train / eval

struct TrainArgs {
    std::string data;
    std::string out;
    TrainConfig cfg;
    bool quiet = false;
};

int run_train(TrainArgs& a) {
    require_dir(a.data, "dataset");
    require_writable_parent(a.out);
    const auto data = world::load_training_data(a.data);
    std::printf("training on %zu frames, testing on %zu\n", data.train.size(), data.test.size());
    if (!a.quiet)
        a.cfg.on_epoch = [](int epoch, double loss, double acc) {
            std::printf("epoch %3d  loss %.4f  train accuracy %.4f\n", epoch + 1, loss, acc);
            std::fflush(stdout);
        };
    const TrainResult r = train(data.train, data.test, a.cfg);
    save_spec(r.spec, a.out);
    std::printf("train accuracy %.4f\ntest accuracy %.4f\ntraining time %.1f s\nmodel %s\n", r.report.train_accuracy(),
                r.report.test_accuracy(), r.report.seconds, a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string split = "test";
};

int run_eval(const EvalArgs& a) {
    require_file(a.model, "model");
    require_dir(a.data, "dataset");
    const TrinaryNetworkSpec spec = load_spec(a.model);
    auto data = world::load_training_data(a.data);
    std::vector<LabeledImage> set;
    if (a.split != "train") set = std::move(data.test);
    if (a.split != "test") set.insert(set.end(), data.train.begin(), data.train.end());
    const ConfusionMatrix cm = evaluate(spec, set);
    std::printf("%s accuracy %.4f (%u frames)\n", a.split.c_str(), cm.accuracy(), cm.total());
    print_confusion(cm);
    return 0;
}

// ---------------------------------------------------------------- compile / inspect

struct CompileArgs {
    std::string model;
    std::string out;
    bool paired = false;
    std::string placement = "same-core";
};

int run_compile(const CompileArgs& a) {
    require_file(a.model, "model");
    require_writable_parent(a.out);
    CompileOptions opt;
    opt.paired_lines = a.paired;
    opt.placement = a.placement == "separate-core" ? DuplicatePlacement::SeparateCore : DuplicatePlacement::SameCore;
    const CoreletProgram prog = compile(load_spec(a.model), opt);
    const auto violations = validate(prog);
    if (!violations.empty()) throw ValidationError(violations.front());
    save_program(prog, a.out);
    std::printf("program %s\n%s", a.out.c_str(), report(prog).to_text().c_str());
    return 0;
}

struct InspectArgs {
    std::string program;
    std::string model;
    bool json = false;
};

int run_inspect(const InspectArgs& a) {
    if (!a.program.empty()) {
        require_file(a.program, "program");
        const CoreletProgram prog = load_program_file(a.program);
        const auto violations = validate(prog);
        const UtilizationReport rep = report(prog);
        if (a.json) {
            std::printf("%s\n", rep.to_json().c_str());
        } else {
            std::printf("%s", rep.to_text().c_str());
            std::printf("validation: %s\n", violations.empty() ? "ok" : "FAILED");
        }
        for (const auto& v : violations) std::printf("  %s\n", v.c_str());
        return violations.empty() ? 0 : 1;
    }
    require_file(a.model, "model");
    const TrinaryNetworkSpec spec = load_spec(a.model);
    std::printf("input %s\n", to_string(spec.input_shape).c_str());
    Shape3 in = spec.input_shape;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const Shape3 out = l.output_shape(in);
        size_t nz = 0;
        for (int8_t w : l.weights) nz += w != 0;
        std::printf("layer %zu %-15s %dx%d stride %d pad %d groups %d fan-in %3d  %s -> %s  nonzero weights %zu/%zu\n", i,
                    std::string(layer_kind_name(l.kind)).c_str(), l.kh, l.kw, l.stride, l.padding, l.feature_groups, l.fan_in(),
                    to_string(in).c_str(), to_string(out).c_str(), nz, l.weights.size());
        in = out;
    }
    for (size_t c = 0; c < spec.class_populations.size(); ++c)
        std::printf("class %s: %zu neurons\n", std::string(command_name(static_cast<DriveCommand>(c))).c_str(),
                    spec.class_populations[c].size());
    return 0;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
    std::string program;
    std::string model;
    std::string endpoint;
    uint64_t max_sessions = 0;
    bool quiet = false;
};

int run_serve(const ServeArgs& a) {
    if (!a.program.empty()) require_file(a.program, "program");
    if (!a.model.empty()) require_file(a.model, "model");
    protocol::ServerOptions opt;
    opt.endpoint = a.endpoint.empty() ? protocol::default_endpoint() : protocol::parse_endpoint(a.endpoint);
    opt.max_sessions = a.max_sessions;
    if (!a.quiet) opt.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
    protocol::Server server(program_for(a.program, a.model), opt);
    std::printf("serving on %s:%u\n", opt.endpoint.host.c_str(), server.port());
    std::fflush(stdout);
    {
        SignalStop stop([&] { server.stop(); });
        server.run();
    }
    const auto st = server.stats();
    std::printf("sessions %llu, frames %llu, refused %llu\n", static_cast<unsigned long long>(st.sessions),
                static_cast<unsigned long long>(st.frames), static_cast<unsigned long long>(st.refused));
    return 0;
}

// ---------------------------------------------------------------- drive

struct DriveArgs {
    bool sim = false;
    bool in_process = false;
    bool remote = false;
    std::string model;
    std::string program;
    std::string map;
    std::string endpoint;
    std::string log;
    double distance = 0;
    double speed = 0.5;
    uint64_t seed = 0;
    int timeout_ms = 500;
};

int run_drive(const DriveArgs& a) {
    if (!a.sim) throw UsageError("only simulated driving is supported; pass --sim");
    require_file(a.model, "model");
    require_file(a.map, "map");
    if (!a.program.empty()) require_file(a.program, "program");
    if (!a.log.empty()) require_writable_parent(a.log);
    const TrinaryNetworkSpec spec = load_spec(a.model);
    world::WorldConfig wc;
    wc.max_distance = a.distance;
    wc.render.noise_seed = a.seed;
    world::SimWorld sim(world::load_map(a.map), wc);
    pilot::DriveConfig dc;
    dc.base_speed = a.speed;

    pilot::DriveLog log;
    const auto t0 = std::chrono::steady_clock::now();
    if (a.remote) {
        const auto ep = a.endpoint.empty() ? protocol::default_endpoint() : protocol::parse_endpoint(a.endpoint);
        protocol::RemoteSession session(ep, spec.core_input_shape(),
                                        static_cast<uint16_t>(spec.class_populations.size()),
                                        std::chrono::milliseconds(a.timeout_ms));
        log = pilot::drive_loop(session, sim, spec, dc);
    } else {
        LocalChip chip(a.program.empty() ? compile(spec) : load_program_file(a.program));
        log = pilot::drive_loop(chip, sim, spec, dc);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!a.log.empty()) log.write_jsonl(a.log);
    std::printf("drove %.1f m in %zu frames (%.1f s wall), interventions %llu, end: %s\n", sim.progress(),
                log.entries.size(), secs, static_cast<unsigned long long>(log.interventions), log.termination.c_str());
    return log.session_lost ? 1 : 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::string model;
    std::string program;
    std::string map;
    std::string endpoint;
    bool in_process = false;
    uint64_t frames = 1000;
    uint64_t seed = 1;
};

int run_bench(const BenchArgs& a) {
    require_file(a.model, "model");
    if (!a.program.empty()) require_file(a.program, "program");
    if (!a.map.empty()) require_file(a.map, "map");
    const TrinaryNetworkSpec spec = load_spec(a.model);
    const CoreletProgram prog = program_for(a.program, a.model);

    // Camera frames along the trail, rendered up front so only the
    // frame -> histogram path is timed.
    world::MapConfig mc;
    mc.seed = a.seed;
    const world::TrailMap map = a.map.empty() ? world::generate_map(mc) : world::load_map(a.map);
    world::WorldConfig wc;
    wc.render.noise_seed = a.seed;
    std::vector<RgbImage> frames;
    {
        world::SimWorld sim(map, wc);
        while (frames.size() < std::min<uint64_t>(a.frames, 300)) {
            auto f = sim.next_frame();
            if (!f) break;
            const DriveCommand c = world::oracle_pilot(sim.geometry(), *sim.pose());
            sim.actuate(c, pilot::to_wheels(c, 0.5));
            frames.push_back(std::move(*f));
        }
    }
    if (frames.empty()) throw DataError("map produced no frames");

    std::unique_ptr<protocol::Server> server;
    std::thread server_thread;
    std::unique_ptr<pilot::HistogramSource> source;
    std::string mode;
    if (a.in_process) {
        source = std::make_unique<LocalChip>(prog);
        mode = "in-process";
    } else {
        protocol::Endpoint ep;
        if (a.endpoint.empty()) {
            protocol::ServerOptions so;
            so.endpoint = {"127.0.0.1", 0};
            server = std::make_unique<protocol::Server>(prog, so);
            ep = {"127.0.0.1", server->port()};
            server_thread = std::thread([&] { server->run(); });
        } else {
            ep = protocol::parse_endpoint(a.endpoint);
        }
        source = std::make_unique<protocol::RemoteSession>(ep, spec.core_input_shape(),
                                                           static_cast<uint16_t>(spec.class_populations.size()));
        mode = "remote " + ep.host + ":" + std::to_string(ep.port);
    }

    std::vector<double> ms;
    ms.reserve(a.frames);
    const auto t0 = std::chrono::steady_clock::now();
    for (uint64_t i = 0; i < a.frames; ++i) {
        const auto s = std::chrono::steady_clock::now();
        const auto events = vision::preprocess(frames[i % frames.size()], spec);
        source->classify(events, static_cast<uint32_t>(i));
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    source.reset();
    if (server) {
        server->stop();
        server_thread.join();
    }
    std::printf("bench %s: %llu frames, %.1f frames/s, p50 %.3f ms, p99 %.3f ms, max %.3f ms\n", mode.c_str(),
                static_cast<unsigned long long>(a.frames), a.frames / secs, percentile(ms, 0.5), percentile(ms, 0.99),
                percentile(ms, 1.0));
    return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    std::string check = "all";
    uint64_t nets = 1000;
    uint64_t frames = 100;
    uint64_t cases = 1000000;
    uint64_t seed = 1;
};

int run_verify(const VerifyArgs& a) {
    bool ok = true;
    if (a.check == "all" || a.check == "equivalence") {
        const auto r = verify::check_equivalence(a.nets, a.frames, a.seed);
        std::printf("%s equivalence: %llu random nets (%llu frames) + %llu default-net frames, %llu mismatches, %.1f s%s%s\n",
                    r.passed() ? "PASS" : "FAIL", static_cast<unsigned long long>(r.nets),
                    static_cast<unsigned long long>(r.net_frames), static_cast<unsigned long long>(r.default_frames),
                    static_cast<unsigned long long>(r.mismatches), r.seconds, r.passed() ? "" : ": ",
                    r.first_mismatch.c_str());
        ok = ok && r.passed();
    }
    if (a.check == "all" || a.check == "fuzz") {
        const auto r = verify::fuzz_codec(a.cases, a.seed);
        std::printf("%s codec fuzz: %llu cases, %llu round trips, %llu rejected, %llu failures, %.1f s%s%s\n",
                    r.passed() ? "PASS" : "FAIL", static_cast<unsigned long long>(r.cases),
                    static_cast<unsigned long long>(r.roundtrips), static_cast<unsigned long long>(r.rejected),
                    static_cast<unsigned long long>(r.failures), r.seconds, r.passed() ? "" : ": ",
                    r.first_failure.c_str());
        ok = ok && r.passed();
    }
    if (a.check == "all" || a.check == "gradients") {
        const auto r = verify::check_gradients(a.seed);
        const bool pass = r.max_relative_error < 1e-4;
        std::printf("%s gradients: %zu parameters, max relative error %.3g (limit 1e-4)\n", pass ? "PASS" : "FAIL",
                    r.parameters, r.max_relative_error);
        ok = ok && pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neurotrail: trail-following robot on a simulated neuromorphic chip"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "neurotrail 1.0");

    GenMapArgs gm;
    auto* gen = app.add_subcommand("gen-map", "generate a random trail map");
    gen->add_option("--out", gm.out, "map JSON path")->required();
    gen->add_option("--seed", gm.map.seed, "map seed");
    gen->add_option("--length", gm.map.length, "centerline length in meters")->check(CLI::PositiveNumber);
    gen->add_option("--width", gm.map.width, "trail width in meters")->check(CLI::PositiveNumber);
    gen->add_option("--max-curvature", gm.map.max_curvature, "largest curvature in 1/m")->check(CLI::NonNegativeNumber);

    CollectArgs ca;
    auto* col = app.add_subcommand("collect", "record a driving dataset");
    auto* o_oracle = col->add_flag("--oracle", ca.oracle, "drive with the scripted oracle pilot");
    auto* o_teleop = col->add_flag("--teleop", ca.teleop, "serve the teleoperation websocket");
    o_oracle->excludes(o_teleop);
    col->add_option("--map", ca.map, "map JSON")->required();
    col->add_option("--out", ca.out, "dataset directory")->required();
    col->add_option("--frames", ca.collect.frames, "samples to record (oracle)")->check(CLI::PositiveNumber);
    col->add_option("--seed", ca.collect.seed, "collection seed (oracle)");
    col->add_option("--speed", ca.collect.base_speed, "base wheel speed ratio")->check(CLI::Range(0.01, 1.0));
    col->add_option("--perturb-rate", ca.collect.perturb_rate, "per-frame chance of a random command burst")
        ->check(CLI::Range(0.0, 1.0));
    col->add_option("--label-margin", ca.collect.label_margin, "skip frames this close to a decision boundary (m)")
        ->check(CLI::NonNegativeNumber);
    col->add_option("--host", ca.teleop_opt.host, "teleop bind address");
    col->add_option("--port", ca.teleop_opt.port, "teleop websocket port");
    col->add_option("--duration", ca.teleop_opt.duration_s, "teleop session length in seconds (0 = until Ctrl-C)");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train a trinary network on a dataset");
    tr->add_option("--data", ta.data, "dataset directory")->required();
    tr->add_option("--out", ta.out, "model output path")->required();
    tr->add_option("--epochs", ta.cfg.epochs, "training epochs")->check(CLI::PositiveNumber);
    tr->add_option("--batch", ta.cfg.batch_size, "batch size")->check(CLI::PositiveNumber);
    tr->add_option("--lr", ta.cfg.learning_rate, "peak learning rate")->check(CLI::PositiveNumber);
    tr->add_option("--seed", ta.cfg.seed, "training seed");
    tr->add_flag("--quiet", ta.quiet, "no per-epoch lines");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "evaluate a model on a dataset");
    ev->add_option("--model", ea.model, "model path")->required();
    ev->add_option("--data", ea.data, "dataset directory")->required();
    ev->add_option("--split", ea.split, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));

    CompileArgs co;
    auto* cmp = app.add_subcommand("compile", "map a model onto chip cores");
    cmp->add_option("--model", co.model, "model path")->required();
    cmp->add_option("--out", co.out, "program output path")->required();
    cmp->add_flag("--paired-lines", co.paired, "two input lines per source (+1 and -1)");
    cmp->add_option("--dup-policy", co.placement, "duplicate placement")
        ->check(CLI::IsMember({"same-core", "separate-core"}));

    InspectArgs ia;
    auto* ins = app.add_subcommand("inspect", "describe a program or model");
    auto* i_prog = ins->add_option("--program", ia.program, "program path");
    auto* i_model = ins->add_option("--model", ia.model, "model path");
    i_prog->excludes(i_model);
    ins->add_flag("--json", ia.json, "machine-readable program report");

    ServeArgs sa;
    auto* srv = app.add_subcommand("serve", "run the chip server");
    auto* s_prog = srv->add_option("--program", sa.program, "program path");
    auto* s_model = srv->add_option("--model", sa.model, "model path (compiled on start)");
    s_prog->excludes(s_model);
    srv->add_option("--endpoint", sa.endpoint, "host:port (default NEUROTRAIL_ADDR or 127.0.0.1:9040)");
    srv->add_option("--max-sessions", sa.max_sessions, "exit after this many sessions");
    srv->add_flag("--quiet", sa.quiet, "no per-session log lines");

    DriveArgs da;
    auto* drv = app.add_subcommand("drive", "drive the simulated robot with a model");
    drv->add_flag("--sim", da.sim, "drive in the simulated world");
    auto* d_local = drv->add_flag("--in-process", da.in_process, "simulate the chip in this process (default)");
    auto* d_remote = drv->add_flag("--remote", da.remote, "use a chip server");
    d_local->excludes(d_remote);
    drv->add_option("--model", da.model, "model path")->required();
    drv->add_option("--program", da.program, "program path (in-process; default compiles the model)");
    drv->add_option("--map", da.map, "map JSON")->required();
    drv->add_option("--endpoint", da.endpoint, "server host:port");
    drv->add_option("--distance", da.distance, "stop after this many meters (0 = whole map)")
        ->check(CLI::NonNegativeNumber);
    drv->add_option("--speed", da.speed, "base wheel speed ratio")->check(CLI::Range(0.01, 1.0));
    drv->add_option("--seed", da.seed, "render noise seed");
    drv->add_option("--log", da.log, "drive log JSON-lines output");
    drv->add_option("--timeout-ms", da.timeout_ms, "histogram timeout")->check(CLI::PositiveNumber);

    BenchArgs ba;
    auto* bn = app.add_subcommand("bench", "measure frame -> histogram throughput");
    bn->add_option("--model", ba.model, "model path")->required();
    bn->add_option("--program", ba.program, "program path");
    bn->add_option("--map", ba.map, "map JSON for the frames");
    auto* b_ep = bn->add_option("--endpoint", ba.endpoint, "external server (default: loopback server thread)");
    bn->add_flag("--in-process", ba.in_process, "skip the protocol")->excludes(b_ep);
    bn->add_option("--frames", ba.frames, "frames to time")->check(CLI::PositiveNumber);
    bn->add_option("--seed", ba.seed, "map and noise seed");

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "run built-in consistency checks");
    ver->add_option("--check", va.check, "equivalence, fuzz, gradients or all")
        ->check(CLI::IsMember({"all", "equivalence", "fuzz", "gradients"}));
    ver->add_option("--nets", va.nets, "random small networks");
    ver->add_option("--frames", va.frames, "default-network frames");
    ver->add_option("--cases", va.cases, "codec fuzz cases");
    ver->add_option("--seed", va.seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 2;
    }

    try {
        if (*gen) return run_gen_map(gm);
        if (*col) {
            if (!ca.oracle && !ca.teleop) throw UsageError("collect needs --oracle or --teleop");
            return run_collect(ca);
        }
        if (*tr) return run_train(ta);
        if (*ev) return run_eval(ea);
        if (*cmp) return run_compile(co);
        if (*ins) {
            if (ia.program.empty() && ia.model.empty()) throw UsageError("inspect needs --program or --model");
            return run_inspect(ia);
        }
        if (*srv) {
            if (sa.program.empty() && sa.model.empty()) throw UsageError("serve needs --program or --model");
            return run_serve(sa);
        }
        if (*drv) return run_drive(da);
        if (*bn) return run_bench(ba);
        if (*ver) return run_verify(va);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
