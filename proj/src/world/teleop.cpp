#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <optional>

#include "json.hpp"

#include "neurotrail/dataset.hpp"
#include "neurotrail/error.hpp"
#include "neurotrail/image.hpp"
#include "neurotrail/pilot.hpp"
#include "neurotrail/teleop.hpp"

namespace neurotrail::world {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

TeleopCommand parse_teleop_command(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("command is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("cmd") || !j["cmd"].is_string())
        throw ParseError("command needs a string \"cmd\" field");
    const auto cmd = parse_command(j["cmd"].get<std::string>());
    if (!cmd) throw ParseError("unknown command \"" + j["cmd"].get<std::string>() + "\"");
    TeleopCommand out;
    out.cmd = *cmd;
    if (j.contains("recording")) {
        if (!j["recording"].is_boolean()) throw ParseError("\"recording\" must be a boolean");
        out.recording = j["recording"].get<bool>();
    }
    return out;
}

struct TeleopServer::Impl {
    struct Session {
        explicit Session(tcp::socket s) : ws(std::move(s)) {}
        websocket::stream<tcp::socket> ws;
        beast::flat_buffer in;
        std::vector<uint8_t> out;
        bool writing = false;
        bool open = false;
    };

    Impl(const TrailMap& m, const WorldConfig& w, const TeleopOptions& o)
        : map(m), world_cfg(w), opt(o), acceptor(ioc), sim_timer(ioc), push_timer(ioc), end_timer(ioc),
          recorder([this](DriveSample&& s) {
              writer->write(s);
              ++stats.recorded;
              ++stats.per_class[static_cast<size_t>(s.command)];
          }) {
        if (opt.push_hz <= 0) throw ValidationError("push rate must be positive");
        world.emplace(map, world_cfg);
        if (!opt.dataset_dir.empty()) writer.emplace(opt.dataset_dir);
        boost::system::error_code ec;
        const auto addr = asio::ip::make_address(opt.host, ec);
        if (ec) throw ConnectError("bad teleop host " + opt.host);
        const tcp::endpoint ep(addr, opt.port);
        acceptor.open(ep.protocol(), ec);
        if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
        if (!ec) acceptor.bind(ep, ec);
        if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
        if (ec) throw ConnectError("cannot listen on " + opt.host + ":" + std::to_string(opt.port) + ": " + ec.message());
    }

    void accept() {
        acceptor.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
            if (ec) return;
            if (session && session->open) {
                // One driver at a time.
                boost::system::error_code ignored;
                sock.close(ignored);
            } else {
                start_session(std::move(sock));
            }
            accept();
        });
    }

    void start_session(tcp::socket sock) {
        auto s = std::make_shared<Session>(std::move(sock));
        session = s;
        s->ws.binary(true);
        s->ws.async_accept([this, s](boost::system::error_code ec) {
            if (ec) return;
            s->open = true;
            read(s);
        });
    }

    void end_session(const std::shared_ptr<Session>& s) {
        if (!s->open) return;
        s->open = false;
        // Losing the operator stops the robot.
        command = DriveCommand::Stop;
        set_recording(false);
    }

    void read(const std::shared_ptr<Session>& s) {
        s->ws.async_read(s->in, [this, s](boost::system::error_code ec, size_t) {
            if (ec) {
                end_session(s);
                return;
            }
            const std::string text = beast::buffers_to_string(s->in.data());
            s->in.consume(s->in.size());
            try {
                const TeleopCommand c = parse_teleop_command(text);
                command = c.cmd;
                if (c.recording) set_recording(*c.recording);
                ++stats.commands;
            } catch (const ParseError&) {
                ++stats.rejected;
            }
            read(s);
        });
    }

    void set_recording(bool on) {
        if (on && !writer) return;
        if (recording && !on) recorder.finish();
        recording = on;
    }

    void sim_tick() {
        auto frame = world->next_frame();
        if (!frame) {
            stats.interventions += world->interventions();
            time_offset = last_time + 1000;
            world.emplace(map, world_cfg);
            frame = world->next_frame();
        }
        ++stats.frames;
        last_time = time_offset + world->timestamp_ms();
        if (recording) {
            recorder.add_frame(last_time, *frame);
            recorder.add_command(last_time, command);
        }
        latest = encode_raw_frame(*frame);
        fresh = true;
        world->actuate(command, pilot::to_wheels(command, opt.base_speed));

        sim_deadline += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(world_cfg.dt));
        sim_timer.expires_at(sim_deadline);
        sim_timer.async_wait([this](boost::system::error_code ec) {
            if (!ec) sim_tick();
        });
    }

    void push_tick() {
        auto s = session;
        if (s && s->open && !s->writing && fresh) {
            s->out = latest;
            fresh = false;
            s->writing = true;
            s->ws.async_write(asio::buffer(s->out), [this, s](boost::system::error_code ec, size_t) {
                s->writing = false;
                if (ec)
                    end_session(s);
                else
                    ++stats.pushed;
            });
        }
        push_deadline += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / opt.push_hz));
        push_timer.expires_at(push_deadline);
        push_timer.async_wait([this](boost::system::error_code ec) {
            if (!ec) push_tick();
        });
    }

    void run() {
        accept();
        sim_deadline = push_deadline = Clock::now();
        sim_tick();
        push_tick();
        if (opt.duration_s > 0) {
            end_timer.expires_after(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opt.duration_s)));
            end_timer.async_wait([this](boost::system::error_code ec) {
                if (!ec) ioc.stop();
            });
        }
        ioc.run();
        recorder.finish();
        stats.interventions += world->interventions();
    }

    TrailMap map;
    WorldConfig world_cfg;
    TeleopOptions opt;
    asio::io_context ioc;
    tcp::acceptor acceptor;
    asio::steady_timer sim_timer, push_timer, end_timer;
    Clock::time_point sim_deadline, push_deadline;
    std::optional<SimWorld> world;
    std::optional<DatasetWriter> writer;
    Recorder recorder;
    std::shared_ptr<Session> session;
    DriveCommand command = DriveCommand::Stop;
    bool recording = false;
    std::vector<uint8_t> latest;
    bool fresh = false;
    int64_t time_offset = 0;
    int64_t last_time = 0;
    TeleopStats stats;
};

TeleopServer::TeleopServer(const TrailMap& map, const WorldConfig& world, const TeleopOptions& options)
    : impl_(std::make_unique<Impl>(map, world, options)) {}

TeleopServer::~TeleopServer() = default;

uint16_t TeleopServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopServer::run() { impl_->run(); }

void TeleopServer::stop() { impl_->ioc.stop(); }

TeleopStats TeleopServer::stats() const { return impl_->stats; }

}  // namespace neurotrail::world
