#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>

#include "neurotrail/net.hpp"

namespace neurotrail::protocol {

namespace {

using Clock = std::chrono::steady_clock;

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

sockaddr_in resolve(const Endpoint& e) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    if (::inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw ConnectError("cannot resolve host " + e.host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

// Writes everything; false if the peer went away.
bool write_all(int fd, const uint8_t* p, size_t n) {
    while (n > 0) {
        const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
        if (k < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += k;
        n -= static_cast<size_t>(k);
    }
    return true;
}

// Appends whatever is readable; false on EOF or error.
bool read_some(int fd, std::vector<uint8_t>& buf) {
    uint8_t tmp[65536];
    for (;;) {
        const ssize_t k = ::recv(fd, tmp, sizeof tmp, 0);
        if (k > 0) {
            buf.insert(buf.end(), tmp, tmp + k);
            return true;
        }
        if (k < 0 && errno == EINTR) continue;
        return false;
    }
}

}  // namespace

struct Server::Session {
    int fd = -1;
    bool greeted = false;
    std::optional<ChipState> chip;
    std::vector<uint8_t> inbox;
    std::vector<uint8_t> outbox;
};

Server::Server(CoreletProgram program, ServerOptions options)
    : program_(std::move(program)), options_(std::move(options)) {
    // Reject a bad program before binding.
    ChipState probe(program_, options_.sim);
    (void)probe;

    if (::pipe(wake_) != 0) throw IoError("cannot create wake pipe");
    ::fcntl(wake_[0], F_SETFL, O_NONBLOCK);
    ::fcntl(wake_[1], F_SETFL, O_NONBLOCK);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw IoError("cannot create socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(options_.endpoint);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        close_fd(listen_fd_);
        throw IoError("cannot bind " + options_.endpoint.to_string() + ": " + why);
    }
    if (::listen(listen_fd_, 8) != 0) throw IoError("cannot listen on " + options_.endpoint.to_string());
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Server::~Server() {
    close_fd(listen_fd_);
    close_fd(wake_[0]);
    close_fd(wake_[1]);
}

void Server::stop() {
    stopping_ = true;
    const char c = 1;
    [[maybe_unused]] auto n = ::write(wake_[1], &c, 1);
}

ServerStats Server::stats() const { return {sessions_.load(), refused_.load(), frames_.load(), errors_.load()}; }

void Server::log(const std::string& line) const {
    if (options_.log) options_.log(line);
}

void Server::send_error(int fd, ErrorCode code, const std::string& text) {
    const auto bytes = encode(ErrorMessage{static_cast<uint16_t>(code), text});
    write_all(fd, bytes.data(), bytes.size());
    ++errors_;
}

// Handles every complete message in the inbox; false ends the session.
bool Server::serve_bytes(Session& s) {
    size_t pos = 0;
    s.outbox.clear();
    for (;;) {
        const auto r = decode_prefix(std::span(s.inbox).subspan(pos));
        if (r.status == DecodeStatus::NeedMore) break;
        if (r.status != DecodeStatus::Ok) {
            write_all(s.fd, s.outbox.data(), s.outbox.size());
            send_error(s.fd, ErrorCode::Malformed, status_name(r.status));
            return false;
        }
        pos += r.consumed;
        const Message& m = *r.message;
        if (const auto* h = std::get_if<Hello>(&m)) {
            const Shape3& in = program_.input_shape;
            if (h->width != in.width || h->height != in.height || h->features != in.features ||
                h->classes != program_.num_classes) {
                write_all(s.fd, s.outbox.data(), s.outbox.size());
                send_error(s.fd, ErrorCode::ShapeMismatch,
                           "program expects " + to_string(in) + " input and " + std::to_string(program_.num_classes) +
                               " classes");
                return false;
            }
            s.greeted = true;
            s.chip.emplace(program_, options_.sim);
            encode_into(Hello{static_cast<uint16_t>(in.width), static_cast<uint16_t>(in.height),
                              static_cast<uint16_t>(in.features), program_.num_classes},
                        s.outbox);
        } else if (const auto* sp = std::get_if<Spikes>(&m)) {
            if (!s.greeted) {
                write_all(s.fd, s.outbox.data(), s.outbox.size());
                send_error(s.fd, ErrorCode::Unexpected, "SPIKES before HELLO");
                return false;
            }
            try {
                s.chip->inject_spikes(sp->events);
            } catch (const RangeError& e) {
                write_all(s.fd, s.outbox.data(), s.outbox.size());
                send_error(s.fd, ErrorCode::OutOfRange, e.what());
                return false;
            }
            ClassHistogram h = s.chip->tick();
            h.tick = sp->tick;
            encode_into(h, s.outbox);
            ++frames_;
        } else if (std::holds_alternative<Reset>(m) && s.greeted) {
            s.chip.emplace(program_, options_.sim);
            encode_into(Reset{}, s.outbox);
        } else {
            write_all(s.fd, s.outbox.data(), s.outbox.size());
            send_error(s.fd, ErrorCode::Unexpected, "unexpected message type");
            return false;
        }
    }
    s.inbox.erase(s.inbox.begin(), s.inbox.begin() + static_cast<std::ptrdiff_t>(pos));
    return write_all(s.fd, s.outbox.data(), s.outbox.size());
}

void Server::run() {
    Session session;
    uint64_t ended = 0;
    while (!stopping_) {
        pollfd fds[3] = {{wake_[0], POLLIN, 0}, {listen_fd_, POLLIN, 0}, {session.fd, POLLIN, 0}};
        const nfds_t n = session.fd >= 0 ? 3 : 2;
        if (::poll(fds, n, -1) < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (fds[0].revents) break;
        if (fds[1].revents & POLLIN) {
            int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
            if (fd >= 0) {
                set_nodelay(fd);
                if (session.fd >= 0) {
                    send_error(fd, ErrorCode::Busy, "a session is already active");
                    ::close(fd);
                    ++refused_;
                    log("refused connection: busy");
                } else {
                    session = Session{};
                    session.fd = fd;
                    ++sessions_;
                    log("session opened");
                }
            }
        }
        if (n == 3 && (fds[2].revents & (POLLIN | POLLHUP | POLLERR))) {
            const bool alive = read_some(session.fd, session.inbox) && serve_bytes(session);
            if (!alive) {
                close_fd(session.fd);
                session = Session{};
                log("session closed");
                if (options_.max_sessions && ++ended >= options_.max_sessions) break;
            }
        }
    }
    close_fd(session.fd);
}

Client::Client(const Endpoint& endpoint, std::chrono::milliseconds timeout) : timeout_(timeout) {
    sockaddr_in addr = resolve(endpoint);
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw ConnectError("cannot create socket");
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        close_fd(fd_);
        throw ConnectError("cannot connect to " + endpoint.to_string() + ": " + why);
    }
    set_nodelay(fd_);
}

Client::~Client() { close_fd(fd_); }

void Client::send(const Message& m) {
    outbox_.clear();
    encode_into(m, outbox_);
    if (!write_all(fd_, outbox_.data(), outbox_.size())) throw ConnectError("connection lost while sending");
}

Message Client::receive(Clock::time_point deadline) {
    for (;;) {
        const auto r = decode_prefix(inbox_);
        if (r.status == DecodeStatus::Ok) {
            inbox_.erase(inbox_.begin(), inbox_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
            if (const auto* e = std::get_if<ErrorMessage>(&*r.message)) throw RemoteError(e->code, e->text);
            return std::move(*r.message);
        }
        if (r.status != DecodeStatus::NeedMore) throw DecodeError(r.status);
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) throw TimeoutError("no reply within " + std::to_string(timeout_.count()) + " ms");
        pollfd p{fd_, POLLIN, 0};
        const int k = ::poll(&p, 1, static_cast<int>(left.count()));
        if (k < 0 && errno != EINTR) throw ConnectError("poll failed");
        if (k > 0 && !read_some(fd_, inbox_)) throw ConnectError("server closed the connection");
    }
}

Hello Client::hello(const Hello& mine) {
    send(mine);
    const Message m = receive(Clock::now() + timeout_);
    if (const auto* h = std::get_if<Hello>(&m)) return *h;
    throw ProtocolError("expected HELLO reply");
}

ClassHistogram Client::send_frame(const std::vector<SpikeEvent>& spikes, uint32_t tick) {
    send(Spikes{tick, spikes});
    const auto deadline = Clock::now() + timeout_;
    for (;;) {
        Message m = receive(deadline);
        if (auto* h = std::get_if<ClassHistogram>(&m)) {
            if (h->tick == tick) return std::move(*h);
            continue;  // stale reply to a frame that timed out
        }
        throw ProtocolError("expected HISTOGRAM reply");
    }
}

void Client::reset() {
    send(Reset{});
    const auto deadline = Clock::now() + timeout_;
    for (;;) {
        const Message m = receive(deadline);
        if (std::holds_alternative<Reset>(m)) return;
        if (!std::holds_alternative<ClassHistogram>(m)) throw ProtocolError("expected RESET reply");
    }
}

RemoteSession::RemoteSession(const Endpoint& endpoint, const Shape3& input, uint16_t classes,
                             std::chrono::milliseconds timeout)
    : client_(endpoint, timeout) {
    client_.hello(Hello{static_cast<uint16_t>(input.width), static_cast<uint16_t>(input.height),
                        static_cast<uint16_t>(input.features), classes});
}

ClassHistogram RemoteSession::classify(const std::vector<SpikeEvent>& spikes, uint32_t tick) {
    return client_.send_frame(spikes, tick);
}

}  // namespace neurotrail::protocol
