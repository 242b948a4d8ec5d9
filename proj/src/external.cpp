// SPDX-License-Identifier: Apache-2.0
#include "talm/external.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <sstream>

#include "talm/datasets.hpp"
#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm::gen {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorCode::GeneratorError, what + ": " + std::strerror(errno));
}

void ignore_sigpipe() {
    static const bool once = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json error_message(const std::string& message) { return {{"op", "error"}, {"message", message}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Transports

bool FdLineReader::read_line(std::string& line) {
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return true;
        }
        char chunk[4096];
        const auto n = ::read(fd_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            if (buffer_.empty()) return false;
            line = std::move(buffer_);
            buffer_.clear();
            return true;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) fail("write to generator channel failed");
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

SubprocessChannel::SubprocessChannel(const std::string& command) {
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) fail("pipe");
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        fail("pipe");
    }
    pid_ = ::fork();
    if (pid_ < 0) fail("fork");
    if (pid_ == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    reader_ = FdLineReader(from_child_);
}

SubprocessChannel::~SubprocessChannel() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
        }
    }
}

void SubprocessChannel::send(const std::string& line) { write_all(to_child_, line + "\n"); }

std::string SubprocessChannel::receive() {
    std::string line;
    if (!reader_.read_line(line)) throw Error(ErrorCode::GeneratorError, "generator process closed its output");
    return line;
}

TcpChannel::TcpChannel(const std::string& host, int port) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto port_text = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
        throw Error(ErrorCode::GeneratorError, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd_ < 0) continue;
        if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd_);
        fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) fail("cannot connect to " + host + ":" + port_text);
    reader_ = FdLineReader(fd_);
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send(const std::string& line) { write_all(fd_, line + "\n"); }

std::string TcpChannel::receive() {
    std::string line;
    if (!reader_.read_line(line)) throw Error(ErrorCode::GeneratorError, "generator connection closed");
    return line;
}

// ---------------------------------------------------------------------------
// Client

ExternalGenerator::ExternalGenerator(std::unique_ptr<LineChannel> channel, std::string description)
    : channel_(std::move(channel)), description_(std::move(description)) {
    const auto hello = exchange({{"op", "hello"}});
    if (hello.value("op", "") != "hello") throw Error(ErrorCode::GeneratorError, "bad handshake: " + dump(hello));
    try {
        caps_.supports_update = hello.at("supports_update").get<bool>();
        caps_.supports_beam = hello.at("supports_beam").get<bool>();
        const auto concurrent = hello.at("concurrent").get<std::int64_t>();
        caps_.concurrent_requests = static_cast<std::size_t>(std::max<std::int64_t>(1, concurrent));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::GeneratorError, std::string("bad handshake: ") + e.what());
    }
}

json ExternalGenerator::exchange(const json& message) {
    std::lock_guard lock(mutex_);
    channel_->send(dump(message));
    const auto line = channel_->receive();
    json reply;
    try {
        reply = json::parse(line);
    } catch (const json::parse_error&) {
        throw Error(ErrorCode::GeneratorError, "generator sent invalid JSON: " + line.substr(0, 200));
    }
    if (!reply.is_object()) throw Error(ErrorCode::GeneratorError, "generator reply is not an object");
    if (reply.value("op", "") == "error") {
        const auto msg = reply.value("message", std::string("unspecified error"));
        if (msg.starts_with("CapabilityUnsupported")) throw Error(ErrorCode::CapabilityUnsupported, msg);
        throw Error(ErrorCode::GeneratorError, "generator error: " + msg);
    }
    return reply;
}

GenerateResponse ExternalGenerator::generate(const GenerateRequest& request) {
    request.sampling.validate();
    if (request.sampling.mode == SamplingMode::Beam && !caps_.supports_beam) {
        throw Error(ErrorCode::CapabilityUnsupported, "generator does not support beam decoding");
    }
    const json message = {
        {"op", "generate"},
        {"prefix", request.prefix},
        {"stop", request.stop_markers},
        {"max_chars", request.max_chars},
        {"mode", std::string(to_string(request.sampling.mode))},
        {"temperature", request.sampling.temperature},
        {"top_k", request.sampling.top_k},
        {"beam_width", request.sampling.beam_width},
        {"seed", request.sampling.seed},
    };
    const auto reply = exchange(message);
    GenerateResponse response;
    try {
        if (reply.at("op").get<std::string>() != "result") throw Error(ErrorCode::GeneratorError, "expected result");
        response.text = reply.at("text").get<std::string>();
        response.stop.kind = stop_kind_from_string(reply.at("stop_reason").get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::GeneratorError, std::string("bad generate reply: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::GeneratorError, std::string("bad generate reply: ") + e.what() + " in " + dump(reply));
    }
    if (response.stop.kind == StopKind::Marker) {
        // The wire carries only the stop kind; the marker is the requested stop
        // the text ends with (the longest one if several do).
        for (const auto& m : request.stop_markers) {
            if (!m.empty() && response.text.ends_with(m) && m.size() > response.stop.marker.size()) {
                response.stop.marker = m;
            }
        }
        if (response.stop.marker.empty()) {
            throw Error(ErrorCode::GeneratorError, "generator reported a marker stop but the text ends with no marker");
        }
    }
    return response;
}

UpdateReport ExternalGenerator::update(const ToolUseSet& dataset) {
    if (!caps_.supports_update) throw Error(ErrorCode::CapabilityUnsupported, "generator does not support update");
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "update needs a non-empty tool-use set");
    static std::atomic<std::uint64_t> counter{0};
    const auto path = std::filesystem::temp_directory_path() /
                      ("talm-update-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".jsonl");
    data::save_tool_use_set(path, dataset);
    struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    } cleanup{path};
    const auto reply = exchange({{"op", "update"}, {"dataset_path", path.string()}});
    try {
        if (reply.at("op").get<std::string>() != "updated") throw Error(ErrorCode::GeneratorError, "expected updated");
        return {dataset.size(), reply.at("version").get<std::uint64_t>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::GeneratorError, std::string("bad update reply: ") + e.what());
    }
}

std::unique_ptr<ExternalGenerator> connect_external(const std::string& spec) {
    if (spec.starts_with("cmd=")) {
        const auto command = spec.substr(4);
        if (command.empty()) throw Error(ErrorCode::ConfigError, "external generator command is empty");
        return std::make_unique<ExternalGenerator>(std::make_unique<SubprocessChannel>(command),
                                                   "external:" + spec);
    }
    if (spec.starts_with("tcp=")) {
        const auto addr = spec.substr(4);
        const auto colon = addr.rfind(':');
        const auto port = colon == std::string::npos ? std::nullopt : parse_number(addr.substr(colon + 1));
        if (!port || *port < 1 || *port > 65535 || *port != static_cast<int>(*port)) {
            throw Error(ErrorCode::ConfigError, "external tcp spec must be tcp=host:port");
        }
        return std::make_unique<ExternalGenerator>(
            std::make_unique<TcpChannel>(addr.substr(0, colon), static_cast<int>(*port)), "external:" + spec);
    }
    throw Error(ErrorCode::ConfigError, "external generator spec must start with cmd= or tcp=");
}

// ---------------------------------------------------------------------------
// Server

json handle_wire_message(Generator& generator, const std::string& line) {
    json request;
    try {
        request = json::parse(line);
    } catch (const json::parse_error& e) {
        return error_message(std::string("invalid JSON: ") + e.what());
    }
    if (!request.is_object()) return error_message("request must be an object");
    const auto op = request.value("op", std::string());
    try {
        if (op == "hello") {
            const auto caps = generator.capabilities();
            return {{"op", "hello"},
                    {"supports_update", caps.supports_update},
                    {"supports_beam", caps.supports_beam},
                    {"concurrent", caps.concurrent_requests}};
        }
        if (op == "generate") {
            GenerateRequest req;
            req.prefix = request.at("prefix").get<std::string>();
            req.stop_markers = request.value("stop", std::vector<std::string>{});
            req.max_chars = request.value("max_chars", std::size_t{2048});
            req.sampling.mode = sampling_mode_from_string(request.value("mode", std::string("random")));
            req.sampling.temperature = request.value("temperature", 1.0);
            req.sampling.top_k = request.value("top_k", std::size_t{40});
            req.sampling.beam_width = request.value("beam_width", std::size_t{4});
            req.sampling.seed = request.value("seed", std::uint64_t{0});
            req.sampling.validate();
            const auto resp = generator.generate(req);
            return {{"op", "result"}, {"text", resp.text}, {"stop_reason", std::string(to_string(resp.stop.kind))}};
        }
        if (op == "update") {
            const auto dataset = data::load_tool_use_set(request.at("dataset_path").get<std::string>());
            const auto report = generator.update(dataset);
            return {{"op", "updated"}, {"version", report.version}};
        }
        return error_message("unknown op '" + op + "'");
    } catch (const Error& e) {
        return error_message(std::string(to_string(e.code())) + ": " + e.what());
    } catch (const json::exception& e) {
        return error_message(std::string("bad request: ") + e.what());
    }
}

void serve_wire_protocol(Generator& generator, int in_fd, int out_fd) {
    ignore_sigpipe();
    FdLineReader reader(in_fd);
    std::string line;
    while (reader.read_line(line)) {
        if (trim(line).empty()) continue;
        write_all(out_fd, dump(handle_wire_message(generator, line)) + "\n");
    }
}

void serve_tcp(Generator& generator, int port, const std::function<void(int)>& on_listening,
               std::size_t max_connections) {
    ignore_sigpipe();
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) fail("socket");
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 4) != 0) {
        ::close(listener);
        fail("cannot listen on port " + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    if (on_listening) on_listening(ntohs(addr.sin_port));
    for (std::size_t served = 0; max_connections == 0 || served < max_connections; ++served) {
        const int conn = ::accept(listener, nullptr, nullptr);
        if (conn < 0) {
            if (errno == EINTR) continue;
            ::close(listener);
            fail("accept");
        }
        try {
            serve_wire_protocol(generator, conn, conn);
        } catch (const Error&) {
            // A dropped client ends its session only.
        }
        ::close(conn);
    }
    ::close(listener);
}

}  // namespace talm::gen
