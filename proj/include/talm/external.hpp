// SPDX-License-Identifier: Apache-2.0
#pragma once

// Newline-delimited JSON wire protocol for out-of-process generators.
//
//   {"op":"hello"}  ->  {"op":"hello","supports_update":bool,"supports_beam":bool,"concurrent":int}
//   {"op":"generate","prefix":..,"stop":[..],"max_chars":..,"mode":"random|greedy|beam",
//    "temperature":..,"top_k":..,"beam_width":..,"seed":..}
//                   ->  {"op":"result","text":..,"stop_reason":"marker|max_chars|end_of_text"}
//   {"op":"update","dataset_path":..}  ->  {"op":"updated","version":int}
//   errors          ->  {"op":"error","message":..}

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "talm/generator.hpp"

namespace talm::gen {

/// Bidirectional line transport.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void send(const std::string& line) = 0;
    /// Throws Error(GeneratorError) on end of stream.
    [[nodiscard]] virtual std::string receive() = 0;
};

/// Reads newline-terminated lines from a file descriptor.
class FdLineReader {
public:
    explicit FdLineReader(int fd) : fd_(fd) {}
    /// False at end of stream.
    bool read_line(std::string& line);

private:
    int fd_;
    std::string buffer_;
};

void write_all(int fd, std::string_view data);

/// Runs `/bin/sh -c command` with its stdin/stdout connected to the channel.
class SubprocessChannel final : public LineChannel {
public:
    explicit SubprocessChannel(const std::string& command);
    ~SubprocessChannel() override;
    SubprocessChannel(const SubprocessChannel&) = delete;
    SubprocessChannel& operator=(const SubprocessChannel&) = delete;

    void send(const std::string& line) override;
    [[nodiscard]] std::string receive() override;

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    FdLineReader reader_{-1};
};

class TcpChannel final : public LineChannel {
public:
    TcpChannel(const std::string& host, int port);
    ~TcpChannel() override;
    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    void send(const std::string& line) override;
    [[nodiscard]] std::string receive() override;

private:
    int fd_ = -1;
    FdLineReader reader_{-1};
};

/// Client side of the wire protocol. Requests are serialized over the single
/// channel; the handshake happens in the constructor.
class ExternalGenerator final : public Generator {
public:
    ExternalGenerator(std::unique_ptr<LineChannel> channel, std::string description);

    [[nodiscard]] GeneratorKind kind() const override { return GeneratorKind::External; }
    [[nodiscard]] Capabilities capabilities() const override { return caps_; }
    [[nodiscard]] GenerateResponse generate(const GenerateRequest& request) override;
    UpdateReport update(const ToolUseSet& dataset) override;
    [[nodiscard]] std::string describe() const override { return description_; }

private:
    nlohmann::json exchange(const nlohmann::json& message);

    std::unique_ptr<LineChannel> channel_;
    std::string description_;
    Capabilities caps_;
    std::mutex mutex_;
    std::size_t updates_ = 0;
};

/// "cmd=<shell command>" or "tcp=host:port".
[[nodiscard]] std::unique_ptr<ExternalGenerator> connect_external(const std::string& spec);

/// Serves a generator over the wire protocol until end of input. Bad requests
/// are answered with {"op":"error"} and never end the loop.
void serve_wire_protocol(Generator& generator, int in_fd, int out_fd);

/// Accepts connections on 127.0.0.1:port one at a time. `on_listening` is
/// called with the bound port once the socket is ready (port 0 picks one).
void serve_tcp(Generator& generator, int port, const std::function<void(int)>& on_listening = {},
               std::size_t max_connections = 0);

/// Handles one protocol message; exposed for tests.
[[nodiscard]] nlohmann::json handle_wire_message(Generator& generator, const std::string& line);

}  // namespace talm::gen
