// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

// Environment service. Each message is a 4-byte big-endian length followed
// by that many bytes of UTF-8 JSON; one environment session per connection.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rns/env.hpp"

namespace rns {

inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string encode_frame(const std::string& payload);
// Reads one frame. Returns false on a clean end of stream before the
// header; throws ProtocolError on an oversized or truncated frame.
bool read_frame(int fd, std::string& payload);
void write_frame(int fd, const std::string& payload);

nlohmann::json observation_json(const Observation& obs);
nlohmann::json step_json(const StepResult& r, const RandomizationDraw& draw);

// Request dispatch for one connection, independent of the transport.
class Session {
 public:
  Session(std::shared_ptr<const EnvAssets> assets, EnvConfig config) : env_(std::move(assets), std::move(config)) {}

  // Sets `close` when the connection should end after this reply.
  nlohmann::json handle(const nlohmann::json& request, bool& close);
  nlohmann::json handle_text(const std::string& text, bool& close);

 private:
  Environment env_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
};

class Server {
 public:
  Server(std::shared_ptr<const EnvAssets> assets, EnvConfig config, ServerOptions opts = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve(int fd);

  std::shared_ptr<const EnvAssets> assets_;
  EnvConfig config_;
  ServerOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

// Blocking client used by tools and tests.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  nlohmann::json request(const nlohmann::json& msg);
  void send_raw(const std::string& bytes);
  // Next reply, or nullopt when the server closed the connection.
  std::optional<nlohmann::json> receive();
  void close();

 private:
  int fd_ = -1;
};

}  // namespace rns
