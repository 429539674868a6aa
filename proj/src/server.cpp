// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>

#include <sodium.h>

namespace rns {

using json = nlohmann::json;

namespace {

// Reads exactly n bytes; returns the count read before EOF.
std::size_t read_exact(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) break;
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return got;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  const std::size_t len = sodium_base64_ENCODED_LEN(size, sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, data, size, sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw InputError("invalid base64");
  }
  out.resize(len);
  return out;
}

std::string encode_frame(const std::string& payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame exceeds 16 MiB");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out{static_cast<char>(n >> 24), static_cast<char>(n >> 16), static_cast<char>(n >> 8),
                  static_cast<char>(n)};
  out += payload;
  return out;
}

bool read_frame(int fd, std::string& payload) {
  unsigned char header[4];
  const std::size_t got = read_exact(fd, reinterpret_cast<char*>(header), 4);
  if (got == 0) return false;
  if (got < 4) throw ProtocolError("truncated frame header");
  const std::uint32_t n = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                          (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (n > kMaxFrameBytes) throw ProtocolError("frame of " + std::to_string(n) + " bytes exceeds 16 MiB");
  payload.resize(n);
  if (read_exact(fd, payload.data(), n) < n) throw ProtocolError("truncated frame body");
  return true;
}

void write_frame(int fd, const std::string& payload) {
  const std::string frame = encode_frame(payload);
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t r = ::send(fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

json observation_json(const Observation& obs) {
  return {{"image", base64_encode(obs.image.data.data(), obs.image.data.size())},
          {"h", obs.image.height},
          {"w", obs.image.width},
          {"state", std::vector<double>(obs.state.begin(), obs.state.end())}};
}

json step_json(const StepResult& r, const RandomizationDraw& draw) {
  const auto& c = r.info.components;
  json info = {
      {"components",
       {{"progress", c.progress},
        {"align", c.align},
        {"obstacle", c.obstacle},
        {"success", c.success},
        {"collision", c.collision}}},
      {"distance", r.info.distance},
      {"d_obs", number_or_null(r.info.d_obs)},
      {"action", r.info.action},
      {"command", r.info.command},
      {"applied", r.info.applied},
      {"interval_ms", r.info.interval_ms},
      {"time", r.info.time},
      {"step", r.info.step},
      {"randomization",
       {{"latency_ms", draw.latency_ms},
        {"cam_pos_offset", vec_json(draw.cam_pos_offset)},
        {"cam_rot_offset_deg", vec_json(draw.cam_rot_offset)},
        {"light",
         {{"rotation", draw.light.rotation},
          {"intensity", draw.light.intensity},
          {"tint", vec_json(draw.light.tint)}}}}},
  };
  return {{"obs", observation_json(r.obs)},
          {"reward", r.reward},
          {"done", r.done},
          {"reason", termination_name(r.reason)},
          {"info", std::move(info)}};
}

json Session::handle(const json& req, bool& close) {
  close = false;
  if (!req.is_object() || !req.contains("cmd") || !req.at("cmd").is_string()) {
    return {{"error", "request must be an object with a string 'cmd'"}};
  }
  const std::string cmd = req.at("cmd").get<std::string>();
  try {
    if (cmd == "reset") {
      const auto& seed = req.value("seed", json(0));
      if (!seed.is_number_integer() || seed.get<std::int64_t>() < 0) return {{"error", "seed must be an integer >= 0"}};
      Stage stage = env_.config().stage;
      if (req.contains("stage")) {
        const auto& s = req.at("stage");
        if (!s.is_number_integer() || (s.get<int>() != 1 && s.get<int>() != 2)) {
          return {{"error", "stage must be 1 or 2"}};
        }
        stage = static_cast<Stage>(s.get<int>());
      }
      return {{"obs", observation_json(env_.reset(seed.get<std::uint64_t>(), stage))}};
    }
    if (cmd == "step") {
      if (!req.contains("action") || !req.at("action").is_number()) return {{"error", "step needs a numeric 'action'"}};
      const StepResult r = env_.step(req.at("action").get<double>());
      return step_json(r, env_.draw());
    }
    if (cmd == "close") {
      close = true;
      return {{"ok", true}};
    }
  } catch (const ProtocolError& e) {
    return {{"error", e.what()}};
  } catch (const InputError& e) {
    return {{"error", e.what()}};
  } catch (const SceneTooDense& e) {
    return {{"error", e.what()}};
  }
  return {{"error", "unknown cmd '" + cmd + "'"}};
}

json Session::handle_text(const std::string& text, bool& close) {
  json req;
  try {
    req = json::parse(text);
  } catch (const json::parse_error& e) {
    close = true;
    return {{"error", std::string("malformed JSON: ") + e.what()}};
  }
  return handle(req, close);
}

Server::Server(std::shared_ptr<const EnvAssets> assets, EnvConfig config, ServerOptions opts)
    : assets_(std::move(assets)), config_(std::move(config)), opts_(std::move(opts)) {
  config_.validate();
}

Server::~Server() { stop(); }

void Server::start() {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(opts_.port);
  if (::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr) != 1) {
    throw InputError("bad listen address '" + opts_.host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + opts_.host + ":" + std::to_string(opts_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

namespace {

// Error text can echo invalid UTF-8 from the request; never let that abort a reply.
std::string dump_reply(const json& reply) { return reply.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

void Server::serve(int fd) {
  try {
    Session session(assets_, config_);
    std::string payload;
    while (true) {
      try {
        if (!read_frame(fd, payload)) break;
      } catch (const ProtocolError& e) {
        write_frame(fd, dump_reply(json{{"error", e.what()}}));
        break;
      }
      bool close = false;
      const json reply = session.handle_text(payload, close);
      write_frame(fd, dump_reply(reply));
      if (close) break;
    }
  } catch (const std::exception&) {
    // Peer went away mid-reply; nothing left to tell it.
  }
  std::lock_guard lock(mutex_);
  auto it = std::find(open_fds_.begin(), open_fds_.end(), fd);
  if (it != open_fds_.end()) {
    open_fds_.erase(it);
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void Server::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

Client::Client(const std::string& host, std::uint16_t port) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw std::runtime_error("cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Client::send_raw(const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t r = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(r);
  }
}

std::optional<json> Client::receive() {
  std::string payload;
  if (!read_frame(fd_, payload)) return std::nullopt;
  return json::parse(payload);
}

json Client::request(const json& msg) {
  write_frame(fd_, msg.dump());
  auto reply = receive();
  if (!reply) throw ProtocolError("server closed the connection");
  return *reply;
}

}  // namespace rns
