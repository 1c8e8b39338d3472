#include "cogen/service/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "cogen/decoder/decoder.hpp"
#include "cogen/error.hpp"
#include "json_util.hpp"

namespace cogen {

WireResponse handle_request(const LanguageModel& backend, const WireRequest& request) {
  WireResponse response;
  const auto& vocab = backend.vocab();
  try {
    switch (request.kind) {
      case WireKind::hello:
        response.kind = WireKind::hello;
        response.vocab_hash = vocab.hash();
        response.vocab_size = vocab.size();
        break;
      case WireKind::logits: {
        if (request.top_k == 0) throw InvalidConfig("top_k must be at least 1");
        auto dist = backend.next_distribution(ConditioningInput::context_blind(request.instruction, request.prefix_ids));
        auto top = top_k_project(dist, request.top_k);
        response.kind = WireKind::logits;
        response.vocab_hash = vocab.hash();
        response.entries = top.ranked();
        break;
      }
      case WireKind::generate:
        response.kind = WireKind::generate;
        response.vocab_hash = vocab.hash();
        response.tokens = decode_single(backend, ConditioningInput::context_blind(request.instruction), request.sampling);
        break;
      case WireKind::error: throw ProtocolError("error is not a request kind");
    }
  } catch (const Error& e) {
    response = WireResponse{};
    response.kind = WireKind::error;
    response.message = e.what();
  }
  return response;
}

HostPort parse_host_port(std::string_view text) {
  HostPort hp;
  std::string_view port;
  if (text.starts_with("[")) {
    auto close = text.find(']');
    if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':')
      throw InvalidConfig("bad address '" + std::string(text) + "'");
    hp.host = std::string(text.substr(1, close - 1));
    port = text.substr(close + 2);
  } else {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw InvalidConfig("address '" + std::string(text) + "' lacks a port");
    hp.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  if (hp.host.empty() || port.empty() || port.size() > 5) throw InvalidConfig("bad address '" + std::string(text) + "'");
  unsigned long value = 0;
  for (char c : port) {
    if (c < '0' || c > '9') throw InvalidConfig("bad port in '" + std::string(text) + "'");
    value = value * 10 + static_cast<unsigned long>(c - '0');
  }
  if (value > 65535) throw InvalidConfig("port out of range in '" + std::string(text) + "'");
  hp.port = static_cast<std::uint16_t>(value);
  return hp;
}

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Returns false on orderly close before any byte; throws on errors or on a
// close in the middle of the buffer.
bool read_exact(int fd, char* buf, std::size_t n, bool allow_eof) {
  std::size_t got = 0;
  while (got < n) {
    auto r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) {
      if (got == 0 && allow_eof) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("timed out waiting for the peer");
      throw TransportError(errno_text("recv"));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_all(int fd, std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    auto r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(r);
  }
}

// nullopt on a clean close between frames.
std::optional<std::string> read_frame(int fd) {
  char header[4];
  if (!read_exact(fd, header, 4, true)) return std::nullopt;
  auto n = frame_length(std::string_view(header, 4));
  std::string body(n, '\0');
  if (n) read_exact(fd, body.data(), n, false);
  return body;
}

void set_timeouts(int fd, int timeout_ms) {
  if (timeout_ms <= 0) return;
  timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) ::freeaddrinfo(head);
  }
};

AddrInfo resolve(const HostPort& hp, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo info;
  auto port = std::to_string(hp.port);
  if (int rc = ::getaddrinfo(hp.host.c_str(), port.c_str(), &hints, &info.head); rc != 0)
    throw TransportError("cannot resolve '" + hp.host + "': " + ::gai_strerror(rc), false);
  return info;
}

}  // namespace

LogitServer::LogitServer(std::shared_ptr<const LanguageModel> backend, ServerConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) throw InvalidConfig("server needs a backend");
  if (backend_->role() != Role::large_cloud) throw InvalidConfig("the logit service serves large_cloud backends only");
}

LogitServer::~LogitServer() { stop(); }

void LogitServer::start() {
  if (running_) return;
  auto hp = parse_host_port(config_.listen);
  auto info = resolve(hp, true);
  int fd = -1;
  for (auto* ai = info.head; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) break;
    ::close(fd);
    fd = -1;
  }
  if (fd < 0) throw TransportError("cannot listen on " + config_.listen + ": " + std::strerror(errno), false);
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                           : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  host_ = hp.host;
  listen_fd_ = fd;
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

std::string LogitServer::address() const {
  return (host_.find(':') != std::string::npos ? "[" + host_ + "]" : host_) + ":" + std::to_string(port_);
}

void LogitServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
}

void LogitServer::accept_loop() {
  while (running_) {
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    ++connections_;
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void LogitServer::serve_connection(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  try {
    while (running_) {
      auto body = read_frame(fd);
      if (!body) break;
      WireResponse response;
      bool close_after = false;
      ServerLogEntry entry;
      entry.payload_bytes = body->size();
      entry.payload_digest = hex64(fnv1a64(*body));
      if (config_.debug_payloads) entry.payload = *body;
      try {
        auto request = decode_request(*body);
        entry.session = request.session;
        entry.kind = std::string(to_string(request.kind));
        entry.prefix_length = request.prefix_ids.size();
        response = handle_request(*backend_, request);
      } catch (const ProtocolError& e) {
        entry.kind = "malformed";
        response.kind = WireKind::error;
        response.message = e.what();
        close_after = true;
      }
      append_log(std::move(entry));
      write_all(fd, frame(encode_response(response)));
      if (close_after) break;
    }
  } catch (const Error&) {
    // Transport failure or oversized frame: drop this connection only.
  }
  std::lock_guard lock(mu_);
  std::erase(open_fds_, fd);
  ::close(fd);
}

void LogitServer::append_log(ServerLogEntry entry) {
  std::lock_guard lock(mu_);
  entry.seq = next_seq_++;
  if (!config_.log_path.empty()) {
    detail::json j{{"seq", entry.seq},
                   {"session", entry.session},
                   {"kind", entry.kind},
                   {"payload_bytes", entry.payload_bytes},
                   {"payload_digest", entry.payload_digest},
                   {"prefix_length", entry.prefix_length}};
    if (config_.debug_payloads) j["payload"] = entry.payload;
    std::ofstream out(config_.log_path, std::ios::app);
    out << j.dump() << '\n';
  }
  log_.push_back(std::move(entry));
}

std::vector<ServerLogEntry> LogitServer::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

RemoteCloudModel::RemoteCloudModel(std::string address, const Vocab& local_vocab, RemoteOptions options)
    : address_(std::move(address)),
      vocab_hash_(local_vocab.hash()),
      vocab_size_(local_vocab.size()),
      options_(std::move(options)) {
  parse_host_port(address_);
}

RemoteCloudModel::~RemoteCloudModel() { close(); }

void RemoteCloudModel::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void RemoteCloudModel::connect() {
  auto hp = parse_host_port(address_);
  auto info = resolve(hp, false);
  int fd = -1;
  int last_errno = 0;
  for (auto* ai = info.head; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    set_timeouts(fd, options_.timeout_ms);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  if (fd < 0) throw TransportError("cannot connect to " + address_ + ": " + std::strerror(last_errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  fd_ = fd;
  WireRequest hello{WireKind::hello, options_.session, {}, {}, 0, {}};
  auto payload = encode_request(hello);
  record(payload);
  WireResponse response;
  try {
    write_all(fd_, frame(payload));
    auto body = read_frame(fd_);
    if (!body) throw TransportError("server closed the connection during hello");
    response = decode_response(*body);
  } catch (...) {
    close();
    throw;
  }
  if (response.kind == WireKind::error) {
    close();
    throw ProtocolError("server rejected hello: " + response.message);
  }
  if (response.kind != WireKind::hello || response.vocab_hash != vocab_hash_ || response.vocab_size != vocab_size_) {
    close();
    throw IncompatibleVocab("server at " + address_ + " uses a different vocabulary");
  }
}

WireResponse RemoteCloudModel::round_trip(const WireRequest& request) {
  if (fd_ < 0) connect();
  auto payload = encode_request(request);
  record(payload);
  WireResponse response;
  try {
    write_all(fd_, frame(payload));
    auto body = read_frame(fd_);
    if (!body) throw TransportError("server closed the connection");
    response = decode_response(*body);
  } catch (...) {
    close();
    throw;
  }
  if (response.kind == WireKind::error) throw ProtocolError("cloud backend error: " + response.message);
  if (response.kind != request.kind) throw ProtocolError("unexpected response kind");
  if (response.vocab_hash != vocab_hash_) throw IncompatibleVocab("cloud response carries a different vocab hash");
  return response;
}

TokenDistribution RemoteCloudModel::next_logits(const std::string& instruction, const std::vector<TokenId>& prefix,
                                                std::size_t top_k) {
  WireRequest request{WireKind::logits, options_.session, instruction, prefix, static_cast<std::uint32_t>(top_k), {}};
  return TokenDistribution::sparse(vocab_size_, round_trip(request).entries);
}

std::vector<TokenId> RemoteCloudModel::generate(const std::string& instruction, const SamplingConfig& sampling) {
  WireRequest request{WireKind::generate, options_.session, instruction, {}, 0, sampling};
  return round_trip(request).tokens;
}

}  // namespace cogen
