#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cogen/backends/backend.hpp"
#include "cogen/decoder/cloud_model.hpp"
#include "cogen/service/wire.hpp"

namespace cogen {

// Serves one decoded request against the large backend. Shared by the TCP
// server and LocalCloudModel. Failures come back as error responses.
WireResponse handle_request(const LanguageModel& backend, const WireRequest& request);

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port" or "[v6]:port". Port 0 asks for an ephemeral port.
HostPort parse_host_port(std::string_view text);

struct ServerLogEntry {
  std::uint64_t seq = 0;
  std::string session;
  std::string kind;
  std::size_t payload_bytes = 0;
  std::string payload_digest;  // FNV-1a 64 of the request body, hex
  std::size_t prefix_length = 0;
  std::string payload;         // only with debug_payloads
};

struct ServerConfig {
  std::string listen = "127.0.0.1:0";
  bool debug_payloads = false;
  std::filesystem::path log_path;  // JSON lines; empty disables the file
};

/// Thread-per-connection TCP front for a context-blind backend.
class LogitServer {
 public:
  LogitServer(std::shared_ptr<const LanguageModel> backend, ServerConfig config);
  ~LogitServer();
  LogitServer(const LogitServer&) = delete;
  LogitServer& operator=(const LogitServer&) = delete;

  void start();
  // Closes the listener and every open connection, then joins.
  void stop();
  std::uint16_t port() const noexcept { return port_; }
  std::string address() const;

  std::vector<ServerLogEntry> log() const;
  std::size_t connections_served() const noexcept { return connections_.load(); }

 private:
  void accept_loop();
  void serve_connection(int fd);
  void append_log(ServerLogEntry entry);

  std::shared_ptr<const LanguageModel> backend_;
  ServerConfig config_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::string host_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> connections_{0};
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
  std::vector<ServerLogEntry> log_;
  std::uint64_t next_seq_ = 0;
};

struct RemoteOptions {
  std::string session = "session";
  int timeout_ms = 10000;
};

/// Socket client for LogitServer. Connects lazily, says hello, and refuses a
/// server whose vocabulary hash differs from the local one.
class RemoteCloudModel final : public CloudModel {
 public:
  RemoteCloudModel(std::string address, const Vocab& local_vocab, RemoteOptions options = {});
  ~RemoteCloudModel() override;

  std::uint64_t vocab_hash() const override { return vocab_hash_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  TokenDistribution next_logits(const std::string& instruction, const std::vector<TokenId>& prefix,
                                std::size_t top_k) override;
  std::vector<TokenId> generate(const std::string& instruction, const SamplingConfig& sampling) override;
  void close();

 private:
  WireResponse round_trip(const WireRequest& request);
  void connect();

  std::string address_;
  std::uint64_t vocab_hash_;
  std::size_t vocab_size_;
  RemoteOptions options_;
  int fd_ = -1;
};

}  // namespace cogen
