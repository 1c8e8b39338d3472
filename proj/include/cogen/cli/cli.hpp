#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/backends/backend.hpp"
#include "cogen/core/sampling.hpp"

namespace cogen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTransport = 3;

struct BackendEntry {
  BackendDescriptor descriptor;
  bool role_set = false;       // "role" given in the file
  std::string model;           // external_http: model name sent upstream
  std::filesystem::path vocab_from;  // external_http: model file whose vocabulary is used
  int timeout_ms = 10000;      // remote and external_http
};

/// The --config file. Unknown keys are rejected, relative paths resolve
/// against the file's directory, and referenced files must exist.
///
///   {"backends": {"<name>": {"kind", "role"?, "uri", "vocab_ref"?, "model"?,
///                            "vocab_from"?, "timeout_ms"?}},
///    "templates_dir"?, "sampling"?: {"temperature"?, "top_p"?,
///    "max_new_tokens"?, "greedy"?}, "service"?: {"address"?}, "audit"?}
struct AppConfig {
  std::map<std::string, BackendEntry> backends;
  std::filesystem::path templates_dir;  // empty: built-in templates
  SamplingConfig sampling;
  std::string service_address;          // serve listens here; generate may dial it
  bool audit = false;
};

AppConfig parse_app_config(std::string_view json_text, const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& path);

// Exit code for a library failure: 1 for configuration, 3 for transport and
// protocol, 2 for everything else.
int exit_code_for(const std::exception& e) noexcept;

// args excludes the program name. Output goes to `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace cogen
