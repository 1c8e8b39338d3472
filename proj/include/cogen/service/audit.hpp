#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/backends/backend.hpp"

namespace cogen {

inline constexpr std::size_t kAuditWindow = 12;

struct AuditFinding {
  std::size_t request_index = 0;
  std::string field;    // "profile" or "history[i]"
  std::size_t offset = 0;  // into the normalized payload text
  std::string excerpt;  // the matching window
};

struct AuditVerdict {
  bool pass = true;
  std::size_t requests_checked = 0;
  std::vector<AuditFinding> findings;
};

// Lowercases ASCII and collapses whitespace runs to one space.
std::string normalize_for_audit(std::string_view text);

// Fails when any window of `window` characters of a normalized context field
// occurs in a normalized payload. Each payload is checked as raw bytes and,
// when it parses as JSON, as the concatenation of its decoded strings. One
// finding per (request, field), at the first offending offset.
AuditVerdict privacy_audit(const std::vector<std::string>& payloads, const ContextBundle& context,
                           std::size_t window = kAuditWindow);

}  // namespace cogen
