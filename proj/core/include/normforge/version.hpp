#pragma once

#include <string>

namespace normforge {

/// Human-readable version string.
const char* version_string();

/// Git-style (blob SHA-1) content hash of the version string; written into
/// run summaries for provenance.
std::string version_content_hash();

}  // namespace normforge
