#pragma once

#include <iosfwd>

namespace humorgen::cli {

/// Exit codes. Errors are also written to `err` as one JSON object.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,       // bad flags or config, reported before any request
  kRunFailed = 3,   // gateway failures, aborted batches, partial results
  kBadInput = 4,    // malformed or invalid input records
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace humorgen::cli
