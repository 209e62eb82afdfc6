#pragma once

#include <stdexcept>
#include <string>

namespace metabags {

/// Bad input data: unreadable files, malformed cells, schema mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model archive that cannot be read back (wrong format tag or version).
class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace metabags
