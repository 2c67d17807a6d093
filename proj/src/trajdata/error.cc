#include "flowx/error.h"

namespace flowx {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return "input";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kState: return "state";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kMissingArtifact: return "missing_artifact";
    case ErrorKind::kNotFound: return "not_found";
  }
  return "unknown";
}

}  // namespace flowx
