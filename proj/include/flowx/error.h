#ifndef FLOWX_ERROR_H_
#define FLOWX_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowx {

// Error categories shared by every module. The CLI maps them onto exit codes
// and the service maps them onto HTTP statuses.
enum class ErrorKind {
  kInput,            // unreadable or inconsistent input
  kFormat,           // data file does not follow the expected layout
  kConfig,           // invalid configuration or parameters
  kState,            // object used before it is ready (e.g. untrained model)
  kCapacity,         // request exceeds a hard computational limit
  kDegenerate,       // well-formed request with no meaningful answer
  kMissingArtifact,  // a pipeline stage output is absent
  kNotFound,         // unknown id or out-of-range index
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string detail = {})
      : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace flowx

#endif  // FLOWX_ERROR_H_
