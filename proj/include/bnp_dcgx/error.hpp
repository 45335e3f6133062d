#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcgx {

enum class Errc {
  NonFinite,
  ShapeMismatch,
  TooSmall,
  InvalidConfig,
  EigenFailure,
  NegativeChi,
  NotPD,
  NonPositiveSigma,
  StabilityRejectionExhausted,
  SingularJacobian,
  UnstableTruth,
  Io,
  Parse,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonFinite: return "NonFinite";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TooSmall: return "TooSmall";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EigenFailure: return "EigenFailure";
    case Errc::NegativeChi: return "NegativeChi";
    case Errc::NotPD: return "NotPD";
    case Errc::NonPositiveSigma: return "NonPositiveSigma";
    case Errc::StabilityRejectionExhausted: return "StabilityRejectionExhausted";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::UnstableTruth: return "UnstableTruth";
    case Errc::Io: return "Io";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dcgx
