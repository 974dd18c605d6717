#pragma once

namespace mixkit {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace mixkit
