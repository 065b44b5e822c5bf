#pragma once

#define QNET_VERSION "0.1.0"

#ifndef QNET_GIT_DESCRIBE
#    define QNET_GIT_DESCRIBE "unknown"
#endif

namespace qnet {

inline constexpr char const* version = QNET_VERSION;
inline constexpr char const* git_describe = QNET_GIT_DESCRIBE;

}  // namespace qnet
