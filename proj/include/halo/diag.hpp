#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace halo {

// Warning sink, replaceable for tests or embedding. Defaults to stderr.
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> handler =
      [](const std::string& msg) { std::cerr << "[halo] warning: " << msg << '\n'; };
  return handler;
}

inline void warn(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

}  // namespace halo
