#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <utility>

namespace genpath {

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler h = [](const std::string& msg) {
    std::cerr << "warning: " << msg << std::endl;
  };
  return h;
}

// Empty handler restores the stderr default.
inline void set_warning_handler(WarningHandler h) {
  if (h)
    warning_handler() = std::move(h);
  else
    warning_handler() = [](const std::string& msg) {
      std::cerr << "warning: " << msg << std::endl;
    };
}

inline void emit_warning(const std::string& msg) { warning_handler()(msg); }

}  // namespace genpath
