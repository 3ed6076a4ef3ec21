#include "dmap/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace dmap {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler() {
    static WarningHandler h;
    return h;
}

}  // namespace

void warn(const std::string& message) {
    WarningHandler h;
    {
        std::lock_guard lock(handler_mutex());
        h = handler();
    }
    if (h) {
        h(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningHandler set_warning_handler(WarningHandler next) {
    std::lock_guard lock(handler_mutex());
    return std::exchange(handler(), std::move(next));
}

}  // namespace dmap
