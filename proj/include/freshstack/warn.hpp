#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace freshstack {

// Non-fatal conditions ("defined as 0 with warning", "skipped with warning")
// are routed through a process-wide handler so the CLI prints them and tests
// can capture them.
using WarnHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warn_mutex() {
    static std::mutex m;
    return m;
}
inline WarnHandler& warn_handler_ref() {
    static WarnHandler h = [](const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; };
    return h;
}
} // namespace detail

inline void set_warn_handler(WarnHandler h) {
    std::lock_guard<std::mutex> lock(detail::warn_mutex());
    detail::warn_handler_ref() = std::move(h);
}

inline void warn(const std::string& msg) {
    std::lock_guard<std::mutex> lock(detail::warn_mutex());
    detail::warn_handler_ref()(msg);
}

// RAII capture of warnings for tests.
class WarnCapture {
public:
    WarnCapture() {
        set_warn_handler([this](const std::string& msg) { messages_.push_back(msg); });
    }
    ~WarnCapture() {
        set_warn_handler([](const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; });
    }
    WarnCapture(const WarnCapture&) = delete;
    WarnCapture& operator=(const WarnCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const {
        for (const auto& m : messages_) {
            if (m.find(needle) != std::string::npos) return true;
        }
        return false;
    }

private:
    std::vector<std::string> messages_;
};

} // namespace freshstack
