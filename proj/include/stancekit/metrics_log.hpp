#pragma once

// Append-only metrics log: one JSON object per line, shaped
//
//   {"metric": "...", "phase": "...", "timestamp": N, "value": ...}
//
// The timestamp field is a logical step counter (0, 1, 2, ...) rather than
// wall-clock time, so the log is a pure function of the run's configuration:
// re-running a command with the same config writes a byte-identical file.
// Keys inside a record are serialized in sorted order, keeping every line
// canonical.

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stancekit/error.hpp"

namespace stancekit {

class MetricsLogger {
public:
    MetricsLogger() = default; // inert until open()
    explicit MetricsLogger(const std::string& path) { open(path); }

    void open(const std::string& path) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) fail("io", "cannot open metrics log for writing: " + path);
        path_ = path;
        step_ = 0;
    }

    bool is_open() const { return out_.is_open(); }
    const std::string& path() const { return path_; }
    std::uint64_t steps() const { return step_; }

    /// Appends one record. `value` may be any JSON value (number, string,
    /// null, ...). Without an open file the call is a no-op, so library code
    /// can log unconditionally.
    void record(std::string_view phase, std::string_view metric, const nlohmann::json& value) {
        if (!out_.is_open()) return;
        nlohmann::json j;
        j["timestamp"] = step_++;
        j["phase"] = std::string(phase);
        j["metric"] = std::string(metric);
        j["value"] = value;
        out_ << j.dump() << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
    std::string path_;
    std::uint64_t step_ = 0;
};

} // namespace stancekit
