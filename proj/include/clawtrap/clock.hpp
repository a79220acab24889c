#pragma once

#include <atomic>
#include <cstdint>

namespace clawtrap {

struct Timestamp {
    std::int64_t wall_ms = 0;   // milliseconds since the Unix epoch
    std::int64_t mono_ns = 0;   // steady clock, only comparable within one process

    bool operator==(const Timestamp&) const = default;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() override;
};

/// Clock that reports whatever it was last set to. Used for deterministic replays.
class ManualClock final : public Clock {
public:
    void set(std::int64_t tick) { tick_.store(tick); }
    Timestamp now() override {
        const auto t = tick_.load();
        return {t, t};
    }

private:
    std::atomic<std::int64_t> tick_{0};
};

}  // namespace clawtrap
