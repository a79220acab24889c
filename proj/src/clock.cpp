#include "clawtrap/clock.hpp"

#include <chrono>

namespace clawtrap {

Timestamp SystemClock::now() {
    using namespace std::chrono;
    return {duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count(),
            duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()).count()};
}

}  // namespace clawtrap
