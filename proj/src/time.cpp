#include "streammem/time.hpp"

#include <cstdio>
#include <ctime>

namespace streammem {

std::string to_iso8601(Timestamp ts) {
    std::int64_t secs = ts.us / kMicrosPerSecond;
    std::int64_t frac = ts.us % kMicrosPerSecond;
    if (frac < 0) {
        frac += kMicrosPerSecond;
        --secs;
    }
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[48];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::string out(buf);
    if (frac != 0) {
        char fbuf[16];
        std::snprintf(fbuf, sizeof fbuf, ".%06lld", static_cast<long long>(frac));
        out += fbuf;
    }
    out += 'Z';
    return out;
}

}  // namespace streammem
