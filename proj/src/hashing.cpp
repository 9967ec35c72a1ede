#include "cesoforge/hashing.hpp"

#include <cstdio>

namespace cesoforge {

std::string hex64(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace cesoforge
