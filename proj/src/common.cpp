#include "specmix/common.hpp"

#include <cstdio>

namespace specmix {

namespace {
bool g_verbose = false;
}

void set_verbose(bool on) { g_verbose = on; }
bool verbose() { return g_verbose; }

void log_warn(const std::string& msg) {
    std::fprintf(stderr, "[specmix] warning: %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
    if (g_verbose) std::fprintf(stderr, "[specmix] %s\n", msg.c_str());
}

} // namespace specmix
