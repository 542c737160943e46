#pragma once

#include "cellscope/cellscope.h"

#include <cstddef>
#include <string>

namespace cli {

struct ServeOptions {
    std::string input;
    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    cs_level level = CS_LEVEL_FINE;
    double fps = 30;
    int ticks_per_frame = 1;
    int keyframe_every = 30;           // delta mode only
    std::size_t delta_above = 2000;    // nodes
    cs_layout_options layout{};
};

// Blocks until SIGINT/SIGTERM. Returns the process exit code.
int serve(const ServeOptions& o);

}  // namespace cli
