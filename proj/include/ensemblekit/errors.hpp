#pragma once

#include <stdexcept>
#include <string>

namespace ensemblekit {

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, method 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error {
    using error::error;
};

struct data_error : error {
    using error::error;
};

struct method_error : error {
    using error::error;
};

} // namespace ensemblekit
