#pragma once

#include <stdexcept>
#include <string>

namespace uniembed {

// Base class for all domain errors. The CLI maps these to exit code 1.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct shape_error : error {
    using error::error;
};

// Bad arguments to an operation (empty index, too few rows, ...).
struct usage_error : error {
    using error::error;
};

struct sampling_error : error {
    using error::error;
};

struct train_error : error {
    using error::error;
};

// Item could not be routed to a specialist model.
struct routing_error : error {
    using error::error;
};

// Unreadable or wrong-version file container.
struct format_error : error {
    using error::error;
};

// Malformed content inside a file (bad line, truncated payload).
struct parse_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

// Invalid generator specification.
struct spec_error : error {
    using error::error;
};

struct comparison_error : error {
    using error::error;
};

}  // namespace uniembed
