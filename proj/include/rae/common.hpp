#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rae {

// Error categories map 1:1 onto CLI exit codes.
enum class Errc {
    usage = 2,
    capacity = 3,
    integrity = 4,
    io = 5,
};

class Error : public std::runtime_error {
public:
    Error(Errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Errc kind() const { return kind_; }

private:
    Errc kind_;
};

// Execution policy for the data-parallel kernels. Every kernel has a serial
// reference path; the parallel path must produce bit-identical results.
enum class Exec {
    serial,
    parallel,
};

}  // namespace rae
