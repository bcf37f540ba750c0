#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fractalsea {

// Invalid argument or out-of-domain query.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed stitch plan (cycle, dangling dependency).
class PlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration rejected before any work is done.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A stitch task failed; carries the id of the failing task.
class TaskError : public std::runtime_error {
public:
    TaskError(std::uint32_t task_id, const std::string &what)
        : std::runtime_error("task " + std::to_string(task_id) + ": " + what), task_id_(task_id) {}

    std::uint32_t task_id() const noexcept { return task_id_; }

private:
    std::uint32_t task_id_;
};

} // namespace fractalsea
